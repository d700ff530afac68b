"""Flat key-value run configuration: strict parsing, unit-suffix handling,
shipped presets, and the canonical echo used for manifest round-trips.

Schema (one `key = value` per line, '#' comments):

  circuit quantities   L, C_j, I_c, m, Bl, Q, T_bath, phi_e, eta,
                       M_phi, M_r
  frequencies/rates    omega_M, omega_T, gamma_S, gamma_T, g_ST
                       (rad/s canonically; any of them may instead carry a
                       _GHz/_MHz/_kHz/_Hz suffix meaning an ordinary
                       frequency, converted to rad/s on load)
  derived overrides    override_omega_S, override_g_MS, override_g_MT,
                       override_gamma_M (suffixes allowed),
                       override_nbar_M (dimensionless)
  conventions          eq4_convention = energy|verbatim,
                       nbar_convention = angular|linear
  truncations          n_beam, n_tlr, n_beam_reduced
  integration          dt_s (0 = auto), horizon_over_gamma_M, seed, n_traj,
                       record_stride, propagator = splitstep|euler,
                       hamiltonian_kind = effective|rwa
  gains                v_x_over_omega_T plus either v_p_over_omega_T or the
                       sweep triple v_p_over_omega_T_min/_max/_points
  run                  engine = full|reduced-sme|reduced-gaussian|
                       filter-selfloop, label (free text, optional)

Unknown keys are rejected; unit suffixes on dimensionless keys are rejected.
"""

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .params import PhysicalParams, derive_params

TWO_PI = 2.0 * math.pi


class ConfigError(ValueError):
    pass


_SUFFIXES = {"_GHz": TWO_PI * 1e9, "_MHz": TWO_PI * 1e6,
             "_kHz": TWO_PI * 1e3, "_Hz": TWO_PI}

_FREQUENCY_KEYS = ("omega_M", "omega_T", "gamma_S", "gamma_T", "g_ST",
                   "override_omega_S", "override_g_MS", "override_g_MT",
                   "override_gamma_M")

_PLAIN_FLOAT_KEYS = ("L", "C_j", "I_c", "m", "Bl", "Q", "T_bath", "phi_e",
                     "eta", "M_phi", "M_r", "override_nbar_M", "dt_s",
                     "horizon_over_gamma_M", "v_x_over_omega_T",
                     "v_p_over_omega_T", "v_p_over_omega_T_min",
                     "v_p_over_omega_T_max")

_INT_KEYS = ("n_beam", "n_tlr", "n_beam_reduced", "seed", "n_traj",
             "record_stride", "v_p_over_omega_T_points")

_ENUM_KEYS = {
    "eq4_convention": ("energy", "verbatim"),
    "nbar_convention": ("angular", "linear"),
    "propagator": ("splitstep", "euler"),
    "hamiltonian_kind": ("effective", "rwa"),
    "engine": ("full", "reduced-sme", "reduced-gaussian", "filter-selfloop"),
}

_STRING_KEYS = ("label",)

_REQUIRED = ("L", "C_j", "I_c", "m", "Bl", "Q", "T_bath", "phi_e", "eta",
             "omega_M", "omega_T", "gamma_S", "gamma_T", "g_ST", "engine",
             "seed", "n_traj", "v_x_over_omega_T")

_DEFAULTS = {
    "M_phi": 1.0, "M_r": 1.0,
    "eq4_convention": "energy", "nbar_convention": "angular",
    "propagator": "splitstep", "hamiltonian_kind": "effective",
    "n_beam": 12, "n_tlr": 6, "n_beam_reduced": 30,
    "dt_s": 0.0, "horizon_over_gamma_M": 5.0, "record_stride": 1,
    "label": "",
}


@dataclass
class RunConfig:
    physical: PhysicalParams
    overrides: dict
    eq4_convention: str
    nbar_convention: str
    n_beam: int
    n_tlr: int
    n_beam_reduced: int
    dt_s: float
    horizon_over_gamma_M: float
    seed: int
    n_traj: int
    record_stride: int
    propagator: str
    hamiltonian_kind: str
    engine: str
    vx_ratio: float
    vp_ratios: tuple
    sweep: bool
    label: str
    raw: dict = field(default_factory=dict)

    def derived(self):
        return derive_params(self.physical, overrides=self.overrides,
                             eq4_convention=self.eq4_convention,
                             nbar_convention=self.nbar_convention)


def _parse_lines(text):
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in body.split("=", 1))
        if not key or not raw:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = raw
    return values


def _classify(key):
    """Return (canonical_key, multiplier) resolving unit suffixes."""
    for suf, mult in _SUFFIXES.items():
        if key.endswith(suf):
            base = key[: -len(suf)]
            if base in _FREQUENCY_KEYS:
                return base, mult
            if base in (_PLAIN_FLOAT_KEYS + _INT_KEYS
                        + tuple(_ENUM_KEYS) + _STRING_KEYS):
                raise ConfigError(
                    f"unit suffix on non-frequency quantity: {key!r}")
            raise ConfigError(f"unknown key: {key!r}")
    if key in _FREQUENCY_KEYS:
        return key, 1.0
    if key in _PLAIN_FLOAT_KEYS or key in _INT_KEYS or key in _ENUM_KEYS \
            or key in _STRING_KEYS:
        return key, None
    raise ConfigError(f"unknown key: {key!r}")


def parse_config_text(text):
    raw = _parse_lines(text)
    canon = {}
    for key, sval in raw.items():
        base, mult = _classify(key)
        if base in canon:
            raise ConfigError(
                f"key {base!r} given more than once (unit variants clash)")
        if base in _ENUM_KEYS:
            if sval not in _ENUM_KEYS[base]:
                raise ConfigError(
                    f"{base} must be one of {_ENUM_KEYS[base]}, got {sval!r}")
            canon[base] = sval
        elif base in _STRING_KEYS:
            canon[base] = sval
        elif base in _INT_KEYS:
            try:
                canon[base] = int(sval)
            except ValueError:
                raise ConfigError(f"{key}: expected an integer, got {sval!r}")
        else:
            try:
                v = float(sval)
            except ValueError:
                raise ConfigError(f"{key}: expected a number, got {sval!r}")
            canon[base] = v * (mult if mult else 1.0)

    missing = [k for k in _REQUIRED if k not in canon]
    if missing:
        raise ConfigError("missing required keys: " + ", ".join(missing))
    for k, v in _DEFAULTS.items():
        canon.setdefault(k, v)

    has_single = "v_p_over_omega_T" in canon
    sweep_keys = [k for k in ("v_p_over_omega_T_min", "v_p_over_omega_T_max",
                              "v_p_over_omega_T_points") if k in canon]
    if has_single and sweep_keys:
        raise ConfigError("give either a single v_p_over_omega_T or the "
                          "sweep triple, not both")
    if not has_single and len(sweep_keys) != 3:
        raise ConfigError("gain sweep needs v_p_over_omega_T_min/_max/_points "
                          "(or a single v_p_over_omega_T)")
    if has_single:
        vp = (canon["v_p_over_omega_T"],)
        sweep = False
    else:
        npts = canon["v_p_over_omega_T_points"]
        if npts < 1:
            raise ConfigError("sweep needs at least one point")
        vp = tuple(np.linspace(canon["v_p_over_omega_T_min"],
                               canon["v_p_over_omega_T_max"], npts))
        sweep = True
    if canon["n_traj"] < 1:
        raise ConfigError("n_traj must be >= 1")

    try:
        phys = PhysicalParams(
            L=canon["L"], C_j=canon["C_j"], I_c=canon["I_c"], m=canon["m"],
            eta=canon["eta"], omega_M=canon["omega_M"], Bl=canon["Bl"],
            Q=canon["Q"], T_bath=canon["T_bath"], phi_e=canon["phi_e"],
            gamma_S=canon["gamma_S"], gamma_T=canon["gamma_T"],
            g_ST=canon["g_ST"], omega_T=canon["omega_T"],
            M_phi=canon["M_phi"], M_r=canon["M_r"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    overrides = {k[len("override_"):]: v for k, v in canon.items()
                 if k.startswith("override_")}
    return RunConfig(
        physical=phys, overrides=overrides,
        eq4_convention=canon["eq4_convention"],
        nbar_convention=canon["nbar_convention"],
        n_beam=canon["n_beam"], n_tlr=canon["n_tlr"],
        n_beam_reduced=canon["n_beam_reduced"], dt_s=canon["dt_s"],
        horizon_over_gamma_M=canon["horizon_over_gamma_M"],
        seed=canon["seed"], n_traj=canon["n_traj"],
        record_stride=canon["record_stride"], propagator=canon["propagator"],
        hamiltonian_kind=canon["hamiltonian_kind"], engine=canon["engine"],
        vx_ratio=canon["v_x_over_omega_T"], vp_ratios=vp, sweep=sweep,
        label=canon["label"], raw=dict(raw))


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text)


def load_preset(name):
    try:
        text = (resources.files("beamcool") / "presets" / f"{name}.cfg") \
            .read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"no preset named {name!r}") from None
    return parse_config_text(text)


def config_echo(cfg):
    """Canonical flat text reproducing this configuration exactly."""
    p = cfg.physical
    lines = []

    def put(key, val):
        if isinstance(val, float):
            lines.append(f"{key} = {val!r}")
        else:
            lines.append(f"{key} = {val}")

    for key in ("L", "C_j", "I_c", "m", "eta", "Bl", "Q", "T_bath", "phi_e",
                "M_phi", "M_r"):
        put(key, getattr(p, key))
    for key in ("omega_M", "omega_T", "gamma_S", "gamma_T", "g_ST"):
        put(key, getattr(p, key))
    for name, val in sorted(cfg.overrides.items()):
        put(f"override_{name}", val)
    put("eq4_convention", cfg.eq4_convention)
    put("nbar_convention", cfg.nbar_convention)
    for key in ("n_beam", "n_tlr", "n_beam_reduced"):
        put(key, getattr(cfg, key))
    put("dt_s", cfg.dt_s)
    put("horizon_over_gamma_M", cfg.horizon_over_gamma_M)
    put("seed", cfg.seed)
    put("n_traj", cfg.n_traj)
    put("record_stride", cfg.record_stride)
    put("propagator", cfg.propagator)
    put("hamiltonian_kind", cfg.hamiltonian_kind)
    put("engine", cfg.engine)
    put("v_x_over_omega_T", cfg.vx_ratio)
    if cfg.sweep:
        put("v_p_over_omega_T_min", float(cfg.vp_ratios[0]))
        put("v_p_over_omega_T_max", float(cfg.vp_ratios[-1]))
        put("v_p_over_omega_T_points", len(cfg.vp_ratios))
    else:
        put("v_p_over_omega_T", float(cfg.vp_ratios[0]))
    if cfg.label:
        put("label", cfg.label)
    return "\n".join(lines) + "\n"
