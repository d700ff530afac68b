"""Experiment orchestration: gain sweeps with controlled/uncontrolled
baselines, engine cross-validation, manifests and deterministic CSV output.
"""

import json
import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import __version__
from .config import config_echo
from .estimator import ControlGains, FilterState, run_closed_loop
from .fullsme import SmeConfig, simulate_trajectory
from .kernels import backend_name, rng
from .metrics import effective_temperature, ensemble_reduce
from .operators import HilbertSpace, fock_state, gaussian_state, thermal_state
from .params import validate_regime
from .reduced import (GainRegionError, closed_form_prediction, compute_coeffs,
                      gaussian_moment_flow, moment_matrices,
                      reduced_sme_trajectory)

SWEEP_COLUMNS = (
    "v_p_over_wT", "v_x_over_wT", "VxM_c", "VpM_c", "VxM_uc", "VpM_uc",
    "product_c", "product_uc", "xi", "VxM_pred", "VpM_pred", "nbar_c",
    "nbar_uc", "Teff_c", "Teff_uc",
    # extras beyond the plotting set
    "nbar_c_total", "nbar_uc_total", "V_mean_xM_c", "V_mean_pM_c", "CxpM_c",
    "Teff_c_angular", "Teff_uc_angular", "repairs_c", "repairs_uc", "flags",
)


class SweepDivergence(RuntimeError):
    pass


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    x = float(v)
    if math.isnan(x):
        return "nan"
    return repr(x)


def write_csv(path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row.get(c, "nan")) for c in columns)
                     + "\n")


def _teff_or_nan(nbar, omega_M, convention):
    if nbar is None or not np.isfinite(nbar) or nbar <= 0:
        return float("nan")
    return effective_temperature(nbar, omega_M, convention)


@dataclass
class PointResult:
    V_x: float
    V_p: float
    C_xp: float
    V_mean_x: float
    V_mean_p: float
    nbar_cond: float
    nbar_total: float
    repairs: int = 0
    flags: str = ""


def _flow_point(gains, d, p, tol=1e-10):
    rc = compute_coeffs(gains, d, p)
    res = gaussian_moment_flow(gains, rc, d, p, tol=tol)
    flags = "" if res.converged else "noconv"
    return PointResult(res.V_x, res.V_p, res.C_xp, res.V_mean_x,
                       res.V_mean_p, res.nbar_cond, res.nbar_total,
                       flags=flags)


def _stationary_horizon(gains, d, p, multiple=2.0):
    """Integration horizon from the slowest closed-loop relaxation rate."""
    rc = compute_coeffs(gains, d, p)
    A, D, Ru, Iu, k, Acl = moment_matrices(rc, d, p, gains)
    rates = [abs(np.real(w)) for w in np.linalg.eigvals(Acl)]
    r_mean = max(min(rates), 1e-12)
    gamma_eff = d.gamma_M + p.gamma_T * rc.cooling_rate
    r_slow = min(r_mean, max(gamma_eff, 1e-12))
    return multiple / r_slow


def default_reduced_dt(gains, d, p, factor=0.01):
    rc = compute_coeffs(gains, d, p)
    w_fast = p.omega_M + 2.0 * abs(rc.xi_M)
    rate = (d.gamma_M * (d.nbar_M + 1.0) + p.gamma_T
            * (abs(rc.C1) ** 2 + abs(rc.C2) ** 2) * (1.0 + d.nbar_M)
            + p.eta * p.gamma_T)
    return min(factor / w_fast, 0.02 / max(rate, 1e-12))


def _reduced_ensemble_point(cfg, gains, d, p, seed, dt=None, n_traj=None,
                            horizon=None):
    """Ensemble of reduced-SME trajectories started at the flow's stationary
    Gaussian (means drawn from the classical covariance), evolved over a few
    closed-loop relaxation times; reduced with the full noise-decomposition.
    """
    rc = compute_coeffs(gains, d, p)
    flow = gaussian_moment_flow(gains, rc, d, p)
    n = cfg.n_beam_reduced
    dt = dt or (cfg.dt_s if cfg.dt_s > 0 else default_reduced_dt(gains, d, p))
    horizon = horizon or _stationary_horizon(gains, d, p)
    steps = max(int(round(horizon / dt)), 10)
    n_traj = n_traj or cfg.n_traj
    cov = np.array([[flow.V_x, flow.C_xp], [flow.C_xp, flow.V_p]])
    cov_cl = np.array([[flow.V_mean_x, flow.C_mean],
                       [flow.C_mean, flow.V_mean_p]])
    # deterministic init draws from a dedicated substream
    init_norms = rng.normals(rng.trajectory_seed(seed, 0x5EED1717),
                             2 * n_traj).reshape(n_traj, 2)
    L = np.linalg.cholesky(cov_cl + 1e-15 * np.eye(2))
    moments = np.zeros((n_traj, 4))
    innovations = []
    repairs = 0
    for k in range(n_traj):
        mean = L @ init_norms[k]
        rho0 = gaussian_state(n, mean, cov)
        rho, rec, inn, rep = reduced_sme_trajectory(
            rho0, rc, d, p, gains, dt, steps, seed, traj_index=k,
            record_stride=max(steps - 1, 1), propagator=cfg.propagator)
        moments[k] = rec[-1, 3:7]
        innovations.append(inn)
        repairs += rep
    stats = ensemble_reduce(moments, p.omega_M, warn_below=0)
    return stats, repairs, innovations, flow, dt, steps


def run_point(cfg, d, p, gains, seed):
    """One (engine, gains) evaluation, normalized to a PointResult."""
    if cfg.engine == "reduced-gaussian":
        return _flow_point(gains, d, p)
    if cfg.engine == "reduced-sme":
        stats, repairs, _, _, _, _ = _reduced_ensemble_point(cfg, gains, d, p,
                                                             seed)
        cond = 0.5 * (stats.V_xM + stats.V_pM) - 0.5
        return PointResult(stats.V_xM, stats.V_pM, float("nan"),
                           stats.V_mean_xM, stats.V_mean_pM, cond, stats.nbar,
                           repairs=repairs)
    if cfg.engine == "full":
        return _full_ensemble_point(cfg, gains, d, p, seed)
    if cfg.engine == "filter-selfloop":
        return _selfloop_point(cfg, gains, d, p, seed)
    raise ValueError(f"unknown engine {cfg.engine!r}")


def _full_ensemble_point(cfg, gains, d, p, seed):
    space = HilbertSpace(n_beam=cfg.n_beam, n_tlr=cfg.n_tlr)
    rho0 = np.kron(np.kron(thermal_state(cfg.n_beam, min(d.nbar_M, 0.5)),
                           fock_state(2, 1)),
                   fock_state(cfg.n_tlr, 0)).astype(complex)
    dt = cfg.dt_s if cfg.dt_s > 0 else 2.0 * math.pi / (200.0 * d.omega_S)
    horizon = cfg.horizon_over_gamma_M / d.gamma_M
    steps = max(int(round(horizon / dt)), 10)
    sme = SmeConfig(dt=dt, steps=steps, seed=seed,
                    hamiltonian_kind=cfg.hamiltonian_kind,
                    propagator=cfg.propagator,
                    record_stride=max(steps - 1, 1))
    controller = "estimator" if (gains.v_x or gains.v_p) else "null"
    moments = np.zeros((cfg.n_traj, 4))
    repairs = 0
    for k in range(cfg.n_traj):
        rec, rho, f, inn = simulate_trajectory(
            rho0, space, sme, d, p, controller=controller, gains=gains,
            traj_index=k)
        moments[k] = rec.data[-1, 3:7]
        repairs += rec.repairs
    stats = ensemble_reduce(moments, p.omega_M, warn_below=0)
    cond = 0.5 * (stats.V_xM + stats.V_pM) - 0.5
    return PointResult(stats.V_xM, stats.V_pM, float("nan"),
                       stats.V_mean_xM, stats.V_mean_pM, cond, stats.nbar,
                       repairs=repairs)


def _selfloop_point(cfg, gains, d, p, seed):
    dt = cfg.dt_s if cfg.dt_s > 0 else 2.0 * math.pi / (200.0 * d.omega_S)
    horizon = cfg.horizon_over_gamma_M / d.gamma_M
    steps = max(int(round(horizon / dt)), 10)
    finals = np.zeros((cfg.n_traj, 2))
    for k in range(cfg.n_traj):
        out = run_closed_loop(FilterState(), d, p, gains, dt, steps,
                              mode="self", seed=seed, traj_index=k,
                              record_stride=max(steps - 1, 1))
        b = out.final.b_mean
        finals[k] = (math.sqrt(2.0) * b.real, math.sqrt(2.0) * b.imag)
    vmx = finals[:, 0].var(ddof=1) if cfg.n_traj > 1 else 0.0
    vmp = finals[:, 1].var(ddof=1) if cfg.n_traj > 1 else 0.0
    nbar_cl = 0.5 * (vmx + vmp) + 0.5 * (finals[:, 0].mean() ** 2
                                         + finals[:, 1].mean() ** 2)
    return PointResult(float("nan"), float("nan"), float("nan"), vmx, vmp,
                       float("nan"), nbar_cl)


def sweep_rows(cfg, d, p, progress=None):
    """Controlled and uncontrolled runs for every sweep point."""
    rows = []
    zero = ControlGains(0.0, 0.0)
    for idx, r in enumerate(cfg.vp_ratios):
        seed_point = cfg.seed + 1000 * idx
        gains = ControlGains.from_ratio(p, cfg.vx_ratio, float(r))
        flags = []
        try:
            ctrl = run_point(cfg, d, p, gains, seed_point)
        except (FloatingPointError, GainRegionError) as exc:
            ctrl = PointResult(*([float("nan")] * 7), flags="diverged")
            flags.append(f"diverged({exc})")
        unc = run_point(cfg, d, p, zero, seed_point)
        try:
            rc = compute_coeffs(gains, d, p)
            pred = closed_form_prediction(gains, rc, d, p)
            xi, vxp, vpp = pred.xi, pred.V_x_pred, pred.V_p_pred
        except GainRegionError:
            xi, vxp, vpp = float("nan"), float("nan"), float("nan")
            flags.append("closed-form-invalid")
        if ctrl.flags:
            flags.append(ctrl.flags)
        if unc.flags:
            flags.append("uc:" + unc.flags)
        row = {
            "v_p_over_wT": float(r), "v_x_over_wT": cfg.vx_ratio,
            "VxM_c": ctrl.V_x, "VpM_c": ctrl.V_p,
            "VxM_uc": unc.V_x, "VpM_uc": unc.V_p,
            "product_c": ctrl.V_x * ctrl.V_p,
            "product_uc": unc.V_x * unc.V_p,
            "xi": xi, "VxM_pred": vxp, "VpM_pred": vpp,
            "nbar_c": ctrl.nbar_cond, "nbar_uc": unc.nbar_cond,
            "Teff_c": _teff_or_nan(ctrl.nbar_cond, p.omega_M, "linear"),
            "Teff_uc": _teff_or_nan(unc.nbar_cond, p.omega_M, "linear"),
            "nbar_c_total": ctrl.nbar_total, "nbar_uc_total": unc.nbar_total,
            "V_mean_xM_c": ctrl.V_mean_x, "V_mean_pM_c": ctrl.V_mean_p,
            "CxpM_c": ctrl.C_xp,
            "Teff_c_angular": _teff_or_nan(ctrl.nbar_cond, p.omega_M,
                                           "angular"),
            "Teff_uc_angular": _teff_or_nan(unc.nbar_cond, p.omega_M,
                                            "angular"),
            "repairs_c": ctrl.repairs, "repairs_uc": unc.repairs,
            "flags": ";".join(flags),
        }
        rows.append(row)
        if progress:
            progress(idx, len(cfg.vp_ratios), row)
    return rows


def build_manifest(cfg, d, p, stages, notes=()):
    checks = validate_regime(p, d)
    derived = {k: v for k, v in asdict(d).items()
               if k not in ("formula_values", "overridden")}
    return {
        "tool": "beamcool",
        "version": __version__,
        "backend": backend_name(),
        "config_echo": config_echo(cfg),
        "derived": derived,
        "derived_formula": dict(d.formula_values),
        "overridden": list(d.overridden),
        "regime_checks": [
            {"name": c.name, "ok": c.ok, "ratio": c.ratio,
             "threshold": c.threshold, "sense": c.sense} for c in checks],
        "regime_ok": all(c.ok for c in checks),
        "conventions": {
            "eq4": cfg.eq4_convention,
            "nbar_M": cfg.nbar_convention,
            "units": "hbar = 1 quadratures; variances in units of hbar",
            "nbar_accounting": ("nbar_c/nbar_uc columns carry the conditional"
                                " (quantum-variance) part; *_total columns"
                                " add classical mean-variance and mean-square"
                                " terms"),
            "Teff_columns": "Teff_c/Teff_uc use the linear-frequency reading;"
                            " *_angular columns carry the standard one",
        },
        "stages_wall_clock_s": dict(stages),
        "notes": list(notes),
    }


def run_sweep(cfg, out_dir, strict=False):
    """Execute the sweep; returns (csv_path, manifest_path, rows)."""
    import os
    os.makedirs(out_dir, exist_ok=True)
    d = cfg.derived()
    p = cfg.physical
    checks = validate_regime(p, d)
    notes = []
    if not all(c.ok for c in checks):
        bad = ", ".join(c.name for c in checks if not c.ok)
        if strict:
            raise SweepDivergence(f"regime checks failed in strict mode: "
                                  f"{bad}")
        notes.append(f"regime warnings: {bad}")
    t0 = time.time()
    rows = sweep_rows(cfg, d, p)
    stages = {"sweep": time.time() - t0}
    if strict and any("diverged" in r["flags"] for r in rows):
        raise SweepDivergence("engine divergence during sweep (strict mode)")
    label = cfg.label or "sweep"
    csv_path = f"{out_dir}/{label}.csv"
    man_path = f"{out_dir}/{label}.manifest.json"
    write_csv(csv_path, SWEEP_COLUMNS, rows)
    with open(man_path, "w", encoding="utf-8") as fh:
        json.dump(build_manifest(cfg, d, p, stages, notes), fh, indent=2,
                  sort_keys=True)
        fh.write("\n")
    return csv_path, man_path, rows


# ---------------------------------------------------------------------------
# engine cross-validation

CROSSCHECK_GAINS = (("zero-gain", 0.0, 0.0),
                    ("position-squeeze-window", 0.5, 0.75),
                    ("momentum-squeeze-window", 0.5, 0.4))


def crosscheck_point(cfg, d, p, vx_ratio, vp_ratio, seed):
    """Flow vs reduced-SME ensemble at one gain pair.

    The ensemble runs at dt and dt/2; first-order Richardson extrapolation
    removes the leading Euler-Maruyama bias before the 3-sigma comparison.
    """
    gains = ControlGains.from_ratio(p, vx_ratio, vp_ratio)
    stats1, rep1, inns, flow, dt, steps = _reduced_ensemble_point(
        cfg, gains, d, p, seed)
    n2 = max(32, cfg.n_traj // 8)
    stats2, rep2, _, _, _, _ = _reduced_ensemble_point(
        cfg, gains, d, p, seed + 31, dt=dt / 2.0, n_traj=n2)
    moments = []

    def entry(name, flow_val, m1, se1, m2, se2, extrapolate):
        if extrapolate:
            val = 2.0 * m2 - m1
            se = math.sqrt(4.0 * se2 ** 2 + se1 ** 2)
        else:
            val, se = m1, se1
        tol = 3.0 * max(se, 1e-30)
        moments.append({
            "moment": name, "flow": flow_val, "ensemble": val, "se": se,
            "diff": val - flow_val, "tol_3se": tol,
            "ok": bool(abs(val - flow_val) <= tol)})

    entry("V_xM", flow.V_x, stats1.V_xM, stats1.se["V_xM"],
          stats2.V_xM, stats2.se["V_xM"], True)
    entry("V_pM", flow.V_p, stats1.V_pM, stats1.se["V_pM"],
          stats2.V_pM, stats2.se["V_pM"], True)
    entry("V_mean_xM", flow.V_mean_x, stats1.V_mean_xM,
          stats1.se["V_mean_xM"], stats2.V_mean_xM, stats2.se["V_mean_xM"],
          False)
    entry("V_mean_pM", flow.V_mean_p, stats1.V_mean_pM,
          stats1.se["V_mean_pM"], stats2.V_mean_pM, stats2.se["V_mean_pM"],
          False)
    entry("nbar", flow.nbar_total, stats1.nbar, stats1.se["nbar"],
          stats2.nbar, stats2.se["nbar"], False)
    return {
        "gains": {"v_x_over_wT": vx_ratio, "v_p_over_wT": vp_ratio},
        "dt": dt, "dt_fine": dt / 2.0, "steps": steps,
        "n_traj": (cfg.n_traj, n2), "repairs": rep1 + rep2,
        "moments": moments,
        "ok": all(m["ok"] for m in moments),
        "innovations": inns,
    }


def run_crosscheck(cfg, out_dir, gain_pairs=CROSSCHECK_GAINS):
    import os
    os.makedirs(out_dir, exist_ok=True)
    d = cfg.derived()
    p = cfg.physical
    t0 = time.time()
    results = []
    for label, vx, vp in gain_pairs:
        res = crosscheck_point(cfg, d, p, vx, vp, cfg.seed)
        res["label"] = label
        res.pop("innovations")
        results.append(res)
    report = {
        "ok": all(r["ok"] for r in results),
        "points": results,
        "wall_clock_s": time.time() - t0,
        "engines": {"fast": "reduced-gaussian",
                    "oracle": "reduced-sme (truncated Fock, dt and dt/2)"},
    }
    path = f"{out_dir}/{cfg.label or 'crosscheck'}.report.json"
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({**report,
                   "manifest": build_manifest(cfg, d, p,
                                              {"crosscheck":
                                               report["wall_clock_s"]})},
                  fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    return path, report


def summary_text(rows):
    """Human-oriented digest of a sweep."""
    ok_rows = [r for r in rows if "diverged" not in r["flags"]]
    if not ok_rows:
        return "all sweep points diverged\n"
    best = min(ok_rows, key=lambda r: r["nbar_c"]
               if np.isfinite(r["nbar_c"]) else np.inf)
    lines = [
        f"points: {len(rows)} (valid {len(ok_rows)})",
        f"min nbar_c = {best['nbar_c']:.4f} at v_p/w_T = "
        f"{best['v_p_over_wT']:.3f} (Teff {best['Teff_c']*1e3:.2f} mK linear"
        f", {best['Teff_c_angular']*1e3:.2f} mK angular)",
        f"min VxM_c = {min(r['VxM_c'] for r in ok_rows):.4f}, "
        f"min VpM_c = {min(r['VpM_c'] for r in ok_rows):.4f} (SQL 0.5)",
    ]
    return "\n".join(lines) + "\n"
