"""Command-line interface.

Subcommands: derive (parameter table + regime report), sweep (gain sweep to
CSV + manifest), crosscheck (engine cross-validation report), simulate
(single trajectory with full record). Exit codes: 0 success, 2 configuration
error, 3 divergence under --strict, 4 crosscheck failure.
"""

import argparse
import dataclasses
import json
import sys

import numpy as np

from .config import ConfigError, load_config, load_preset
from .estimator import ControlGains, FilterState, run_closed_loop
from .fullsme import RECORD_COLUMNS, SmeConfig, simulate_trajectory
from .kernels import backend_name
from .operators import HilbertSpace, fock_state, thermal_state
from .params import RegimeError, regime_report, validate_regime
from .reduced import compute_coeffs, reduced_sme_trajectory
from .runner import (SweepDivergence, run_crosscheck, run_sweep, summary_text,
                     write_csv)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_CROSSCHECK = 4


def _add_common(sub):
    src = sub.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="path to a flat key=value config file")
    src.add_argument("--preset", help="name of a shipped preset")
    sub.add_argument("--seed", type=int, help="override the config seed")
    sub.add_argument("--ntraj", type=int, help="override n_traj")
    sub.add_argument("--engine", help="override the engine selector")
    sub.add_argument("--strict", action="store_true",
                     help="abort on regime failures or divergence")
    sub.add_argument("--out", default="out", help="output directory")


def _load(args):
    cfg = load_config(args.config) if args.config else load_preset(args.preset)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.ntraj is not None:
        changes["n_traj"] = args.ntraj
    if args.engine is not None:
        valid = ("full", "reduced-sme", "reduced-gaussian", "filter-selfloop")
        if args.engine not in valid:
            raise ConfigError(f"engine must be one of {valid}")
        changes["engine"] = args.engine
    if changes:
        cfg = dataclasses.replace(cfg, **changes)
    return cfg


def cmd_derive(args):
    cfg = _load(args)
    d = cfg.derived()
    p = cfg.physical
    print(f"# beamcool derive (backend: {backend_name()})")
    print(f"{'quantity':<12} {'value':>16}  {'formula value':>16}  origin")
    rows = [
        ("beta_L", d.beta_L), ("U_0", d.U_0), ("epsilon", d.epsilon),
        ("Delta", d.Delta), ("omega_S", d.omega_S), ("g_MS", d.g_MS),
        ("g_MT", d.g_MT), ("gamma_M", d.gamma_M), ("nbar_M", d.nbar_M),
        ("Delta_MS", d.Delta_MS), ("Delta_ST", d.Delta_ST),
    ]
    for name, val in rows:
        formula = d.formula_values.get(name, val)
        origin = "override" if name in d.overridden else "formula"
        print(f"{name:<12} {val:>16.8g}  {formula:>16.8g}  {origin}")
    print()
    print(regime_report(validate_regime(p, d)))
    return EXIT_OK


def cmd_sweep(args):
    cfg = _load(args)
    try:
        csv_path, man_path, rows = run_sweep(cfg, args.out,
                                             strict=args.strict)
    except SweepDivergence as exc:
        print(f"sweep aborted: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    print(f"wrote {csv_path}\nwrote {man_path}")
    print(summary_text(rows), end="")
    return EXIT_OK


def cmd_crosscheck(args):
    cfg = _load(args)
    path, report = run_crosscheck(cfg, args.out)
    print(f"wrote {path}")
    for point in report["points"]:
        status = "pass" if point["ok"] else "FAIL"
        print(f"  {point['label']:<26} [{status}]")
        for m in point["moments"]:
            print(f"    {m['moment']:<10} flow {m['flow']:+.5f}  "
                  f"ensemble {m['ensemble']:+.5f} ± {m['se']:.5f}  "
                  f"{'ok' if m['ok'] else 'OUT OF TOLERANCE'}")
    if not report["ok"]:
        return EXIT_CROSSCHECK
    return EXIT_OK


def cmd_simulate(args):
    import os
    cfg = _load(args)
    os.makedirs(args.out, exist_ok=True)
    d = cfg.derived()
    p = cfg.physical
    gains = ControlGains.from_ratio(p, cfg.vx_ratio, cfg.vp_ratios[0])
    label = cfg.label or "simulate"
    out_csv = f"{args.out}/{label}.trajectory.csv"

    if cfg.engine == "filter-selfloop":
        dt = cfg.dt_s if cfg.dt_s > 0 else 2*np.pi / (200.0 * d.omega_S)
        steps = max(int(cfg.horizon_over_gamma_M / d.gamma_M / dt), 10)
        res = run_closed_loop(FilterState(), d, p, gains, dt, steps,
                              mode="self", seed=cfg.seed,
                              record_stride=cfg.record_stride)
        cols = res.COLUMNS
        rows = [dict(zip(cols, r)) for r in res.record]
        write_csv(out_csv, cols, rows)
    elif cfg.engine == "reduced-sme":
        from .runner import default_reduced_dt
        rc = compute_coeffs(gains, d, p)
        dt = cfg.dt_s if cfg.dt_s > 0 else default_reduced_dt(gains, d, p)
        steps = max(int(cfg.horizon_over_gamma_M / d.gamma_M / dt), 10)
        rho0 = thermal_state(cfg.n_beam_reduced, d.nbar_M)
        rho, rec, inn, repairs = reduced_sme_trajectory(
            rho0, rc, d, p, gains, dt, steps, cfg.seed,
            record_stride=cfg.record_stride, propagator=cfg.propagator)
        rows = []
        for r in rec:
            rows.append({"time_s": r[0], "dY": r[1], "u": r[2],
                         "exp_xM": r[3], "exp_pM": r[4], "V_xM": r[5],
                         "V_pM": r[6], "exp_xT": float("nan"),
                         "exp_pT": float("nan"), "exp_sz": float("nan"),
                         "repairs": repairs})
        write_csv(out_csv, RECORD_COLUMNS, rows)
    elif cfg.engine == "full":
        space = HilbertSpace(n_beam=cfg.n_beam, n_tlr=cfg.n_tlr)
        dt = cfg.dt_s if cfg.dt_s > 0 else 2*np.pi / (200.0 * d.omega_S)
        steps = max(int(cfg.horizon_over_gamma_M / d.gamma_M / dt), 10)
        sme = SmeConfig(dt=dt, steps=steps, seed=cfg.seed,
                        hamiltonian_kind=cfg.hamiltonian_kind,
                        propagator=cfg.propagator,
                        record_stride=cfg.record_stride)
        rho0 = np.kron(np.kron(thermal_state(cfg.n_beam,
                                             min(d.nbar_M, 0.5)),
                               fock_state(2, 1)),
                       fock_state(cfg.n_tlr, 0)).astype(complex)
        controller = "estimator" if (gains.v_x or gains.v_p) else "null"
        rec, rho, f, inn = simulate_trajectory(rho0, space, sme, d, p,
                                               controller=controller,
                                               gains=gains)
        rows = [dict(zip(RECORD_COLUMNS, r)) for r in rec.data]
        write_csv(out_csv, RECORD_COLUMNS, rows)
    else:
        print("simulate supports engines full, reduced-sme, filter-selfloop",
              file=sys.stderr)
        return EXIT_CONFIG
    print(f"wrote {out_csv}")
    return EXIT_OK


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="beamcool",
        description="feedback cooling/squeezing engines for a monitored "
                    "nanomechanical beam")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in (("derive", cmd_derive), ("sweep", cmd_sweep),
                     ("crosscheck", cmd_crosscheck),
                     ("simulate", cmd_simulate)):
        s = sub.add_parser(name)
        _add_common(s)
        s.set_defaults(fn=fn)
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, RegimeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
