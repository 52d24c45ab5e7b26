"""Command-line entry points: ``simulate`` benchmarks and ``diagnose`` checks."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

from .contexts import DistributionSpec
from .diagnostics import (
    check_bernstein_adapted,
    check_matrix_concentration,
    check_oracle_inequality,
    compatibility_constant,
    estimate_balanced_covariance_constant,
)
from .harness import KNOWN_POLICIES, ExperimentConfig, run_experiment, write_results


def _simulate_parser(sub):
    p = sub.add_parser("simulate", help="run a regret benchmark")
    p.add_argument("--config", type=Path, default=None,
                   help="JSON config file; flags given on the command line override it")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--arms", type=int, default=None, dest="K")
    p.add_argument("--s0", type=int, default=None)
    p.add_argument("--horizon", type=int, default=None, dest="T")
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--dist", choices=["gaussian", "uniform", "elliptical"],
                   default=None)
    p.add_argument("--rho2", type=float, default=None)
    p.add_argument("--link", choices=["linear", "logistic"], default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--policies", nargs="+", choices=KNOWN_POLICIES, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--clip-xmax", type=float, default=None, dest="clip_xmax")
    p.add_argument("--baseline-s0", type=int, default=None, dest="baseline_s0")
    p.add_argument("--lambda0", type=float, default=None)
    return p


def _diagnose_parser(sub):
    p = sub.add_parser("diagnose", help="run an estimation-theory check")
    ds = p.add_subparsers(dest="check", required=True)

    o = ds.add_parser("oracle-ineq", help="l1 error bound violation frequency")
    o.add_argument("--d", type=int, default=10)
    o.add_argument("--s0", type=int, default=2)
    o.add_argument("--delta", type=float, default=0.05)
    o.add_argument("--horizon", type=int, default=500)
    o.add_argument("--trajectories", type=int, default=200)
    o.add_argument("--checkpoints", type=int, nargs="+", default=[250, 500])
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out", type=Path, default=None)

    c = ds.add_parser("concentration", help="adapted Gram matrix concentration")
    c.add_argument("--d", type=int, default=10)
    c.add_argument("--arms", type=int, default=2)
    c.add_argument("--rho2", type=float, default=0.0)
    c.add_argument("--s0", type=int, default=2)
    c.add_argument("--checkpoints", type=int, nargs="+", default=[100, 400])
    c.add_argument("--trajectories", type=int, default=50)
    c.add_argument("--mc-draws", type=int, default=10_000)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", type=Path, default=None)

    b = ds.add_parser("bernstein", help="adapted-sample Bernstein tail")
    b.add_argument("--tau", type=int, required=True)
    b.add_argument("--w", type=float, required=True)
    b.add_argument("--trials", type=int, default=100_000)
    b.add_argument("--d", type=int, default=5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", type=Path, default=None)

    k = ds.add_parser("compat", help="cone compatibility constant of a matrix")
    k.add_argument("--matrix", type=Path, required=True,
                   help="CSV file holding a square symmetric matrix")
    k.add_argument("--support", type=int, nargs="+", required=True)
    k.add_argument("--samples", type=int, default=2000)
    k.add_argument("--seed", type=int, default=0)

    v = ds.add_parser("balanced-cov", help="balanced covariance constant")
    v.add_argument("--d", type=int, default=10)
    v.add_argument("--arms", type=int, default=3)
    v.add_argument("--rho2", type=float, default=0.0)
    v.add_argument("--samples", type=int, default=1_000_000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", type=Path, default=None)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsebandits",
        description="Sparse contextual bandit benchmarks and diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)
    _simulate_parser(sub)
    _diagnose_parser(sub)
    return parser


def _config_from_args(args) -> ExperimentConfig:
    base = {}
    if args.config is not None:
        with open(args.config) as fh:
            base = json.load(fh)
    for key in ("d", "K", "s0", "T", "runs", "dist", "rho2", "link", "sigma",
                "policies", "seed", "out", "jobs", "clip_xmax", "baseline_s0",
                "lambda0"):
        val = getattr(args, key, None)
        if val is not None:
            base[key] = val
    return ExperimentConfig.from_dict(base)


def _emit(report, out: Path | None, rows, header):
    print(report.to_text())
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        print(f"wrote {out}")


def _cmd_simulate(args) -> int:
    config = _config_from_args(args)
    start = time.time()
    traces, summary = run_experiment(config)
    wall = time.time() - start
    files = write_results(traces, config, config.out or "results", wall_time=wall)
    T = config.T
    print(f"finished {config.runs} runs x {len(config.policies)} policies "
          f"in {wall:.1f}s")
    for policy in sorted(summary):
        m = summary[policy]["mean_cum"][T - 1]
        s = summary[policy]["std_cum"][T - 1]
        print(f"  {policy:>14}: cumulative regret at T={T}: {m:.1f} +/- {s:.1f}")
    print("wrote " + ", ".join(str(f) for f in files.values()))
    return 0


def _cmd_diagnose(args) -> int:
    if args.check == "oracle-ineq":
        rep = check_oracle_inequality(
            d=args.d, s0=args.s0, delta=args.delta, T=args.horizon,
            n_traj=args.trajectories, checkpoints=tuple(args.checkpoints),
            seed=args.seed)
        rows = [(c.t, c.n_valid, c.n_excluded, c.violations,
                 f"{c.violation_rate:.6f}", f"{c.bound_mean:.6f}",
                 f"{c.phi2_mean:.6f}", int(c.passed)) for c in rep.checkpoints]
        _emit(rep, args.out, rows, ["t", "n_valid", "n_excluded", "violations",
                                    "violation_rate", "bound_mean", "phi2_mean",
                                    "passed"])
        return 0 if rep.passed else 1
    if args.check == "concentration":
        rep = check_matrix_concentration(
            d=args.d, K=args.arms, rho2=args.rho2, s0=args.s0,
            checkpoints=tuple(args.checkpoints), n_traj=args.trajectories,
            mc_draws=args.mc_draws, seed=args.seed)
        rows = list(zip(rep.checkpoints, (f"{g:.8f}" for g in rep.mean_gap)))
        _emit(rep, args.out, rows, ["t", "mean_sup_norm_gap"])
        return 0
    if args.check == "bernstein":
        rep = check_bernstein_adapted(tau=args.tau, w=args.w, trials=args.trials,
                                      d=args.d, seed=args.seed)
        rows = [(rep.tau, rep.w, rep.d, rep.trials, f"{rep.threshold:.8f}",
                 f"{rep.empirical_tail:.8f}", f"{rep.bound:.8f}",
                 int(rep.passed))]
        _emit(rep, args.out, rows, ["tau", "w", "d", "trials", "threshold",
                                    "empirical_tail", "bound", "passed"])
        return 0 if rep.passed else 1
    if args.check == "compat":
        import numpy as np
        M = np.loadtxt(args.matrix, delimiter=",", ndmin=2)
        phi2 = compatibility_constant(M, args.support, n_samples=args.samples,
                                      seed=args.seed)
        print(f"compatibility constant estimate: {phi2:.6f}")
        return 0
    if args.check == "balanced-cov":
        import numpy as np
        dist = DistributionSpec(kind="gaussian", d=args.d, K=args.arms,
                                rho2=args.rho2)
        rng = np.random.default_rng(args.seed)
        beta = rng.standard_normal(args.d)
        rep = estimate_balanced_covariance_constant(
            dist, beta, n_samples=args.samples, seed=args.seed)
        rows = [(args.arms, args.d, args.samples, f"{rep.c_estimate:.6f}",
                 f"{rep.c_se:.6f}")]
        _emit(rep, args.out, rows, ["K", "d", "n_samples", "c_estimate", "c_se"])
        return 0
    raise AssertionError(f"unhandled check {args.check!r}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "simulate":
        return _cmd_simulate(args)
    return _cmd_diagnose(args)


if __name__ == "__main__":
    sys.exit(main())
