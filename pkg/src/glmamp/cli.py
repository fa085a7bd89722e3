"""Command-line front end: gen | solve | verify | sweep.

Every command is deterministic given its flags and seed.  Exit codes:
0 success, 1 failed check or solver divergence, 2 usage / I-O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from itertools import product
from pathlib import Path

import numpy as np

from .channels import Mode, PoissonChannel
from .engine import ProblemInstance, SolverConfig, nmse, run_gamp, run_modular
from .gaussian import DEFAULT_VARIANCE_FLOOR
from .slm import LinearModel, load_matrix, save_matrix_binary
from .specs import SpecError, parse_channel, parse_prior
from .verify import (check_derivatives, check_ep_bridge, check_equivalence,
                     check_laplace_identity)

POISSON_Z_CLAMP = 0.05

ALL_CHANNELS = ("awgn(var=1.0)", "probit(scale=1.0)", "poisson()", "logistic(scale=1.0)")


class UsageError(Exception):
    pass


def load_config_file(path) -> dict:
    """Key = value lines; '#' comments; values stay strings."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _mode(name: str) -> Mode:
    return {"mmse": Mode.SUM_PRODUCT, "map": Mode.MAX_SUM}[name]


def _make_matrix(m, n, dist, rng):
    if dist == "gaussian":
        return rng.standard_normal((m, n)) / np.sqrt(n)
    if dist == "abs_gaussian":
        return np.abs(rng.standard_normal((m, n))) / np.sqrt(n)
    raise UsageError(f"unknown matrix distribution {dist!r}")


def generate_problem(n, m, prior, channel, seed, matrix_dist=None):
    rng = np.random.default_rng(seed)
    if matrix_dist is None:
        matrix_dist = "abs_gaussian" if isinstance(channel, PoissonChannel) else "gaussian"
    A = _make_matrix(m, n, matrix_dist, rng)
    x = prior.sample(n, rng)
    z = A @ x
    if isinstance(channel, PoissonChannel):
        z = np.maximum(z, POISSON_Z_CLAMP)
    y = channel.sample(z, rng)
    return ProblemInstance(LinearModel(A), np.asarray(y, dtype=float), channel,
                           prior, x_true=x)


def cmd_gen(args) -> int:
    try:
        prior = parse_prior(args.prior)
        channel = parse_channel(args.channel)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    prob = generate_problem(args.n, args.m, prior, channel, args.seed,
                            matrix_dist=args.matrix_dist)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_matrix_binary(out / "A.bin", prob.model.A)
    np.savetxt(out / "x_true.csv", prob.x_true, delimiter=",")
    np.savetxt(out / "y.csv", prob.y, delimiter=",")
    meta = {"n": args.n, "m": args.m, "prior": prior.spec_string(),
            "channel": channel.spec_string(), "seed": args.seed,
            "matrix_dist": args.matrix_dist or
            ("abs_gaussian" if isinstance(channel, PoissonChannel) else "gaussian")}
    (out / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    print(f"wrote problem to {out}")
    return 0


def load_problem(path) -> ProblemInstance:
    path = Path(path)
    try:
        meta = json.loads((path / "meta.json").read_text())
        A = load_matrix(path / "A.bin")
        y = np.atleast_1d(np.loadtxt(path / "y.csv", delimiter=","))
        x_true = np.atleast_1d(np.loadtxt(path / "x_true.csv", delimiter=","))
    except OSError as exc:
        raise UsageError(f"cannot load problem from {path}: {exc}") from None
    return ProblemInstance(LinearModel(A), y, parse_channel(meta["channel"]),
                           parse_prior(meta["prior"]), x_true=x_true)


def _solver_config(args) -> SolverConfig:
    return SolverConfig(max_iter=args.max_iter, tol=args.tol,
                        damping=args.damping,
                        variance_floor=args.variance_floor, seed=args.seed,
                        slm_backend=args.slm_backend)


def cmd_solve(args) -> int:
    try:
        if args.problem:
            problem = load_problem(args.problem)
        else:
            prior = parse_prior(args.prior)
            channel = parse_channel(args.channel)
            problem = generate_problem(args.n, args.m, prior, channel, args.seed)
    except (UsageError, SpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    mode = _mode(args.mode)
    config = _solver_config(args)
    runner = run_gamp if args.engine == "gamp" else run_modular
    t0 = time.perf_counter()
    solution, trace = runner(problem, mode, config)
    elapsed = time.perf_counter() - t0
    if args.trace:
        trace.to_jsonl(args.trace)
    summary = {"engine": args.engine, "mode": args.mode,
               "iterations": len(trace), "converged": trace.converged,
               "diverged": trace.diverged, "floor_events": trace.floor_events,
               "wall_time_s": round(elapsed, 6),
               "nmse": nmse(solution.point, problem.x_true)
               if problem.x_true is not None else None}
    text = json.dumps(summary, sort_keys=True, indent=2)
    if args.summary:
        Path(args.summary).write_text(text + "\n")
    print(text)
    return 1 if trace.diverged else 0


def _verify_reports(args):
    channels = [parse_channel(s) for s in
                ([args.channel] if args.channel else ALL_CHANNELS)]
    which = args.check
    reports = []
    for ch in channels:
        if which in ("all", "laplace"):
            reports.append(check_laplace_identity(ch, args.samples, args.seed))
        if which in ("all", "derivatives"):
            reports.append(check_derivatives(ch, args.samples, args.seed))
        if which in ("all", "bridge"):
            for mode in (Mode.SUM_PRODUCT, Mode.MAX_SUM):
                reports.append(check_ep_bridge(ch, mode, args.samples, args.seed))
    if which in ("all", "equivalence"):
        for spec, prior_spec, mode_name in (
                ("probit(scale=1.0)", "bg(rho=0.1,mean=0,var=1)", "mmse"),
                ("probit(scale=1.0)", "laplace(lambda=1)", "map"),
                ("poisson()", "gaussian(mean=2,var=0.25)", "mmse"),
                ("poisson()", "gaussian(mean=2,var=0.25)", "map")):
            if args.channel and parse_channel(spec).name != parse_channel(args.channel).name:
                continue
            prob = generate_problem(64, 128, parse_prior(prior_spec),
                                    parse_channel(spec), args.seed)
            cfg = SolverConfig(max_iter=300, tol=1e-10, damping=0.8,
                               seed=args.seed, slm_backend="amp")
            reports.append(check_equivalence(prob, _mode(mode_name), cfg))
    return reports


def cmd_verify(args) -> int:
    try:
        reports = _verify_reports(args)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    lines = [r.to_json() for r in reports]
    if args.report:
        Path(args.report).write_text("\n".join(lines) + "\n")
    ok = True
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        ok = ok and r.passed
        print(f"{status} {r.check}: residual {r.max_rel_residual:.3e} "
              f"(threshold {r.threshold:.0e}, skipped {r.skipped_floored})")
    return 0 if ok else 1


def _parse_axis(text):
    values = [float(v) for v in text.split(",") if v.strip()]
    if not values:
        raise UsageError("empty sweep axis")
    return values


def _sweep_cell(cell):
    snr_db, rho, ratio, rep, base_seed = cell
    n = 64
    m = max(1, int(round(ratio * n)))
    seed = base_seed + 1000 * rep + hash((snr_db, rho, ratio)) % 1000
    rng = np.random.default_rng(seed)
    prior = parse_prior(f"bg(rho={rho},mean=0,var=1)")
    A = rng.standard_normal((m, n)) / np.sqrt(n)
    x = prior.sample(n, rng)
    z = A @ x
    signal_power = max(float(np.mean(z ** 2)), 1e-12)
    noise_var = signal_power / 10.0 ** (snr_db / 10.0)
    channel = parse_channel(f"awgn(var={noise_var})")
    y = channel.sample(z, rng)
    problem = ProblemInstance(LinearModel(A), np.asarray(y, dtype=float),
                              channel, prior, x_true=x)
    rows = []
    for engine, runner in (("gamp", run_gamp), ("modular", run_modular)):
        cfg = SolverConfig(max_iter=200, tol=1e-10, seed=seed,
                           slm_backend="amp" if engine == "modular" else "exact")
        try:
            sol, trace = runner(problem, Mode.SUM_PRODUCT, cfg)
            rows.append({"snr_db": snr_db, "rho": rho, "m_over_n": ratio,
                         "rep": rep, "engine": engine, "mode": "mmse",
                         "nmse": nmse(sol.point, x), "iterations": len(trace),
                         "floor_events": trace.floor_events,
                         "status": "diverged" if trace.diverged else "ok"})
        except Exception as exc:  # per-cell failure: record, keep sweeping
            rows.append({"snr_db": snr_db, "rho": rho, "m_over_n": ratio,
                         "rep": rep, "engine": engine, "mode": "mmse",
                         "nmse": float("nan"), "iterations": 0,
                         "floor_events": 0, "status": f"error:{exc}"})
    return rows


def cmd_sweep(args) -> int:
    try:
        snrs = _parse_axis(args.snr_db)
        rhos = _parse_axis(args.rho)
        ratios = _parse_axis(args.m_over_n)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    cells = [(s, r, q, rep, args.seed)
             for s, r, q, rep in product(snrs, rhos, ratios, range(args.reps))]
    threads = int(os.environ.get("GLMAMP_THREADS", "1") or 1)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(c) for c in cells]
    rows = [row for cell_rows in results for row in cell_rows]
    rows.sort(key=lambda r: (r["snr_db"], r["rho"], r["m_over_n"],
                             r["rep"], r["engine"]))
    fields = ["snr_db", "rho", "m_over_n", "rep", "engine", "mode",
              "nmse", "iterations", "floor_events", "status"]
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _add_solver_flags(p):
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--damping", type=float, default=None)
    p.add_argument("--variance-floor", type=float, default=DEFAULT_VARIANCE_FLOOR)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--slm-backend", choices=("exact", "amp"), default="exact",
                   help="module-A backend for the modular engine")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glmamp",
                                     description="GLM inference via GAMP and "
                                     "the modular SLM + scalar-module solver")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a problem instance on disk")
    g.add_argument("--out", required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--prior", required=True)
    g.add_argument("--channel", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--matrix-dist", choices=("gaussian", "abs_gaussian"),
                   default=None)
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="solve a problem with either engine")
    s.add_argument("--config", help="key = value config file; flags override it")
    s.add_argument("--problem", help="directory written by gen")
    s.add_argument("--n", type=int, default=64)
    s.add_argument("--m", type=int, default=128)
    s.add_argument("--prior", default="gaussian(mean=0,var=1)")
    s.add_argument("--channel", default="awgn(var=1.0)")
    s.add_argument("--engine", choices=("gamp", "modular"), default="gamp")
    s.add_argument("--mode", choices=("mmse", "map"), default="mmse")
    s.add_argument("--trace", help="JSON-lines trace output path")
    s.add_argument("--summary", help="JSON summary output path")
    _add_solver_flags(s)
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="run the verification harness")
    v.add_argument("--check", choices=("all", "laplace", "bridge",
                                       "derivatives", "equivalence"),
                   default="all")
    v.add_argument("--channel", help="restrict to one channel spec")
    v.add_argument("--samples", type=int, default=10_000)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--report", help="JSON report output path")
    v.set_defaults(func=cmd_verify)

    w = sub.add_parser("sweep", help="SNR/sparsity/ratio sweep to CSV")
    w.add_argument("--snr-db", default="0,10,20,30,40",
                   help="comma-separated SNR axis in dB")
    w.add_argument("--rho", default="0.1", help="comma-separated sparsity axis")
    w.add_argument("--m-over-n", default="2.0",
                   help="comma-separated measurement-ratio axis")
    w.add_argument("--reps", type=int, default=5)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--out", required=True)
    w.set_defaults(func=cmd_sweep)
    parser._subcommand_parsers = {"gen": g, "solve": s, "verify": v, "sweep": w}
    return parser


_CONFIG_TYPES = {"n": int, "m": int, "max_iter": int, "seed": int,
                 "tol": float, "damping": float, "variance_floor": float}


def _apply_config_defaults(parser, argv):
    """Seed parser defaults from --config so explicit flags still win."""
    if argv is None:
        argv = sys.argv[1:]
    argv = list(argv)
    if "--config" not in argv:
        return argv
    path = argv[argv.index("--config") + 1]
    values = load_config_file(path)
    defaults = {}
    for key, raw in values.items():
        key = key.replace("-", "_")
        defaults[key] = _CONFIG_TYPES.get(key, str)(raw)
    for sub in parser._subcommand_parsers.values():
        known = {a.dest for a in sub._actions}
        sub.set_defaults(**{k: v for k, v in defaults.items() if k in known})
    return argv


def main(argv=None) -> int:
    parser = build_parser()
    try:
        argv = _apply_config_defaults(parser, argv)
    except (UsageError, IndexError, ValueError) as exc:
        print(f"error: bad config file: {exc}", file=sys.stderr)
        return 2
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
