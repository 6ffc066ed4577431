"""Command-line front end: ``lqccd {generate,solve,sweep,check}``.

Every option can also come from a plain ``key=value`` file passed with
``--config``; explicit flags win over the file. Keys are the long option names
without dashes (``snr_db``, ``mu_frac``, ``lambda``, ...).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    certify_local_min,
    check_stationarity,
    detect_support_stabilization,
    relative_error_diagnostic,
)
from .io import (
    ProblemFileError,
    load_problem,
    load_report,
    load_truth,
    read_key_values,
    read_vector,
    save_problem,
    save_report,
)
from .problem import column_stats, generate_instance
from .prox import make_prox_params
from .solvers import SolverOptions, ccd_solve, ijt_solve, lq_cd_reference
from .sweep import CsvSink, SweepConfig, run_sweep, summarize
from .validation import DimensionMismatchError, InadmissibleStepError

EXIT_OK, EXIT_NOT_STATIONARY, EXIT_USAGE = 0, 1, 2


def _floats(text):
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _bool(text):
    if isinstance(text, bool):
        return text
    return str(text).strip().lower() in ("1", "true", "yes", "on")


def _add_instance_args(p):
    p.add_argument("--m", type=int, default=200, help="rows (measurements)")
    p.add_argument("--n", type=int, default=400, help="columns (unknowns)")
    p.add_argument("--k", type=int, default=20, help="planted sparsity")
    p.add_argument("--snr-db", type=float, default=30.0)
    p.add_argument(
        "--normalize",
        action=argparse.BooleanOptionalAction,
        default=True,
        help="scale columns of A to unit norm",
    )
    p.add_argument("--seed", type=int, default=0)


def _add_model_args(p):
    p.add_argument("--lambda", dest="lam", type=float, default=0.009, help="penalty weight")
    p.add_argument("--q", type=float, default=0.5, help="penalty exponent in [0.01, 0.99]")
    p.add_argument(
        "--mu-frac",
        type=float,
        default=0.9,
        help="step as a fraction of 1/L_max (ccd) or 1/||A||_2^2 (ijt)",
    )
    p.add_argument("--algo", choices=("ccd", "ijt", "lqcd"), default="ccd")
    p.add_argument("--allow-unsafe-step", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="lqccd", description="lq-regularized least squares: generate, solve, sweep, check."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw a synthetic recovery instance")
    _add_instance_args(g)
    g.add_argument("--format", choices=("csv", "bin"), default="csv", help="matrix file format")
    g.add_argument("--out", type=Path, required=True, help="output directory")
    g.add_argument("--config", type=Path)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve one problem directory")
    s.add_argument("problem", type=Path, help="problem directory written by generate")
    _add_model_args(s)
    s.add_argument(
        "--stop-rule",
        choices=("auto", "step", "objective", "rmse"),
        default="auto",
        help="auto: rmse when the directory has x_true.csv, else step",
    )
    s.add_argument("--tol", type=float, help="default 1e-2 for rmse, 1e-8 otherwise")
    s.add_argument("--max-iter", type=int, default=160_000, help="coordinate updates (sweeps for ijt)")
    s.add_argument("--x0", default="zero", help="'zero' or a vector file")
    s.add_argument("--certify", action="store_true", help="evaluate stationarity and local-min certificates")
    s.add_argument("--history", action="store_true", help="record per-update history in the report")
    s.add_argument("--out", type=Path, help="report path (JSON); default <problem>/report.json")
    s.add_argument("--config", type=Path)
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="q / step-size sweep, one CSV row per run")
    _add_instance_args(w)
    w.add_argument("--lambda", dest="lam", type=float, default=0.009)
    w.add_argument("--q-list", type=_floats, default=(0.1, 0.3, 0.5, 0.7, 0.9))
    w.add_argument(
        "--mu-grid",
        type=_floats,
        default=(0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99),
        help="comma-separated fractions of 1/L_max",
    )
    w.add_argument("--tol", type=float, default=1e-2)
    w.add_argument("--max-iter", type=int, default=160_000)
    w.add_argument("--trials", type=int, default=10)
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--allow-unsafe-step", action="store_true", help="permit mu-frac 1 (unit-step reference)")
    w.add_argument("--out", type=Path, required=True, help="CSV path")
    w.add_argument("--config", type=Path)
    w.set_defaults(func=cmd_sweep)

    c = sub.add_parser("check", help="certify a candidate solution")
    c.add_argument("problem", type=Path)
    c.add_argument("solution", type=Path, help="vector CSV or a solve report (JSON)")
    c.add_argument("--lambda", dest="lam", type=float)
    c.add_argument("--q", type=float)
    c.add_argument("--mu", type=float, help="absolute step used for the thresholds")
    c.add_argument("--mu-frac", type=float, help="step as a fraction of 1/L_max")
    c.add_argument("--config", type=Path)
    c.set_defaults(func=cmd_check)

    return parser, {"generate": g, "solve": s, "sweep": w, "check": c}


def _config_path(argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    known, _ = pre.parse_known_args(argv)
    return known.config


def parse_args(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    config = _config_path(argv)
    command = next((a for a in argv if a in subs), None)
    if config is not None and command is not None:
        sp = subs[command]
        try:
            values = read_key_values(config)
        except OSError as exc:
            parser.error(f"cannot read config: {exc}")
        dests = {a.dest: a for a in sp._actions}
        defaults = {}
        for key, raw in values.items():
            dest = "lam" if key == "lambda" else key
            if dest not in dests or dest in ("help", "config"):
                parser.error(f"{config}: unknown setting {key!r} for {command}")
            action = dests[dest]
            if action.nargs == 0 or isinstance(action, argparse.BooleanOptionalAction):
                defaults[dest] = _bool(raw)
            elif action.type is not None:
                defaults[dest] = action.type(raw)
            else:
                defaults[dest] = raw
            # satisfied by the file; argparse checks required flags before defaults
            action.required = False
        sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def cmd_generate(args):
    problem, truth = generate_instance(
        args.m, args.n, args.k, args.snr_db, args.normalize, seed=args.seed
    )
    stats = column_stats(problem.A, gram_limit=0)
    meta = {
        "seed": args.seed,
        "m": args.m,
        "n": args.n,
        "k": args.k,
        "snr_db": repr(args.snr_db),
        "normalized": args.normalize,
        "l_max": repr(stats.l_max),
    }
    save_problem(args.out, problem, truth, fmt=args.format, meta=meta)
    print(f"wrote {args.m}x{args.n} instance (k={args.k}, snr_db={args.snr_db:g}) to {args.out}")
    print(f"seed={args.seed} l_max={stats.l_max:.6g}")
    return EXIT_OK


def _step_for(args, A):
    if args.algo == "lqcd":
        return 1.0
    if args.algo == "ijt":
        return args.mu_frac / column_stats(A, gram_limit=0).spec_norm_sq
    return args.mu_frac / float(np.max(np.einsum("ij,ij->j", A, A)))


def cmd_solve(args):
    problem = load_problem(args.problem, args.lam, args.q)
    truth = load_truth(args.problem)
    stop_rule = args.stop_rule
    if stop_rule == "auto":
        stop_rule = "rmse" if truth is not None else "step"
    if stop_rule == "rmse" and truth is None:
        raise ProblemFileError(f"{args.problem}: the rmse stop rule needs x_true.csv")
    tol = args.tol if args.tol is not None else (1e-2 if stop_rule == "rmse" else 1e-8)
    if args.algo != "lqcd" and not (args.mu_frac > 0 and (args.mu_frac < 1 or args.allow_unsafe_step)):
        bound = "1/||A||_2^2" if args.algo == "ijt" else "1/L_max"
        raise InadmissibleStepError(
            f"--mu-frac {args.mu_frac:g} is not admissible: convergence requires "
            f"0 < mu < {bound} (mu-frac in (0, 1)); pass --allow-unsafe-step to override"
        )
    step = _step_for(args, problem.A)
    x0 = None
    if args.x0 != "zero":
        x0 = read_vector(args.x0)
        if x0.shape != (problem.shape[1],):
            raise DimensionMismatchError(
                f"--x0 has length {x0.size}, problem has {problem.shape[1]} columns"
            )
    options = SolverOptions(
        step=step,
        max_iter=args.max_iter,
        stop_rule=stop_rule,
        tol=tol,
        x0=x0,
        record_history=args.history or args.certify,
        allow_unsafe_step=args.allow_unsafe_step,
    )
    solver = {"ccd": ccd_solve, "ijt": ijt_solve, "lqcd": lq_cd_reference}[args.algo]
    report = solver(problem, options, truth)

    line = (
        f"algo={report.algo} objective={report.objective_final:.12g} "
        f"support={report.support.size} stop={report.stop_reason.value} "
        f"updates={report.iterations} cycles={report.cycles} time={report.wall_time:.3f}s"
    )
    if report.rmse is not None:
        line += f" rmse={report.rmse:.4g}"
    print(line)
    if args.certify:
        params = make_prox_params(args.lam, report.step, args.q)
        stat = check_stationarity(report.x_final, problem, params)
        cert = certify_local_min(report.x_final, problem)
        certs = {"stationarity": stat.to_dict(), "local_min": cert.to_dict()}
        hist = report.history
        if hist is not None and args.algo != "ijt":
            j = detect_support_stabilization(hist.cycle_x)
            certs["stabilization_cycle"] = j
            if j is not None and j < len(hist.cycle_x) - 1:
                certs["relative_error"] = relative_error_diagnostic(hist, problem, params, j).to_dict()
        report.certificates = certs
        _print_certificates(stat, cert)
        if not args.history:
            report.history = None
    out = args.out or (args.problem / "report.json")
    save_report(out, report)
    print(f"report: {out}")
    return EXIT_OK


def _print_certificates(stat, cert):
    print(
        f"stationary={stat.is_stationary} "
        f"cond_a_margin={stat.cond_a_margin:.3g} cond_b_residual={stat.cond_b_residual:.3g} "
        f"cond_c_margin={stat.cond_c_margin:.3g}"
    )
    print(
        f"local_min_certificate={cert.holds} sigma_min={cert.sigma_min:.6g} "
        f"min_magnitude={cert.min_support_magnitude:.6g} lambda_bound={cert.lambda_bound:.6g}"
    )


def cmd_sweep(args):
    config = SweepConfig(
        m=args.m,
        n=args.n,
        k=args.k,
        snr_db=args.snr_db,
        lam=args.lam,
        q_list=args.q_list,
        mu_grid=args.mu_grid,
        tol=args.tol,
        max_iter=args.max_iter,
        trials=args.trials,
        seed=args.seed,
        normalize=args.normalize,
        allow_unsafe=args.allow_unsafe_step,
        workers=args.workers,
    )
    args.out.parent.mkdir(parents=True, exist_ok=True)
    with open(args.out, "w", newline="") as fh:
        records = run_sweep(config, sink=CsvSink(fh))
    print(f"{'q':>5} {'mu':>5} {'rmse':>10} {'cycles':>8} {'time_s':>8} {'ok':>4}")
    for row in summarize(records):
        print(
            f"{row['q']:5.2f} {row['mu_frac']:5.2f} {row['median_rmse']:10.3g} "
            f"{row['median_cycles']:8.1f} {row['median_time_s']:8.3f} "
            f"{row['reached_tol']:>2}/{row['trials']}"
        )
    print(f"rows: {args.out}")
    return EXIT_OK


def cmd_check(args):
    lam, q, step = args.lam, args.q, args.mu
    if args.solution.suffix == ".json":
        rep = load_report(args.solution)
        lam = rep["reg"] if lam is None else lam
        q = rep["q"] if q is None else q
        step = rep["step"] if step is None and args.mu_frac is None else step
    if lam is None or q is None:
        raise ValueError("check needs --lambda and --q (or a report that records them)")
    problem = load_problem(args.problem, lam, q)
    x = read_vector(args.solution)
    if x.shape != (problem.shape[1],):
        raise DimensionMismatchError(
            f"solution has length {x.size}, problem has {problem.shape[1]} columns"
        )
    if step is None:
        l_max = float(np.max(np.einsum("ij,ij->j", problem.A, problem.A)))
        step = (args.mu_frac if args.mu_frac is not None else 0.9) / l_max
    params = make_prox_params(lam, step, q)
    stat = check_stationarity(x, problem, params)
    cert = certify_local_min(x, problem)
    print(f"mu={step:.6g} tau={params.tau:.6g} eta={params.eta:.6g} support={stat.support.size}")
    _print_certificates(stat, cert)
    return EXIT_OK if stat.is_stationary else EXIT_NOT_STATIONARY


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except InadmissibleStepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, ProblemFileError, DimensionMismatchError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
