"""Step-size / exponent sweep over synthetic recovery instances.

Every ``(q, mu_frac, trial)`` cell draws the instance of its trial, solves it
with the cyclic solver under the recovery stop rule
(``||x - x*|| / ||x*|| <= tol`` or ``max_iter`` coordinate updates) and yields
one :class:`SweepRecord`. Instances depend only on ``(seed, trial)``, so cells
with different ``q`` or ``mu_frac`` see the same data.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .problem import generate_instance
from .solvers import SolverOptions, ccd_solve, lq_cd_reference

__all__ = [
    "SweepConfig",
    "SweepRecord",
    "CSV_COLUMNS",
    "instance_seed",
    "run_cell",
    "run_sweep",
    "summarize",
    "write_csv",
    "support_f1",
    "CsvSink",
    "config_from_mapping",
]

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "q",
    "mu_frac",
    "trial",
    "rmse",
    "updates",
    "cycles",
    "wall_time_s",
    "stop_reason",
    "support_f1",
)


@dataclass
class SweepConfig:
    m: int = 200
    n: int = 400
    k: int = 20
    snr_db: float = 30.0
    lam: float = 0.009
    q_list: tuple = (0.1, 0.3, 0.5, 0.7, 0.9)
    mu_grid: tuple = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99)
    tol: float = 1e-2
    max_iter: int = 160_000
    trials: int = 10
    seed: int = 0
    normalize: bool = True
    allow_unsafe: bool = False
    workers: int = 1

    def __post_init__(self):
        self.q_list = tuple(float(q) for q in self.q_list)
        self.mu_grid = tuple(float(mu) for mu in self.mu_grid)
        for q in self.q_list:
            if not 0.0 < q < 1.0:
                raise ValueError(f"q values must lie in (0, 1), got {q!r}")
        for mu in self.mu_grid:
            if not mu > 0.0:
                raise ValueError(f"mu fractions must be positive, got {mu!r}")
            if mu >= 1.0 and not (self.allow_unsafe and mu == 1.0):
                raise ValueError(
                    f"mu fraction {mu!r} is not admissible: convergence requires "
                    "mu < 1/L_max (fractions in (0, 1)); 1.0 runs the unit-step "
                    "reference and needs allow_unsafe"
                )
        if self.trials < 1 or self.max_iter < 1:
            raise ValueError("trials and max_iter must be positive")

    def cells(self):
        return [(q, mu, t) for q in self.q_list for mu in self.mu_grid for t in range(self.trials)]


@dataclass
class SweepRecord:
    q: float
    mu_frac: float
    trial: int
    rmse: float
    updates: int
    cycles: int
    wall_time_s: float
    stop_reason: str
    support_f1: float
    error: Optional[str] = field(default=None, compare=False)

    def row(self):
        return [getattr(self, c) for c in CSV_COLUMNS]


def instance_seed(seed, trial):
    """Deterministic 64-bit instance seed for ``trial`` of a sweep seeded by ``seed``."""
    return int(np.random.SeedSequence([int(seed), int(trial)]).generate_state(1, np.uint64)[0])


def support_f1(found, true):
    found, true = set(map(int, found)), set(map(int, true))
    if not found and not true:
        return 1.0
    return 2.0 * len(found & true) / (len(found) + len(true))


def run_cell(config: SweepConfig, q, mu_frac, trial):
    problem, truth = generate_instance(
        config.m,
        config.n,
        config.k,
        config.snr_db,
        config.normalize,
        seed=instance_seed(config.seed, trial),
    )
    problem = problem.with_params(config.lam, q)
    try:
        if mu_frac == 1.0:
            # unit step only runs as the unit-column reference solver
            opts = SolverOptions(step=1.0, max_iter=config.max_iter, stop_rule="rmse", tol=config.tol)
            report = lq_cd_reference(problem, opts, truth)
        else:
            l_max = float(np.max(np.einsum("ij,ij->j", problem.A, problem.A)))
            opts = SolverOptions(
                step=mu_frac / l_max,
                max_iter=config.max_iter,
                stop_rule="rmse",
                tol=config.tol,
            )
            report = ccd_solve(problem, opts, truth)
    except Exception as exc:  # recorded in the row; the sweep continues
        log.warning("cell q=%s mu_frac=%s trial=%s failed: %s", q, mu_frac, trial, exc)
        nan = float("nan")
        return SweepRecord(q, mu_frac, trial, nan, 0, 0, nan, "error", nan, error=str(exc))
    return SweepRecord(
        q=q,
        mu_frac=mu_frac,
        trial=trial,
        rmse=report.rmse,
        updates=report.iterations,
        cycles=report.cycles,
        wall_time_s=report.wall_time,
        stop_reason=report.stop_reason.value,
        support_f1=support_f1(report.support, truth.support),
    )


def _run_cell_args(args):
    return run_cell(*args)


def run_sweep(config: SweepConfig, sink=None) -> list:
    """Run every cell; rows come back (and reach ``sink``) in cell order."""
    jobs = [(config, q, mu, t) for q, mu, t in config.cells()]
    records = []
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = pool.map(_run_cell_args, jobs, chunksize=max(1, len(jobs) // (8 * config.workers)))
            for rec in results:
                records.append(rec)
                if sink is not None:
                    sink(rec)
    else:
        for job in jobs:
            rec = run_cell(*job)
            records.append(rec)
            if sink is not None:
                sink(rec)
    return records


def summarize(records: Iterable[SweepRecord]):
    """Median rmse, cycles and time per ``(q, mu_frac)`` cell, plus tolerance hits."""
    groups = {}
    for rec in records:
        groups.setdefault((rec.q, rec.mu_frac), []).append(rec)
    out = []
    for (q, mu), recs in sorted(groups.items()):
        out.append(
            {
                "q": q,
                "mu_frac": mu,
                "trials": len(recs),
                "median_rmse": statistics.median(r.rmse for r in recs),
                "median_cycles": statistics.median(r.cycles for r in recs),
                "median_time_s": statistics.median(r.wall_time_s for r in recs),
                "reached_tol": sum(r.stop_reason == "tolerance met" for r in recs),
                "hit_max_iter": sum(r.stop_reason == "max_iter" for r in recs),
            }
        )
    return out


class CsvSink:
    """Writes records to an open CSV file, one row per call."""

    def __init__(self, fh):
        self._writer = csv.writer(fh)
        self._writer.writerow(CSV_COLUMNS)
        self._fh = fh

    def __call__(self, rec):
        self._writer.writerow([_fmt(v) for v in rec.row()])
        self._fh.flush()


def _fmt(v):
    return repr(v) if isinstance(v, float) else v


def write_csv(path, records):
    with open(path, "w", newline="") as fh:
        sink = CsvSink(fh)
        for rec in records:
            sink(rec)


def config_from_mapping(values: dict) -> SweepConfig:
    """Build a config from string values (e.g. a ``key=value`` file)."""
    fields = {f.name: f for f in dataclasses.fields(SweepConfig)}
    kwargs = {}
    for key, raw in values.items():
        key = key.replace("-", "_")
        if key == "lambda":
            key = "lam"
        if key not in fields:
            raise ValueError(f"unknown sweep setting {key!r}")
        default = fields[key].default
        if isinstance(default, tuple):
            kwargs[key] = tuple(float(v) for v in str(raw).split(",") if v.strip())
        elif isinstance(default, bool):
            kwargs[key] = str(raw).strip().lower() in ("1", "true", "yes", "on")
        else:
            kwargs[key] = type(default)(raw)
    return SweepConfig(**kwargs)
