"""Cyclic coordinate descent for ``lq`` regularized least squares, and baselines.

The cyclic solver visits coordinates ``1, 2, ..., N, 1, 2, ...``. Each update
takes a forward gradient step on one coordinate,
``z_i = x_i - mu * A_i^T (A x - y)``, and maps it through the scalar ``lq``
prox (with the tie rule of :func:`lqccd.prox.tie_break`). The residual
``A x - y`` is maintained incrementally, so one update costs ``O(m)``.

Two baselines share the same prox: the Jacobi-style iterative jumping
thresholding map ``x <- Prox(x - mu A^T (A x - y))`` (:func:`ijt_solve`) and the
unit-column, unit-step special case (:func:`lq_cd_reference`).
"""

from __future__ import annotations

import dataclasses
import enum
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .problem import GroundTruth, Problem, column_stats
from .prox import ProxParams, make_prox_params, tie_break
from .validation import check_positive, check_step

__all__ = [
    "StopReason",
    "SolverOptions",
    "SolverState",
    "History",
    "SolveReport",
    "objective",
    "coordinate_index",
    "init_state",
    "ccd_step",
    "ccd_solve",
    "ijt_step",
    "ijt_solve",
    "lq_cd_reference",
    "STOP_RULES",
]

STOP_RULES = ("step", "objective", "rmse")
UNIT_COLUMN_TOL = 1e-9


class StopReason(str, enum.Enum):
    TOLERANCE = "tolerance met"
    MAX_ITER = "max_iter"
    STAGNATION = "stagnation"

    def __str__(self):
        return self.value


@dataclass
class SolverOptions:
    """Run-time settings shared by every solver.

    Attributes
    ----------
    step : float
        Absolute step size ``mu``.
    max_iter : int
        Cap on coordinate updates (cyclic solver) or full sweeps (Jacobi).
    stop_rule : {"step", "objective", "rmse"}
        ``"step"``: ``||x^{n+N} - x^n|| <= tol * (1 + ||x^n||)`` over a full
        cycle. ``"objective"``: the objective drop over a full cycle is at
        most ``tol * (1 + |T|)``. ``"rmse"``: ``||x - x*|| / ||x*|| <= tol``;
        needs ground truth.
    tol : float
    x0 : array or None
        Initial iterate, zero by default.
    record_history : bool
        Keep per-update and per-cycle diagnostics in the report.
    allow_unsafe_step : bool
        Skip the step-size admissibility check.
    stop_on_stagnation : bool
        Stop when a full cycle leaves ``x`` unchanged without the stop rule
        being met. Off by default so that stuck runs reach ``max_iter``.
    refresh_every : int or None
        Recompute the residual from scratch every this many updates
        (default ``50 * N``).
    """

    step: float
    max_iter: int = 160_000
    stop_rule: str = "step"
    tol: float = 1e-8
    x0: Optional[np.ndarray] = None
    record_history: bool = False
    allow_unsafe_step: bool = False
    stop_on_stagnation: bool = False
    refresh_every: Optional[int] = None

    def __post_init__(self):
        if self.stop_rule not in STOP_RULES:
            raise ValueError(f"stop_rule must be one of {STOP_RULES}, got {self.stop_rule!r}")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be a positive integer")
        self.max_iter = int(self.max_iter)
        self.tol = check_positive(self.tol, "tol")


@dataclass
class SolverState:
    """Mutable iterate of a cyclic solve. ``residual`` is ``A x - y``."""

    x: np.ndarray
    residual: np.ndarray
    iter: int
    objective: float
    last_step_sq: float = 0.0
    support_stable_since: Optional[int] = None
    # column cache and the last update, filled by init_state / ccd_step
    At: np.ndarray = field(default=None, repr=False)
    col_sq_norms: np.ndarray = field(default=None, repr=False)
    last_index: int = -1
    last_grad: float = 0.0


@dataclass
class History:
    """Per-update and per-cycle diagnostics.

    Per update ``n``: the coordinate touched, its new value and change, the objective after
    the update, the sufficient-decrease slack
    ``T(x^n) - T(x^{n+1}) - (1/mu - L_max) d^2 / 2`` and, for nonzero
    results, the coordinate optimality residual. Per cycle (index 0 is the
    initial point): a snapshot of ``x``, its objective and the step norm
    from the previous snapshot.
    """

    coords: list = field(default_factory=list)
    values: list = field(default_factory=list)
    deltas: list = field(default_factory=list)
    objectives: list = field(default_factory=list)
    decrease_slack: list = field(default_factory=list)
    coord_residual: list = field(default_factory=list)
    cycle_x: list = field(default_factory=list)
    cycle_objective: list = field(default_factory=list)
    cycle_step_norm: list = field(default_factory=list)

    def to_dict(self):
        return {
            "coords": np.asarray(self.coords, dtype=np.int64),
            "values": np.asarray(self.values),
            "deltas": np.asarray(self.deltas),
            "objectives": np.asarray(self.objectives),
            "decrease_slack": np.asarray(self.decrease_slack),
            "coord_residual": np.asarray(self.coord_residual),
            "cycle_objective": np.asarray(self.cycle_objective),
            "cycle_step_norm": np.asarray(self.cycle_step_norm),
            "cycle_x": np.asarray(self.cycle_x),
        }


@dataclass
class SolveReport:
    x_final: np.ndarray
    objective_final: float
    iterations: int
    cycles: int
    stop_reason: StopReason
    support: np.ndarray
    sign_pattern: np.ndarray
    wall_time: float
    algo: str
    step: float
    reg: float
    q: float
    tau: float
    eta: float
    stop_rule: str
    tol: float
    within_theory: bool = True
    stable_since_cycle: Optional[int] = None
    rmse: Optional[float] = None
    history: Optional[History] = None
    certificates: Optional[dict] = None

    def to_dict(self):
        out = {
            f.name: getattr(self, f.name)
            for f in dataclasses.fields(self)
            if f.name not in ("history", "stop_reason")
        }
        out["stop_reason"] = self.stop_reason.value
        if self.history is not None:
            out["history"] = self.history.to_dict()
        return out


def objective(problem: Problem, x) -> float:
    """``1/2 ||A x - y||^2 + reg * sum |x_i|^q``."""
    reg, q = problem.require_params()
    x = np.asarray(x, dtype=np.float64)
    r = problem.A @ x - problem.y
    return 0.5 * float(r @ r) + reg * float(np.sum(np.abs(x) ** q))


def coordinate_index(n: int, n_cols: int) -> int:
    """1-based coordinate updated at iteration ``n``: ``(n+1) mod N``, or ``N``."""
    if n_cols < 1:
        raise ValueError("n_cols must be positive")
    i = (n + 1) % n_cols
    return n_cols if i == 0 else i


def _initial_point(problem, x0):
    n = problem.shape[1]
    if x0 is None:
        return np.zeros(n)
    x = np.array(x0, dtype=np.float64, copy=True)
    if x.shape != (n,):
        raise ValueError(f"x0 must have shape ({n},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 contains non-finite entries")
    return x


def init_state(problem: Problem, x0=None) -> SolverState:
    x = _initial_point(problem, x0)
    r = problem.A @ x - problem.y
    At = np.ascontiguousarray(problem.A.T)
    state = SolverState(
        x=x,
        residual=r,
        iter=0,
        objective=objective(problem, x),
        At=At,
        col_sq_norms=np.einsum("ij,ij->i", At, At),
    )
    return state


def ccd_step(state: SolverState, problem: Problem, params: ProxParams, i: int) -> SolverState:
    """Update coordinate ``i`` (0-based) in place and return ``state``."""
    reg, q = params.reg, params.q
    a_i = state.At[i]
    g = float(a_i @ state.residual)
    xi = state.x[i]
    v = tie_break(xi - params.step * g, xi, params)
    d = v - xi
    if d != 0.0:
        state.residual += d * a_i
        state.x[i] = v
        state.objective += (
            d * g + 0.5 * d * d * state.col_sq_norms[i] + reg * (abs(v) ** q - abs(xi) ** q)
        )
    state.last_step_sq = d * d
    state.last_index = i
    state.last_grad = g
    state.iter += 1
    return state


def _refresh(state, problem):
    state.residual = problem.A @ state.x - problem.y
    state.objective = objective(problem, state.x)


def _cycle_done(rule, tol, x, x_prev, T, T_prev, truth):
    if rule == "step":
        return float(np.linalg.norm(x - x_prev)) <= tol * (1.0 + float(np.linalg.norm(x_prev)))
    if rule == "objective":
        return T_prev - T <= tol * (1.0 + abs(T))
    return truth.rmse(x) <= tol


def _report(state, params, options, *, algo, cycles, stop, t0, truth, history, within_theory):
    x = state.x.copy()
    signs = np.sign(x).astype(np.int8)
    return SolveReport(
        x_final=x,
        objective_final=float(state.objective),
        iterations=state.iter,
        cycles=cycles,
        stop_reason=stop,
        support=np.flatnonzero(x),
        sign_pattern=signs,
        wall_time=time.perf_counter() - t0,
        algo=algo,
        step=params.step,
        reg=params.reg,
        q=params.q,
        tau=params.tau,
        eta=params.eta,
        stop_rule=options.stop_rule,
        tol=options.tol,
        within_theory=within_theory,
        stable_since_cycle=state.support_stable_since,
        rmse=truth.rmse(x) if truth is not None else None,
        history=history,
    )


def ccd_solve(
    problem: Problem,
    options: SolverOptions,
    truth: Optional[GroundTruth] = None,
    *,
    _algo="ccd",
) -> SolveReport:
    """Run cyclic coordinate descent until the stop rule or ``max_iter``.

    The stop rule is checked after every full cycle of ``N`` updates.
    ``iterations`` in the report counts coordinate updates and ``cycles``
    counts completed cycles.

    Raises
    ------
    InadmissibleStepError
        If ``step >= 1 / L_max`` (unless ``allow_unsafe_step``).
    FloatingPointError
        If the objective becomes non-finite.
    """
    reg, q = problem.require_params()
    m, N = problem.shape
    col_sq = np.einsum("ij,ij->j", problem.A, problem.A)
    l_max = float(col_sq.max())
    step = check_step(
        options.step, 1.0 / l_max, bound_name="1/L_max", allow_unsafe=options.allow_unsafe_step
    )
    within_theory = step * l_max < 1.0
    if options.stop_rule == "rmse" and truth is None:
        raise ValueError("the rmse stop rule needs ground truth")
    params = make_prox_params(reg, step, q)
    state = init_state(problem, options.x0)
    if not math.isfinite(state.objective):
        raise FloatingPointError("objective is not finite at the initial point")
    refresh = options.refresh_every or 50 * N
    history = History() if options.record_history else None
    if history is not None:
        history.cycle_x.append(state.x.copy())
        history.cycle_objective.append(state.objective)
        history.cycle_step_norm.append(0.0)
    # decrease constant of the sufficient-decrease bound
    a_const = 0.5 * (1.0 / step - l_max)

    t0 = time.perf_counter()
    x_prev = state.x.copy()
    T_prev = state.objective
    signs_prev = np.sign(state.x)
    state.support_stable_since = 0
    cycles = 0
    stop = StopReason.MAX_ITER
    while state.iter < options.max_iter:
        i = coordinate_index(state.iter, N) - 1
        T_before = state.objective
        xi = state.x[i]
        ccd_step(state, problem, params, i)
        if history is not None:
            d = state.x[i] - xi
            history.coords.append(i)
            history.values.append(state.x[i])
            history.deltas.append(d)
            history.objectives.append(state.objective)
            history.decrease_slack.append(T_before - state.objective - a_const * d * d)
            v = state.x[i]
            if v != 0.0:
                history.coord_residual.append(
                    state.last_grad + d / step + reg * q * math.copysign(abs(v) ** (q - 1.0), v)
                )
            else:
                history.coord_residual.append(0.0)
        if state.iter % refresh == 0:
            _refresh(state, problem)
        if i != N - 1:
            continue

        cycles += 1
        T = state.objective
        if not math.isfinite(T):
            raise FloatingPointError(f"objective became non-finite after {state.iter} updates")
        signs = np.sign(state.x)
        if not np.array_equal(signs, signs_prev):
            state.support_stable_since = cycles
            signs_prev = signs
        if history is not None:
            history.cycle_x.append(state.x.copy())
            history.cycle_objective.append(T)
            history.cycle_step_norm.append(float(np.linalg.norm(state.x - x_prev)))
        if _cycle_done(options.stop_rule, options.tol, state.x, x_prev, T, T_prev, truth):
            stop = StopReason.TOLERANCE
            break
        if options.stop_on_stagnation and np.array_equal(state.x, x_prev):
            stop = StopReason.STAGNATION
            break
        x_prev = state.x.copy()
        T_prev = T

    state.objective = objective(problem, state.x)
    return _report(
        state,
        params,
        options,
        algo=_algo,
        cycles=cycles,
        stop=stop,
        t0=t0,
        truth=truth,
        history=history,
        within_theory=within_theory,
    )


def ijt_step(x, problem: Problem, params: ProxParams) -> np.ndarray:
    """One Jacobi sweep ``Prox(x - mu A^T (A x - y))`` with the tie rule per entry."""
    x = np.asarray(x, dtype=np.float64)
    z = x - params.step * (problem.A.T @ (problem.A @ x - problem.y))
    return np.array([tie_break(zi, xi, params) for zi, xi in zip(z, x)])


def ijt_solve(
    problem: Problem, options: SolverOptions, truth: Optional[GroundTruth] = None
) -> SolveReport:
    """Iterate :func:`ijt_step`. Requires ``step < 1 / ||A||_2^2``.

    ``max_iter`` caps full sweeps here; ``iterations`` and ``cycles`` both
    count sweeps.
    """
    reg, q = problem.require_params()
    stats = column_stats(problem.A, gram_limit=0)
    step = check_step(
        options.step,
        1.0 / stats.spec_norm_sq,
        bound_name="1/||A||_2^2",
        allow_unsafe=options.allow_unsafe_step,
    )
    if options.stop_rule == "rmse" and truth is None:
        raise ValueError("the rmse stop rule needs ground truth")
    params = make_prox_params(reg, step, q)
    x = _initial_point(problem, options.x0)
    state = SolverState(x=x, residual=problem.A @ x - problem.y, iter=0, objective=objective(problem, x))
    history = History() if options.record_history else None
    if history is not None:
        history.cycle_x.append(x.copy())
        history.cycle_objective.append(state.objective)
        history.cycle_step_norm.append(0.0)
    t0 = time.perf_counter()
    signs_prev = np.sign(x)
    state.support_stable_since = 0
    stop = StopReason.MAX_ITER
    while state.iter < options.max_iter:
        x_prev, T_prev = state.x, state.objective
        state.x = ijt_step(x_prev, problem, params)
        state.objective = objective(problem, state.x)
        state.iter += 1
        if not math.isfinite(state.objective):
            raise FloatingPointError(f"objective became non-finite after {state.iter} sweeps")
        signs = np.sign(state.x)
        if not np.array_equal(signs, signs_prev):
            state.support_stable_since = state.iter
            signs_prev = signs
        if history is not None:
            history.cycle_x.append(state.x.copy())
            history.cycle_objective.append(state.objective)
            history.cycle_step_norm.append(float(np.linalg.norm(state.x - x_prev)))
        if _cycle_done(options.stop_rule, options.tol, state.x, x_prev, state.objective, T_prev, truth):
            stop = StopReason.TOLERANCE
            break
        if options.stop_on_stagnation and np.array_equal(state.x, x_prev):
            stop = StopReason.STAGNATION
            break
    state.residual = problem.A @ state.x - problem.y
    return _report(
        state,
        params,
        options,
        algo="ijt",
        cycles=state.iter,
        stop=stop,
        t0=t0,
        truth=truth,
        history=history,
        within_theory=step * stats.spec_norm_sq < 1.0,
    )


def lq_cd_reference(
    problem: Problem, options: SolverOptions, truth: Optional[GroundTruth] = None
) -> SolveReport:
    """Cyclic descent with unit step on a unit-column matrix.

    This is the cyclic solver at ``mu = 1``, the edge of (and outside) the
    range ``mu < 1 / L_max`` covered by the convergence guarantees, so the
    report carries ``within_theory=False``. ``options.step`` is ignored.
    """
    norms = np.linalg.norm(problem.A, axis=0)
    if np.max(np.abs(norms - 1.0)) > UNIT_COLUMN_TOL:
        raise ValueError("lq_cd_reference requires unit-norm columns (within 1e-9)")
    opts = dataclasses.replace(options, step=1.0, allow_unsafe_step=True)
    report = ccd_solve(problem, opts, truth, _algo="lqcd")
    report.within_theory = False
    return report
