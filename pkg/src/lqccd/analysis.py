"""Post-hoc certificates and convergence diagnostics for ``lq`` solutions.

* :func:`check_stationarity` tests the three fixed-point conditions: support
  entries at least ``eta`` in magnitude, a vanishing gradient on the support,
  and off-support correlations ``|A_i^T (A x - y)| <= tau / mu``.
* :func:`certify_local_min` checks the sufficient condition for a strict local
  minimizer, ``sigma_min(A_I^T A_I) > 0`` and
  ``reg < sigma_min * e**(2-q) / (q (1-q))`` with ``e = min_{i in I} |x_i|``.
* :func:`detect_support_stabilization`, :func:`relative_error_diagnostic` and
  :func:`property_diagnostics` inspect a recorded solver history.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .problem import Problem
from .prox import ProxParams
from .solvers import History, objective

__all__ = [
    "StationarityReport",
    "LocalMinCertificate",
    "RelativeErrorDiagnostic",
    "PropertyDiagnostics",
    "check_stationarity",
    "certify_local_min",
    "local_min_spot_check",
    "detect_support_stabilization",
    "relative_error_diagnostic",
    "property_diagnostics",
]

EIGH_MAX_K = 512


@dataclass
class StationarityReport:
    support: np.ndarray
    min_support_magnitude: float
    cond_a_margin: float
    cond_a_ok: bool
    cond_b_residual: float
    cond_b_ok: bool
    cond_c_margin: float
    cond_c_ok: bool
    is_stationary: bool
    tol_a: float
    tol_b: float
    tol_c: float

    def to_dict(self):
        return asdict(self)


@dataclass
class LocalMinCertificate:
    support: np.ndarray
    sigma_min: float
    min_support_magnitude: float
    lambda_bound: float
    reg: float
    holds: bool

    def to_dict(self):
        return asdict(self)


@dataclass
class RelativeErrorDiagnostic:
    k: int
    delta: float
    a_const: float
    b_const: float
    max_violation: float
    checked: int
    skipped: int

    def to_dict(self):
        return asdict(self)


def _penalty_grad(u, reg, q):
    return reg * q * np.sign(u) * np.abs(u) ** (q - 1.0)


def check_stationarity(
    x,
    problem: Problem,
    params: ProxParams,
    tol_a: Optional[float] = None,
    tol_b: Optional[float] = None,
    tol_c: Optional[float] = None,
) -> StationarityReport:
    """Evaluate the fixed-point conditions of the thresholding map at ``x``.

    Default tolerances: ``tol_a = 1e-9 eta``, ``tol_b = 1e-6 (1 + reg/mu)``,
    ``tol_c = 1e-9 tau / mu``.
    """
    reg, q = problem.require_params()
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (problem.shape[1],):
        raise ValueError(f"x has shape {x.shape}, expected ({problem.shape[1]},)")
    mu = params.step
    tol_a = 1e-9 * params.eta if tol_a is None else tol_a
    tol_b = 1e-6 * (1.0 + reg / mu) if tol_b is None else tol_b
    tol_c = 1e-9 * params.tau / mu if tol_c is None else tol_c

    grad = problem.A.T @ (problem.A @ x - problem.y)
    on = x != 0.0
    support = np.flatnonzero(on)
    if support.size:
        mags = np.abs(x[on])
        e = float(mags.min())
        margin_a = e - params.eta
        resid_b = float(np.max(np.abs(grad[on] + _penalty_grad(x[on], reg, q))))
    else:
        e, margin_a, resid_b = math.inf, math.inf, 0.0
    off = ~on
    margin_c = params.tau / mu - float(np.max(np.abs(grad[off]))) if off.any() else math.inf
    a_ok = margin_a >= -tol_a
    b_ok = resid_b <= tol_b
    c_ok = margin_c >= -tol_c
    return StationarityReport(
        support=support,
        min_support_magnitude=e,
        cond_a_margin=margin_a,
        cond_a_ok=bool(a_ok),
        cond_b_residual=resid_b,
        cond_b_ok=bool(b_ok),
        cond_c_margin=margin_c,
        cond_c_ok=bool(c_ok),
        is_stationary=bool(a_ok and b_ok and c_ok),
        tol_a=tol_a,
        tol_b=tol_b,
        tol_c=tol_c,
    )


def _smallest_eigenvalue(G):
    K = G.shape[0]
    if K <= EIGH_MAX_K:
        return float(scipy.linalg.eigvalsh(G, subset_by_index=[0, 0])[0])
    # inverse power iteration through a Cholesky factor; failure means not PD
    try:
        factor = scipy.linalg.cho_factor(G)
    except scipy.linalg.LinAlgError:
        return 0.0
    v = np.random.default_rng(0).standard_normal(K)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(10_000):
        w = scipy.linalg.cho_solve(factor, v)
        new = float(v @ w)
        v = w / np.linalg.norm(w)
        if abs(new - est) <= 1e-10 * new:
            break
        est = new
    return 1.0 / new


def certify_local_min(x, problem: Problem) -> LocalMinCertificate:
    """Sufficient local-minimizer test at a stationary point ``x``.

    ``x`` is assumed stationary (see :func:`check_stationarity`); this only
    evaluates the two extra conditions on the support Gram matrix. An empty
    support holds trivially and reports ``sigma_min = inf``.
    """
    reg, q = problem.require_params()
    x = np.asarray(x, dtype=np.float64)
    support = np.flatnonzero(x)
    if support.size == 0:
        return LocalMinCertificate(support, math.inf, math.inf, math.inf, reg, True)
    B = problem.A[:, support]
    G = B.T @ B
    sigma = _smallest_eigenvalue(G)
    # treat eigenvalues at roundoff level as exact zeros
    if sigma <= support.size * np.finfo(float).eps * max(float(np.max(np.abs(G))), 1.0):
        sigma = 0.0
    e = float(np.min(np.abs(x[support])))
    bound = sigma * e ** (2.0 - q) / (q * (1.0 - q))
    holds = sigma > 0.0 and 0.0 < reg < bound
    return LocalMinCertificate(support, sigma, e, bound, reg, bool(holds))


def local_min_spot_check(x, problem: Problem, n_directions=1000, radius_frac=1e-4, seed=0):
    """Smallest ``T(x + h) - T(x)`` over random ``h`` with ``||h|| = radius_frac * e``.

    ``e`` is the smallest nonzero magnitude of ``x`` (or 1 for ``x = 0``).
    A negative return value means a descent direction was found.
    """
    x = np.asarray(x, dtype=np.float64)
    nz = np.abs(x[x != 0.0])
    e = float(nz.min()) if nz.size else 1.0
    rng = np.random.default_rng(seed)
    H = rng.standard_normal((n_directions, x.size))
    H *= radius_frac * e / np.linalg.norm(H, axis=1, keepdims=True)
    base = objective(problem, x)
    return min(objective(problem, x + h) - base for h in H)


def detect_support_stabilization(patterns) -> Optional[int]:
    """First index after which the sign pattern never changes.

    ``patterns`` is a sequence of per-cycle iterates or sign vectors (index 0
    is the initial point). Returns ``None`` when the pattern still changes on
    the last recorded cycle.
    """
    signs = [np.sign(np.asarray(p)) for p in patterns]
    if not signs:
        return None
    last = len(signs) - 1
    j = last
    while j > 0 and np.array_equal(signs[j - 1], signs[last]):
        j -= 1
    if j == last and last > 0:
        return None
    return j


def relative_error_diagnostic(
    history: History, problem: Problem, params: ProxParams, stabilization_index: int
) -> RelativeErrorDiagnostic:
    """Check ``||grad T(u')|| <= b ||u' - u||`` between cycle snapshots.

    ``T`` is the objective restricted to the stabilized support ``I``, which
    is smooth there, ``u`` and ``u'`` are consecutive end-of-cycle iterates
    restricted to ``I`` and ``b = (1/mu + K delta) sqrt(K)`` with
    ``delta = max |A_i^T A_j|`` over ``i, j`` in ``I``. Cycles whose step is
    below ``1e-14`` are skipped.
    """
    reg, q = problem.require_params()
    snaps = history.cycle_x
    if not 0 <= stabilization_index < len(snaps):
        raise ValueError("stabilization index outside the recorded history")
    support = np.flatnonzero(snaps[-1])
    K = support.size
    B = problem.A[:, support]
    mu = params.step
    col_sq = np.einsum("ij,ij->j", problem.A, problem.A)
    delta = float(np.max(np.abs(B.T @ B))) if K else 0.0
    a_const = 0.5 * (1.0 / mu - float(col_sq.max()))
    b_const = (1.0 / mu + K * delta) * math.sqrt(K)
    worst, checked, skipped = -math.inf, 0, 0
    for j in range(stabilization_index + 1, len(snaps)):
        u_prev = snaps[j - 1][support]
        u = snaps[j][support]
        if K and np.min(np.abs(u)) < params.eta - 1e-9:
            raise ValueError(f"cycle {j}: support entry below eta; support not stabilized")
        step = float(np.linalg.norm(u - u_prev))
        if step < 1e-14:
            skipped += 1
            continue
        grad = B.T @ (B @ u - problem.y) + _penalty_grad(u, reg, q)
        worst = max(worst, float(np.linalg.norm(grad)) - b_const * step)
        checked += 1
    return RelativeErrorDiagnostic(K, delta, a_const, b_const, worst, checked, skipped)


@dataclass
class PropertyDiagnostics:
    """Worst observed values of the per-iteration descent properties.

    Violations are reported as positive numbers; a value ``<= 0`` means the
    property held everywhere (up to the stated slack).
    """

    decrease_violation: float
    coord_residual_max: float
    magnitude_gap_violation: float
    regularity_violation: float
    boundedness_violation: float

    def to_dict(self):
        return asdict(self)


def property_diagnostics(history: History, problem: Problem, params: ProxParams, x0=None):
    """Replay a cyclic run and measure the descent properties it should obey.

    The objective is recomputed from scratch after every update, independent
    of the solver's incremental bookkeeping:

    * sufficient decrease ``T(x^n) - T(x^{n+1}) >= (1/mu - L_max) d^2 / 2``,
      with slack ``1e-9 (1 + |T(x^n)|)``;
    * coordinate optimality residual of every nonzero update;
    * magnitude gap: touched coordinates are 0 or at least ``eta - 1e-9``;
    * summed squared steps at most ``2 mu T(x^0) / (1 - mu L_max)`` (+1e-6);
    * ``reg ||x^n||_q^q <= T(x^0)``.
    """
    reg, q = problem.require_params()
    A, y = problem.A, problem.y
    mu = params.step
    col_sq = np.einsum("ij,ij->j", A, A)
    l_max = float(col_sq.max())
    x = np.zeros(A.shape[1]) if x0 is None else np.array(x0, dtype=np.float64)
    T0 = objective(problem, x)
    T_prev = T0
    touched = np.zeros(A.shape[1], dtype=bool)
    decrease = resid = gap = bounded = -math.inf
    cum = 0.0
    reg_bound = 2.0 * mu * T0 / (1.0 - mu * l_max) if mu * l_max < 1.0 else math.inf
    regularity = -math.inf
    for i, v in zip(history.coords, history.values):
        x_old = x[i]
        x[i] = v
        d = v - x_old
        touched[i] = True
        r = A @ x - y
        T = 0.5 * float(r @ r) + reg * float(np.sum(np.abs(x) ** q))
        slack = 1e-9 * (1.0 + abs(T_prev))
        decrease = max(decrease, 0.5 * (1.0 / mu - l_max) * d * d - (T_prev - T) - slack)
        if x[i] != 0.0:
            g = float(A[:, i] @ r) + reg * q * math.copysign(abs(x[i]) ** (q - 1.0), x[i])
            resid = max(resid, abs(g - (1.0 / mu - col_sq[i]) * (x_old - x[i])))
        mags = np.abs(x[touched])
        if mags.size:
            nz = mags[mags != 0.0]
            if nz.size:
                gap = max(gap, params.eta - 1e-9 - float(nz.min()))
        cum += d * d
        regularity = max(regularity, cum - reg_bound - 1e-6)
        bounded = max(bounded, reg * float(np.sum(np.abs(x) ** q)) - T0)
        T_prev = T
    return PropertyDiagnostics(decrease, resid, gap, regularity, bounded)
