"""Scalar proximity operators of the penalty ``lam * |v|**q`` for ``0 < q < 1``.

The prox of ``v -> lam_mu * |v|**q`` at ``z`` minimizes
``(z - v)**2 / 2 + lam_mu * |v|**q``. It is a jump-thresholding map: zero
below the threshold ``tau`` and a nonzero root of
``v + lam_mu * q * sgn(v) * |v|**(q - 1) = z`` with ``|v| >= eta`` above it.
At ``|z| == tau`` both values are minimizers and the operator is set-valued.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .validation import ConvergenceError, check_open_unit

__all__ = [
    "ProxParams",
    "ProxValue",
    "make_prox_params",
    "prox_scalar",
    "prox_scalar_fixed_point",
    "half_threshold",
    "two_thirds_threshold",
    "tie_break",
    "prox_oracle",
    "at_threshold",
]

# A prox value is the tuple of its branches: one value, or (0, v) at |z| == tau.
ProxValue = tuple

ROOT_TOL = 1e-12
ROOT_MAX_ITER = 200
TIE_TOL = 1e-12


@dataclass(frozen=True)
class ProxParams:
    """Thresholds of the ``lq`` prox for a fixed product ``reg * step``.

    Attributes
    ----------
    reg_times_step : float
        The product of the regularization weight and the step size.
    q : float
        Penalty exponent in (0, 1).
    tau : float
        Jump threshold: inputs with ``|z| < tau`` map to zero.
    eta : float
        Smallest magnitude of a nonzero output.
    step : float
        The step size the product was formed with. Solvers need it separately
        to form the forward step and the off-support bound ``tau / step``.
    """

    reg_times_step: float
    q: float
    tau: float
    eta: float
    step: float = 1.0

    @property
    def reg(self) -> float:
        return self.reg_times_step / self.step


def make_prox_params(reg: float, step: float, q: float) -> ProxParams:
    """Build :class:`ProxParams` from ``reg``, ``step`` and ``q``.

    >>> p = make_prox_params(1.0, 1.0, 0.5)
    >>> round(p.tau, 12), round(p.eta, 12)
    (1.5, 1.0)
    """
    q = check_open_unit(q, "q")
    if not step > 0 or not math.isfinite(step):
        raise ValueError(f"step must be a positive finite number, got {step!r}")
    if not reg >= 0 or not math.isfinite(reg):
        raise ValueError(f"reg must be a nonnegative finite number, got {reg!r}")
    lam_mu = float(reg) * float(step)
    eta = (2.0 * lam_mu * (1.0 - q)) ** (1.0 / (2.0 - q))
    tau = (2.0 - q) / (2.0 - 2.0 * q) * eta
    return ProxParams(lam_mu, q, tau, eta, float(step))


def _check_finite(z):
    z = float(z)
    if not math.isfinite(z):
        raise ValueError(f"prox input must be finite, got {z!r}")
    return z


def at_threshold(z: float, params: ProxParams) -> bool:
    """True when ``|z|`` equals ``tau`` up to ``1e-12 * max(1, tau)``."""
    return abs(abs(z) - params.tau) <= TIE_TOL * max(1.0, params.tau)


def _root(a, params, tol=ROOT_TOL, max_iter=ROOT_MAX_ITER):
    """Root of ``v + c * v**(q-1) = a`` on ``[eta, a]``, with ``c = lam_mu * q``.

    The left side is convex and increasing on the bracket, so Newton from the
    right end descends monotonically; bisection takes over if a step leaves
    the bracket.
    """
    c = params.reg_times_step * params.q
    qm1 = params.q - 1.0
    lo, hi = params.eta, a
    if hi <= lo:
        return lo
    v = hi
    for _ in range(max_iter):
        h = v + c * v**qm1 - a
        if h == 0.0:
            return v
        if h > 0:
            hi = v
        else:
            lo = v
        dh = 1.0 + c * qm1 * v ** (qm1 - 1.0)
        v_new = v - h / dh
        if not lo <= v_new <= hi:
            v_new = 0.5 * (lo + hi)
        if abs(v_new - v) <= tol * max(1.0, v):
            return v_new
        v = v_new
    return v


def prox_scalar(z: float, params: ProxParams) -> ProxValue:
    """Evaluate the (set-valued) ``lq`` prox at a scalar.

    Returns a tuple of branches: ``(0.0,)`` below the threshold, ``(v,)``
    above it and ``(0.0, v)`` exactly at ``|z| == tau``.
    """
    z = _check_finite(z)
    if params.reg_times_step == 0.0:
        return (z,)
    a = abs(z)
    tie = at_threshold(z, params)
    if a < params.tau and not tie:
        return (0.0,)
    v = math.copysign(_root(a, params), z)
    if tie:
        return (0.0, v)
    return (v,)


def prox_scalar_fixed_point(
    z: float, params: ProxParams, tol: float = ROOT_TOL, max_iter: int = ROOT_MAX_ITER
) -> float:
    """Nonzero prox branch via the iteration ``v <- |z| - lam_mu*q*v**(q-1)``.

    Starts from ``v = |z|``. Only defined for ``|z| >= tau``.

    Raises
    ------
    ConvergenceError
        If successive iterates are not within ``tol`` after ``max_iter`` steps.
    """
    z = _check_finite(z)
    a = abs(z)
    if a < params.tau and not at_threshold(z, params):
        raise ValueError(
            f"|z|={a!r} is below the jump threshold tau={params.tau!r}; "
            "the nonzero branch does not exist"
        )
    if params.reg_times_step == 0.0:
        return z
    c = params.reg_times_step * params.q
    qm1 = params.q - 1.0
    v = a
    for _ in range(max_iter):
        v_new = a - c * v**qm1
        if abs(v_new - v) <= tol:
            return math.copysign(v_new, z)
        v = v_new
    raise ConvergenceError(
        f"fixed-point prox iteration did not reach tol={tol} in {max_iter} steps"
    )


def _check_q(params, q, name):
    if abs(params.q - q) > 1e-12:
        raise ValueError(f"{name} requires q={q:.6g}, got q={params.q!r}")


def half_threshold(z: float, params: ProxParams) -> ProxValue:
    """Closed-form prox for ``q = 1/2`` (trigonometric root of the cubic)."""
    _check_q(params, 0.5, "half_threshold")
    z = _check_finite(z)
    a = abs(z)
    if params.reg_times_step == 0.0:
        return (z,)
    tie = at_threshold(z, params)
    if a < params.tau and not tie:
        return (0.0,)
    ratio = min(params.tau / a, 1.0) if not tie else 1.0
    theta = math.acos(math.sqrt(2.0) / 2.0 * ratio**1.5)
    v = 2.0 / 3.0 * z * (1.0 + math.cos(2.0 * math.pi / 3.0 - 2.0 / 3.0 * theta))
    if tie:
        return (0.0, v)
    return (v,)


def two_thirds_threshold(z: float, params: ProxParams) -> ProxValue:
    """Closed-form prox for ``q = 2/3`` (resolvent of the quartic in ``v**(1/3)``).

    With ``w = v**(1/3)`` the root equation is ``w**4 - |z| w + c = 0``,
    ``c = 2 lam_mu / 3``. It factors through ``s**2``, the positive root of
    ``t**3 - 4 c t - z**2 = 0``, and ``w = (s + sqrt(2|z|/s - s**2)) / 2``.
    """
    _check_q(params, 2.0 / 3.0, "two_thirds_threshold")
    z = _check_finite(z)
    a = abs(z)
    lam_mu = params.reg_times_step
    if lam_mu == 0.0:
        return (z,)
    tie = at_threshold(z, params)
    if a < params.tau and not tie:
        return (0.0,)
    p = 8.0 * lam_mu / 3.0
    arg = 1.5 * a * a / p * math.sqrt(3.0 / p)
    theta = math.acosh(max(arg, 1.0))
    s = math.sqrt(2.0 * math.sqrt(p / 3.0) * math.cosh(theta / 3.0))
    f = max(2.0 * a / s - s * s, 0.0)
    v = math.copysign(((s + math.sqrt(f)) / 2.0) ** 3, z)
    if tie:
        return (0.0, v)
    return (v,)


def tie_break(z: float, x_prev: float, params: ProxParams) -> float:
    """Single-valued prox selection used by the coordinate updates.

    Off the threshold this is the unique prox value. At ``|z| == tau`` it
    keeps a nonzero coordinate nonzero (``sgn(z) * eta``) and a zero
    coordinate at zero.
    """
    branches = prox_scalar(z, params)
    if len(branches) == 1:
        return branches[0]
    if x_prev != 0.0:
        return math.copysign(params.eta, z)
    return 0.0


def _scalar_objective(v, z, lam_mu, q):
    return 0.5 * (z - v) ** 2 + lam_mu * np.abs(v) ** q


def prox_oracle(
    z: float, params: ProxParams, grid_points: int = 100_000, refine: bool = True
) -> float:
    """Brute-force prox by grid search on ``[-2|z|, 2|z|]`` plus zero.

    With ``refine`` the best nonzero grid point is polished by a bounded
    scalar minimization and then compared against ``v = 0``. Meant as a test
    oracle; it never uses the thresholds.
    """
    if grid_points < 1000:
        raise ValueError("grid_points must be at least 1000")
    z = _check_finite(z)
    lam_mu, q = params.reg_times_step, params.q
    a = abs(z)
    if a == 0.0:
        return 0.0
    grid = np.linspace(-2.0 * a, 2.0 * a, grid_points)
    vals = _scalar_objective(grid, z, lam_mu, q)
    f0 = _scalar_objective(0.0, z, lam_mu, q)
    nz = grid != 0.0
    j = int(np.argmin(np.where(nz, vals, np.inf)))
    best, fbest = float(grid[j]), float(vals[j])
    if refine:
        h = grid[1] - grid[0]
        lo, hi = best - h, best + h
        # keep the bracket on one side of the kink at 0
        if best > 0:
            lo = max(lo, 0.0)
        else:
            hi = min(hi, 0.0)
        res = minimize_scalar(
            _scalar_objective,
            bounds=(lo, hi),
            args=(z, lam_mu, q),
            method="bounded",
            options={"xatol": 1e-13 * max(1.0, a), "maxiter": 500},
        )
        if res.fun < fbest:
            best, fbest = float(res.x), float(res.fun)
    if f0 <= fbest:
        return 0.0
    return best
