"""Problem data, synthetic compressed-sensing instances and matrix statistics."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .validation import (
    ConvergenceError,
    DimensionMismatchError,
    check_finite_array,
    check_q,
)

__all__ = [
    "Problem",
    "GroundTruth",
    "ColumnStats",
    "generate_instance",
    "column_stats",
    "power_iteration",
    "unit_columns",
]

GRAM_FULL_LIMIT = 2000


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Problem:
    """An ``lq`` least-squares problem ``1/2 ||Ax - y||^2 + reg * sum |x_i|^q``.

    ``reg`` and ``q`` may be left unset for raw instance data; solvers call
    :meth:`with_params` to attach them.
    """

    A: np.ndarray
    y: np.ndarray
    reg: Optional[float] = None
    q: Optional[float] = None

    def __post_init__(self):
        A = check_finite_array(self.A, "A", 2)
        y = check_finite_array(self.y, "y", 1)
        if y.shape[0] != A.shape[0]:
            raise DimensionMismatchError(
                f"y has length {y.shape[0]} but A has {A.shape[0]} rows"
            )
        object.__setattr__(self, "A", _frozen(A))
        object.__setattr__(self, "y", _frozen(y))
        if self.reg is not None:
            reg = float(self.reg)
            if not (reg >= 0 and math.isfinite(reg)):
                raise ValueError(f"reg must be nonnegative and finite, got {reg!r}")
            object.__setattr__(self, "reg", reg)
        if self.q is not None:
            object.__setattr__(self, "q", check_q(self.q))

    @property
    def shape(self):
        return self.A.shape

    def with_params(self, reg, q):
        return dataclasses.replace(self, reg=reg, q=q)

    def require_params(self):
        if self.reg is None or self.q is None:
            raise ValueError("problem has no reg/q attached; use Problem.with_params")
        return self.reg, self.q


@dataclass(frozen=True, eq=False)
class GroundTruth:
    x_star: np.ndarray
    support: np.ndarray
    snr_db: float

    def __post_init__(self):
        object.__setattr__(self, "x_star", _frozen(self.x_star))
        support = np.asarray(self.support, dtype=np.int64)
        if not np.array_equal(np.flatnonzero(self.x_star), np.sort(support)):
            raise ValueError("support does not match the nonzeros of x_star")
        support = np.sort(support)
        support.setflags(write=False)
        object.__setattr__(self, "support", support)

    def rmse(self, x):
        """Relative recovery error ``||x - x*|| / ||x*||``."""
        return float(np.linalg.norm(x - self.x_star) / np.linalg.norm(self.x_star))


@dataclass(frozen=True)
class ColumnStats:
    col_sq_norms: np.ndarray
    l_max: float
    spec_norm_sq: float
    gram_max_abs: Optional[float]
    gram_skipped: bool = False


def unit_columns(A):
    """Scale every column of ``A`` to unit Euclidean norm."""
    A = np.asarray(A, dtype=np.float64)
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0):
        raise ValueError("cannot normalize a zero column")
    return A / norms


def generate_instance(
    m,
    n,
    k,
    snr_db=30.0,
    normalize_columns=True,
    seed=0,
    variance=None,
):
    """Draw a sparse-recovery instance ``y = A x* + noise``.

    ``A`` has i.i.d. ``N(0, variance)`` entries (``variance = 1/m`` by default),
    optionally column-normalized. ``x*`` has ``k`` standard Gaussian nonzeros at
    uniformly random positions. The noise is a Gaussian draw rescaled so that
    ``10 log10(||A x*||^2 / ||noise||^2)`` equals ``snr_db`` exactly;
    ``snr_db = inf`` gives noiseless data.

    Returns
    -------
    (Problem, GroundTruth)
        The problem has no ``reg``/``q`` attached.
    """
    m, n, k = int(m), int(n), int(k)
    if m < 1 or n < 1 or k < 1:
        raise ValueError("m, n and k must be positive")
    if k > n:
        raise ValueError(f"sparsity k={k} exceeds the dimension n={n}")
    if variance is None:
        variance = 1.0 / m
    rng = np.random.default_rng(seed)
    A = rng.normal(0.0, math.sqrt(variance), size=(m, n))
    if normalize_columns:
        A = unit_columns(A)
    support = np.sort(rng.choice(n, size=k, replace=False))
    x_star = np.zeros(n)
    x_star[support] = rng.standard_normal(k)
    # a standard normal draw of exactly 0.0 would break the support contract
    x_star[support] = np.where(x_star[support] == 0.0, 1.0, x_star[support])
    signal = A @ x_star
    if math.isinf(snr_db) and snr_db > 0:
        y = signal
    else:
        noise = rng.standard_normal(m)
        noise *= np.linalg.norm(signal) / np.linalg.norm(noise) * 10.0 ** (-snr_db / 20.0)
        y = signal + noise
    return Problem(A, y), GroundTruth(x_star, support, float(snr_db))


def power_iteration(M, tol=1e-8, max_iter=10_000, seed=0):
    """Largest eigenvalue of the symmetric PSD matrix ``M``.

    Stops once the Rayleigh quotient changes by at most ``tol`` relative.
    """
    M = np.asarray(M, dtype=np.float64)
    v = np.random.default_rng(seed).standard_normal(M.shape[0])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = M @ v
        new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(new - est) <= tol * abs(new):
            return new
        est = new
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")


def column_stats(A, support_subset=None, gram_limit=GRAM_FULL_LIMIT, tol=1e-8, max_iter=10_000):
    """Column norms, ``L_max``, an estimate of ``||A||_2^2`` and the Gram maximum.

    The Gram maximum ``max |A_i^T A_j|`` runs over ``support_subset`` when it
    is given, otherwise over all columns if there are at most ``gram_limit``
    of them; above that it is skipped and flagged.
    """
    A = np.asarray(A, dtype=np.float64)
    col_sq = np.einsum("ij,ij->j", A, A)
    l_max = float(col_sq.max())
    est = power_iteration(A.T @ A, tol=tol, max_iter=max_iter)
    # ||A||_2^2 >= L_max always; the Rayleigh quotient can undershoot by tol
    spec = max(est, l_max)
    skipped = False
    if support_subset is not None:
        idx = np.asarray(support_subset, dtype=np.int64)
        gram = float(np.abs(A[:, idx].T @ A[:, idx]).max()) if idx.size else 0.0
    elif A.shape[1] <= gram_limit:
        gram = float(np.abs(A.T @ A).max())
    else:
        gram, skipped = None, True
    return ColumnStats(col_sq, l_max, spec, gram, skipped)
