"""Input validation helpers and exception types shared across the package."""

from __future__ import annotations

import math

import numpy as np

# exponents outside this range make the q-1 and 1/(2-q) powers ill-conditioned
Q_MIN, Q_MAX = 0.01, 0.99
STEP_GUARD = 1.0 - 1e-9


class ConvergenceError(RuntimeError):
    """An inner iteration stopped at its cap without meeting its tolerance."""


class InadmissibleStepError(ValueError):
    """The step size violates the bound the convergence theory requires."""


class DimensionMismatchError(ValueError):
    """Array shapes of a problem or solution do not agree."""


def check_open_unit(value, name="q"):
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie in the open interval (0, 1), got {value!r}")
    return value


def check_q(q):
    """Validate the penalty exponent at the solver boundary, ``[0.01, 0.99]``."""
    q = check_open_unit(q, "q")
    if not Q_MIN <= q <= Q_MAX:
        raise ValueError(f"q must lie in [{Q_MIN}, {Q_MAX}], got {q!r}")
    return q


def check_positive(value, name):
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")
    return value


def check_finite_array(arr, name, ndim):
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != ndim:
        raise DimensionMismatchError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionMismatchError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_step(step, bound, *, bound_name, allow_unsafe=False):
    """Reject ``step`` unless ``0 < step <= (1 - 1e-9) * bound``.

    ``bound`` is the reciprocal of the relevant Lipschitz quantity, e.g.
    ``1 / L_max`` for cyclic coordinate descent.
    """
    step = check_positive(step, "step")
    if allow_unsafe:
        return step
    if step > STEP_GUARD * bound:
        raise InadmissibleStepError(
            f"step mu={step:.6g} is not admissible: convergence requires "
            f"mu < {bound_name} = {bound:.6g}"
        )
    return step
