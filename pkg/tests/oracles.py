"""Independent reference computations shared by the tests."""

import math


def bisect_root(a, lam_mu, q, lo=None, hi=None, iters=200):
    """Largest root of ``v + lam_mu*q*v**(q-1) = a`` on ``[eta, a]`` by plain bisection.

    Independent of the package solver: no Newton steps, no shared code.
    """
    eta = (2.0 * lam_mu * (1.0 - q)) ** (1.0 / (2.0 - q))
    lo = eta if lo is None else lo
    hi = a if hi is None else hi

    def h(v):
        return v + lam_mu * q * v ** (q - 1.0) - a

    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if h(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def signed_root(z, lam_mu, q):
    return math.copysign(bisect_root(abs(z), lam_mu, q), z)
