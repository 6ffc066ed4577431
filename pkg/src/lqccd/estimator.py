"""scikit-learn compatible front end for the ``lq`` solvers."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .analysis import certify_local_min, check_stationarity
from .problem import Problem, column_stats
from .prox import make_prox_params
from .solvers import SolverOptions, StopReason, ccd_solve, ijt_solve, lq_cd_reference
from .validation import check_q

__all__ = ["LqRegression"]

_SOLVERS = {"ccd": ccd_solve, "ijt": ijt_solve, "lqcd": lq_cd_reference}


class LqRegression(RegressorMixin, BaseEstimator):
    """Least squares with an ``lq`` penalty, ``0 < q < 1``, and no intercept.

    Minimizes ``1/2 ||X w - y||^2 + reg * sum |w_j|^q`` by cyclic coordinate
    descent (``algo="ccd"``), the Jacobi thresholding iteration
    (``algo="ijt"``) or the unit-step variant for unit-norm columns
    (``algo="lqcd"``).

    Parameters
    ----------
    reg : float, default=0.009
        Penalty weight.
    q : float, default=0.5
        Penalty exponent in ``[0.01, 0.99]``.
    step_frac : float, default=0.95
        Step size as a fraction of its admissible bound: ``1 / L_max`` for
        ``ccd`` (``L_max`` the largest squared column norm) and
        ``1 / ||X||_2^2`` for ``ijt``. Ignored by ``lqcd``.
    algo : {"ccd", "ijt", "lqcd"}, default="ccd"
    stop_rule : {"step", "objective"}, default="step"
    tol : float, default=1e-8
    max_iter : int, default=1_000_000
        Coordinate updates for ``ccd``/``lqcd``, sweeps for ``ijt``.
    record_history : bool, default=False

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    report_ : SolveReport
    n_iter_ : int
    stationarity_ : StationarityReport
    """

    def __init__(
        self,
        reg=0.009,
        q=0.5,
        step_frac=0.95,
        algo="ccd",
        stop_rule="step",
        tol=1e-8,
        max_iter=1_000_000,
        record_history=False,
    ):
        self.reg = reg
        self.q = q
        self.step_frac = step_frac
        self.algo = algo
        self.stop_rule = stop_rule
        self.tol = tol
        self.max_iter = max_iter
        self.record_history = record_history

    def _check_params(self):
        if self.algo not in _SOLVERS:
            raise ValueError(f"algo must be one of {sorted(_SOLVERS)}, got {self.algo!r}")
        if self.stop_rule not in ("step", "objective"):
            raise ValueError("stop_rule must be 'step' or 'objective' (rmse needs ground truth)")
        if not 0.0 < self.step_frac < 1.0:
            raise ValueError(f"step_frac must lie in (0, 1), got {self.step_frac!r}")
        if not self.reg > 0:
            raise ValueError(f"reg must be positive, got {self.reg!r}")
        check_q(self.q)

    def fit(self, X, y):
        self._check_params()
        X, y = validate_data(self, X, y, dtype=np.float64, y_numeric=True)
        problem = Problem(X, y, self.reg, self.q)
        col_sq = np.einsum("ij,ij->j", X, X)
        if np.any(col_sq == 0):
            raise ValueError("X has an all-zero column; the coordinate step is undefined")
        if self.algo == "ijt":
            step = self.step_frac / column_stats(X, gram_limit=0).spec_norm_sq
        else:
            step = self.step_frac / float(col_sq.max())
        options = SolverOptions(
            step=step,
            max_iter=self.max_iter,
            stop_rule=self.stop_rule,
            tol=self.tol,
            record_history=self.record_history,
        )
        report = _SOLVERS[self.algo](problem, options)
        self.report_ = report
        self.coef_ = report.x_final
        self.n_iter_ = report.iterations
        params = make_prox_params(self.reg, report.step, self.q)
        self.stationarity_ = check_stationarity(report.x_final, problem, params)
        self.converged_ = report.stop_reason is StopReason.TOLERANCE
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return X @ self.coef_

    def certify(self, X, y):
        """Local-minimizer certificate of the fitted coefficients on ``(X, y)``."""
        check_is_fitted(self, "coef_")
        X, y = validate_data(self, X, y, dtype=np.float64, reset=False)
        return certify_local_min(self.coef_, Problem(X, y, self.reg, self.q))
