import numpy as np
import pytest
from sklearn.base import clone
from sklearn.model_selection import cross_val_score
from sklearn.utils.estimator_checks import parametrize_with_checks

from lqccd import LqRegression, generate_instance


@parametrize_with_checks([LqRegression(max_iter=20_000)])
def test_sklearn_compatible(estimator, check):
    check(estimator)


@pytest.fixture
def data():
    problem, truth = generate_instance(50, 100, 5, 30.0, True, seed=11)
    return problem.A, problem.y, truth


def test_fit_predict(data):
    X, y, truth = data
    est = LqRegression(tol=1e-10).fit(X, y)
    assert est.converged_ and est.stationarity_.is_stationary
    assert est.coef_.shape == (100,)
    np.testing.assert_allclose(est.predict(X), X @ est.coef_)
    assert est.n_iter_ == est.report_.iterations
    assert np.linalg.norm(est.coef_ - truth.x_star) / np.linalg.norm(truth.x_star) < 0.1
    assert est.certify(X, y).holds


@pytest.mark.parametrize("algo", ["ijt", "lqcd"])
def test_other_algorithms(data, algo):
    X, y, _ = data
    est = LqRegression(algo=algo, tol=1e-10, max_iter=200_000).fit(X, y)
    assert est.report_.algo == algo
    assert est.stationarity_.is_stationary


def test_params_round_trip():
    est = LqRegression(reg=0.1, q=0.3)
    assert est.get_params()["q"] == 0.3
    assert clone(est).set_params(q=0.7).q == 0.7


@pytest.mark.parametrize(
    "kwargs,match",
    [
        ({"algo": "nope"}, "algo"),
        ({"stop_rule": "rmse"}, "stop_rule"),
        ({"step_frac": 1.0}, "step_frac"),
        ({"reg": 0.0}, "reg"),
        ({"q": 1.0}, "q"),
    ],
)
def test_invalid_params(data, kwargs, match):
    X, y, _ = data
    with pytest.raises(ValueError, match=match):
        LqRegression(**kwargs).fit(X, y)


def test_zero_column_rejected(data):
    X, y, _ = data
    X = X.copy()
    X[:, 3] = 0.0
    with pytest.raises(ValueError, match="zero column"):
        LqRegression().fit(X, y)


def test_cross_validation(data):
    X, y, _ = data
    scores = cross_val_score(LqRegression(max_iter=50_000), X, y, cv=3)
    assert scores.shape == (3,)
