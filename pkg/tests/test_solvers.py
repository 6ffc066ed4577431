import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lqccd import (
    GroundTruth,
    InadmissibleStepError,
    Problem,
    SolverOptions,
    StopReason,
    ccd_solve,
    ccd_step,
    coordinate_index,
    generate_instance,
    ijt_solve,
    ijt_step,
    init_state,
    lq_cd_reference,
    make_prox_params,
    objective,
    property_diagnostics,
)
from lqccd.io import save_report
from oracles import bisect_root


def one_by_one(reg=1.0):
    return Problem(np.array([[1.0]]), np.array([2.0]), reg, 0.5)


class TestObjective:
    def test_zero_iterate(self, small_instance):
        problem, _ = small_instance
        assert objective(problem, np.zeros(100)) == pytest.approx(0.5 * problem.y @ problem.y)

    def test_no_penalty(self):
        p = Problem(np.eye(2), np.array([1.0, 2.0]), 0.0, 0.5)
        assert objective(p, np.array([0.0, 0.0])) == 2.5

    def test_hand_value(self):
        p = Problem(np.eye(2), np.array([1.0, 0.0]), 1.0, 0.5)
        assert objective(p, np.array([1.0, 0.0])) == 1.0


class TestCoordinateIndex:
    @pytest.mark.parametrize("n,expected", [(0, 1), (3, 4), (4, 1), (5, 2)])
    def test_examples(self, n, expected):
        assert coordinate_index(n, 4) == expected

    @given(st.integers(0, 10**6), st.integers(1, 500))
    def test_cyclic(self, n, N):
        i = coordinate_index(n, N)
        assert 1 <= i <= N
        assert i == n % N + 1

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            coordinate_index(0, 0)


class TestCcdStep:
    def test_fixed_point_at_zero_residual(self):
        A = np.eye(3)
        p = Problem(A, np.zeros(3), 0.1, 0.5)
        state = init_state(p)
        ccd_step(state, p, make_prox_params(0.1, 0.5, 0.5), 1)
        assert np.array_equal(state.x, np.zeros(3))
        assert state.last_step_sq == 0.0 and state.iter == 1

    def test_one_by_one(self):
        p = one_by_one()
        params = make_prox_params(1.0, 0.5, 0.5)
        assert params.tau == pytest.approx(1.5 * 0.5 ** (2.0 / 3.0))
        assert params.tau < 1.0
        state = init_state(p)
        ccd_step(state, p, params, 0)
        expected = bisect_root(1.0, 0.5, 0.5)
        assert expected + 0.25 * expected**-0.5 == pytest.approx(1.0)
        assert state.x[0] == pytest.approx(expected, abs=1e-12)
        assert state.residual[0] == pytest.approx(state.x[0] - 2.0, abs=1e-15)
        assert state.objective == pytest.approx(objective(p, state.x), abs=1e-14)

    def test_single_coordinate_identity(self, small_instance):
        problem, _ = small_instance
        params = make_prox_params(0.009, 0.9, 0.5)
        state = init_state(problem)
        for i in range(10):
            before = state.x.copy()
            ccd_step(state, problem, params, i)
            diff = before - state.x
            assert np.count_nonzero(diff[np.arange(100) != i]) == 0
            lhs = float(np.sum((problem.A @ diff) ** 2))
            assert lhs == pytest.approx(state.col_sq_norms[i] * diff[i] ** 2, rel=1e-12, abs=1e-300)
            assert state.last_step_sq == diff[i] ** 2


class TestCcdSolve:
    def test_zero_data(self):
        p = Problem(np.random.default_rng(0).standard_normal((5, 4)), np.zeros(5), 0.1, 0.5)
        l_max = float(np.max(np.sum(p.A**2, axis=0)))
        report = ccd_solve(p, SolverOptions(step=0.5 / l_max))
        assert report.stop_reason is StopReason.TOLERANCE
        assert report.cycles == 1 and report.iterations == 4
        assert np.array_equal(report.x_final, np.zeros(4))

    @pytest.mark.parametrize("frac", [1.0, 1.5, 1.0 - 1e-10])
    def test_inadmissible_step(self, small_instance, frac):
        problem, _ = small_instance
        with pytest.raises(InadmissibleStepError, match="1/L_max"):
            ccd_solve(problem, SolverOptions(step=frac))

    def test_unsafe_step_allowed_when_asked(self, small_instance):
        problem, _ = small_instance
        report = ccd_solve(problem, SolverOptions(step=1.0, allow_unsafe_step=True, max_iter=1000))
        assert report.within_theory is False

    def test_rmse_rule_needs_truth(self, small_instance):
        problem, _ = small_instance
        with pytest.raises(ValueError, match="ground truth"):
            ccd_solve(problem, SolverOptions(step=0.5, stop_rule="rmse"))

    def test_invalid_options(self):
        with pytest.raises(ValueError, match="stop_rule"):
            SolverOptions(step=0.5, stop_rule="never")
        with pytest.raises(ValueError, match="tol"):
            SolverOptions(step=0.5, tol=0.0)
        with pytest.raises(ValueError, match="max_iter"):
            SolverOptions(step=0.5, max_iter=0)

    def test_converged_report(self, small_instance):
        problem, truth = small_instance
        report = ccd_solve(problem, SolverOptions(step=0.9, tol=1e-10), truth)
        assert report.stop_reason is StopReason.TOLERANCE
        assert report.iterations == 100 * report.cycles
        nz = np.abs(report.x_final[report.x_final != 0])
        assert np.all(nz >= report.eta - 1e-9)
        assert np.array_equal(report.support, np.flatnonzero(report.x_final))
        assert np.array_equal(report.sign_pattern, np.sign(report.x_final))
        assert report.objective_final == pytest.approx(objective(problem, report.x_final), rel=1e-14)
        assert report.rmse == pytest.approx(truth.rmse(report.x_final))
        assert report.wall_time > 0 and report.within_theory
        assert report.stable_since_cycle is not None and report.stable_since_cycle < report.cycles

    def test_max_iter_counts_updates(self, small_instance):
        problem, _ = small_instance
        report = ccd_solve(problem, SolverOptions(step=0.9, tol=1e-300, max_iter=250))
        assert report.stop_reason is StopReason.MAX_ITER
        assert report.iterations == 250 and report.cycles == 2

    def test_objective_rule(self, small_instance):
        problem, _ = small_instance
        report = ccd_solve(problem, SolverOptions(step=0.9, stop_rule="objective", tol=1e-12))
        assert report.stop_reason is StopReason.TOLERANCE

    def test_rmse_rule(self, small_instance):
        problem, truth = small_instance
        report = ccd_solve(problem, SolverOptions(step=0.9, stop_rule="rmse", tol=0.5), truth)
        assert report.stop_reason is StopReason.TOLERANCE and report.rmse <= 0.5

    def test_stagnation_opt_in(self):
        # zero is stationary here and far from the truth, so nothing ever moves
        p = Problem(np.eye(2), np.array([1e-3, 0.0]), 1.0, 0.5)
        truth = GroundTruth(np.array([1.0, 0.0]), np.array([0]), 30.0)
        stuck = SolverOptions(step=0.5, stop_rule="rmse", tol=1e-6, max_iter=20)
        assert ccd_solve(p, stuck, truth).stop_reason is StopReason.MAX_ITER
        stuck.stop_on_stagnation = True
        report = ccd_solve(p, stuck, truth)
        assert report.stop_reason is StopReason.STAGNATION and report.cycles == 1

    def test_residual_stays_consistent(self, small_instance):
        problem, _ = small_instance
        params = make_prox_params(0.009, 0.9, 0.5)
        state = init_state(problem)
        # 200 cycles with no refresh
        for n in range(20_000):
            ccd_step(state, problem, params, coordinate_index(n, 100) - 1)
        drift = np.linalg.norm(state.residual - (problem.A @ state.x - problem.y))
        assert drift <= 1e-8 * (1.0 + np.linalg.norm(problem.y))

    def test_x0(self, small_instance):
        problem, _ = small_instance
        first = ccd_solve(problem, SolverOptions(step=0.9, tol=1e-12))
        warm = ccd_solve(problem, SolverOptions(step=0.9, tol=1e-12, x0=first.x_final))
        assert warm.cycles <= 2
        np.testing.assert_allclose(warm.x_final, first.x_final, atol=1e-9)
        with pytest.raises(ValueError, match="x0"):
            ccd_solve(problem, SolverOptions(step=0.9, x0=np.zeros(3)))

    def test_deterministic(self, small_instance):
        problem, _ = small_instance
        opts = SolverOptions(step=0.7, tol=1e-10, record_history=True)
        a, b = ccd_solve(problem, opts), ccd_solve(problem, opts)
        assert np.array_equal(a.x_final, b.x_final)
        assert a.history.values == b.history.values

    def test_history(self, small_instance):
        problem, _ = small_instance
        report = ccd_solve(problem, SolverOptions(step=0.6, tol=1e-10, record_history=True))
        h = report.history
        assert len(h.coords) == len(h.values) == len(h.objectives) == report.iterations
        assert len(h.cycle_x) == report.cycles + 1
        assert np.all(np.diff(h.objectives) <= 1e-12)
        assert min(h.decrease_slack) >= -1e-9
        assert max(abs(r) for r in h.coord_residual) <= 1e-8 / 0.6

    @pytest.mark.parametrize("frac", [0.3, 0.6, 0.9])
    def test_descent_properties(self, small_instance, frac):
        problem, _ = small_instance
        report = ccd_solve(problem, SolverOptions(step=frac, tol=1e-10, record_history=True))
        diag = property_diagnostics(report.history, problem, make_prox_params(0.009, frac, 0.5))
        assert diag.decrease_violation <= 0.0
        assert diag.coord_residual_max <= 1e-8 / frac
        assert diag.magnitude_gap_violation <= 0.0
        assert diag.regularity_violation <= 0.0
        assert diag.boundedness_violation <= 0.0

    def test_non_finite_initial_objective(self):
        p = Problem(np.eye(2), np.ones(2), 1.0, 0.5)
        with np.errstate(over="ignore"), pytest.raises(FloatingPointError):
            ccd_solve(p, SolverOptions(step=0.5, x0=np.array([1e200, 0.0])))

    def test_report_serializes(self, small_instance, tmp_path):
        problem, _ = small_instance
        save_report(tmp_path / "r.json", ccd_solve(problem, SolverOptions(step=0.9)))


class TestIjt:
    def test_one_by_one_matches_ccd(self):
        p = one_by_one()
        params = make_prox_params(1.0, 0.5, 0.5)
        state = init_state(p)
        ccd_step(state, p, params, 0)
        assert ijt_step(np.zeros(1), p, params)[0] == state.x[0]

    def test_zero_below_threshold(self, small_instance):
        problem, _ = small_instance
        reg = 1.0
        p = problem.with_params(reg, 0.5)
        params = make_prox_params(reg, 0.5, 0.5)
        assert np.max(np.abs(problem.A.T @ problem.y)) < params.tau / params.step
        assert np.array_equal(ijt_step(np.zeros(100), p, params), np.zeros(100))

    def test_fixed_point(self, small_instance):
        problem, _ = small_instance
        report = ijt_solve(problem, SolverOptions(step=0.1, tol=1e-13, max_iter=100_000))
        params = make_prox_params(0.009, report.step, 0.5)
        again = ijt_step(report.x_final, problem, params)
        np.testing.assert_allclose(again, report.x_final, atol=1e-10)

    def test_guard_uses_spectral_norm(self, small_instance):
        problem, _ = small_instance
        spec = np.linalg.norm(problem.A, 2) ** 2
        with pytest.raises(InadmissibleStepError, match=r"1/\|\|A\|\|_2\^2"):
            ijt_solve(problem, SolverOptions(step=1.01 / spec))
        report = ijt_solve(problem, SolverOptions(step=0.9 / spec, max_iter=5))
        assert report.iterations == 5 and report.cycles == 5

    def test_ccd_point_is_ijt_fixed_point(self, small_instance):
        problem, _ = small_instance
        report = ccd_solve(problem, SolverOptions(step=0.9, tol=1e-12, max_iter=10**6))
        params = make_prox_params(0.009, 0.9, 0.5)
        moved = ijt_step(report.x_final, problem, params)
        assert np.max(np.abs(moved - report.x_final)) <= 1e-6


class TestLqCdReference:
    def test_one_by_one(self):
        report = lq_cd_reference(one_by_one(), SolverOptions(step=0.3, max_iter=1))
        assert report.x_final[0] == pytest.approx(1.6053779404795958, abs=1e-12)
        assert report.step == 1.0 and report.algo == "lqcd"
        assert report.within_theory is False

    def test_rejects_raw_columns(self):
        problem, _ = generate_instance(20, 30, 3, normalize_columns=False, seed=0)
        with pytest.raises(ValueError, match="unit-norm"):
            lq_cd_reference(problem.with_params(0.009, 0.5), SolverOptions(step=1.0))

    def test_same_support_as_near_unit_step(self):
        problem, truth = generate_instance(200, 400, 20, 30.0, True, seed=0)
        problem = problem.with_params(0.009, 0.5)
        a = lq_cd_reference(problem, SolverOptions(step=1.0, tol=1e-10, max_iter=10**6), truth)
        b = ccd_solve(problem, SolverOptions(step=0.999, tol=1e-10, max_iter=10**6), truth)
        assert np.array_equal(a.support, b.support)


@pytest.mark.parametrize(
    "q,mu",
    [(0.1, 0.1)],
)
def test_paper_protocol_abnormal_point(q, mu):
    problem, truth = generate_instance(200, 400, 20, 30.0, True, seed=0)
    report = ccd_solve(
        problem.with_params(0.009, q),
        SolverOptions(step=mu, stop_rule="rmse", tol=1e-2, max_iter=160_000),
        truth,
    )
    assert report.stop_reason is StopReason.MAX_ITER
    assert report.iterations == 160_000 and report.cycles == 400
    assert report.rmse > 1e-2 and math.isfinite(report.rmse)
