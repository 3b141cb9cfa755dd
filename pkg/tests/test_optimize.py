"""Solver checks on analytic test functions with known optima."""

import numpy as np
import pytest

from tiltwing.optimize import (
    OptProblem,
    OptResult,
    constrained_solve,
    differential_evolution,
    local_search_powell,
    relative_accuracy,
    violation_from_margins,
)


def sphere(x):
    return float(np.sum(x ** 2))


def sphere_batch(points):
    return np.sum(points ** 2, axis=1)


def rosenbrock(x):
    return float(100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2)


class TestDifferentialEvolution:
    def test_sphere_3d(self):
        problem = OptProblem(bounds=[[-1, 1]] * 3,
                             batch_objective=sphere_batch,
                             budget=10_000, seed=3)
        res = differential_evolution(problem)
        assert res.n_evals <= 10_000
        assert np.all(np.abs(res.x) < 1e-6)

    def test_rosenbrock_2d(self):
        problem = OptProblem(bounds=[[-2, 2], [-1, 3]],
                             objective=rosenbrock,
                             budget=40_000, seed=7)
        res = differential_evolution(problem)
        assert res.fun < 1e-6

    def test_fixed_seed_identical_trace(self):
        problem = OptProblem(bounds=[[-1, 1]] * 4,
                             batch_objective=sphere_batch,
                             budget=3_000, seed=11)
        a = differential_evolution(problem)
        b = differential_evolution(problem)
        assert np.array_equal(a.x, b.x)
        assert a.history == b.history
        assert a.n_evals == b.n_evals

    def test_bigger_budget_extends_the_same_trace(self):
        kw = dict(bounds=[[-1, 1]] * 4, batch_objective=sphere_batch, seed=5)
        short = differential_evolution(OptProblem(budget=2_000, **kw))
        long = differential_evolution(OptProblem(budget=4_000, **kw))
        assert long.history[:len(short.history)] == short.history
        assert long.fun <= short.fun

    def test_x0_seeds_the_population(self):
        problem = OptProblem(bounds=[[-1, 1]] * 3,
                             batch_objective=sphere_batch,
                             budget=200, seed=0, x0=np.zeros(3))
        res = differential_evolution(problem)
        assert res.fun == 0.0

    def test_nan_objective_is_survivable(self):
        def holey(points):
            f = sphere_batch(points)
            return np.where(points[:, 0] > 0.5, np.nan, f)

        problem = OptProblem(bounds=[[-1, 1]] * 2, batch_objective=holey,
                             budget=5_000, seed=2)
        res = differential_evolution(problem)
        assert np.isfinite(res.fun)
        assert res.fun < 1e-6

    def test_feasibility_first_selection(self):
        # minimum of the objective sits outside the feasible half-plane
        def margins(points):
            return (points[:, :1] - 0.5)  # feasible: x0 >= 0.5

        problem = OptProblem(bounds=[[-1, 1]] * 2,
                             batch_objective=sphere_batch,
                             batch_constraints=margins,
                             budget=12_000, seed=4)
        res = differential_evolution(problem)
        assert res.x[0] >= 0.5 - 1e-12
        assert abs(res.x[0] - 0.5) < 1e-5
        assert abs(res.x[1]) < 1e-5

    def test_budget_validation(self):
        with pytest.raises(ValueError):
            OptProblem(bounds=[[0, 1]], objective=sphere, budget=0)
        with pytest.raises(ValueError):
            OptProblem(bounds=[[1, 0]], objective=sphere)
        with pytest.raises(ValueError):
            OptProblem(bounds=[[0, 1]])


class TestPowell:
    def test_quadratic_1d(self):
        problem = OptProblem(bounds=[[-10, 10]],
                             objective=lambda x: float((x[0] - 2.5) ** 2),
                             budget=2_000, seed=0)
        res = local_search_powell(problem)
        assert abs(res.x[0] - 2.5) < 1e-8

    def test_quadratic_4d_cross_terms(self):
        rng = np.random.default_rng(12)
        m = rng.normal(size=(4, 4))
        a = m @ m.T + 4.0 * np.eye(4)
        b = rng.normal(size=4)
        x_star = np.linalg.solve(a, b)
        assert np.all(np.abs(x_star) < 5.0)

        def quad(x):
            return float(0.5 * x @ a @ x - b @ x)

        problem = OptProblem(bounds=[[-5, 5]] * 4, objective=quad,
                             budget=20_000, seed=1)
        res = local_search_powell(problem, n_restarts=3)
        assert np.all(np.abs(res.x - x_star) < 1e-6)

    def test_exterior_optimum_clips_to_boundary(self):
        problem = OptProblem(bounds=[[0, 1]],
                             objective=lambda x: float((x[0] - 3.0) ** 2),
                             budget=1_000, seed=0)
        res = local_search_powell(problem)
        assert abs(res.x[0] - 1.0) < 1e-8


class TestConstrainedSolve:
    def test_active_constraint_quadratic(self):
        problem = OptProblem(bounds=[[-5, 5]],
                             objective=lambda x: float(x[0] ** 2),
                             constraints=lambda x: np.array([x[0] - 1.0]),
                             budget=40_000, seed=9)
        res = constrained_solve(problem, inner_tol=0.0)
        assert res.status == "feasible"
        assert abs(res.x[0] - 1.0) < 1e-4
        assert np.all(res.margins >= -1e-3)

    def test_linear_objective_vertex(self):
        def margins(points):
            return np.stack([points[:, 0] - 1.0, points[:, 1] - 2.0], axis=1)

        problem = OptProblem(bounds=[[-5, 5], [-5, 5]],
                             batch_objective=lambda p: p[:, 0] + p[:, 1],
                             batch_constraints=margins,
                             budget=60_000, seed=14)
        res = constrained_solve(problem, inner_tol=0.0)
        assert res.status == "feasible"
        assert np.all(np.abs(res.x - [1.0, 2.0]) < 1e-3)

    def test_infeasible_pair_is_flagged(self):
        problem = OptProblem(
            bounds=[[-5, 5]],
            objective=lambda x: float(x[0] ** 2),
            constraints=lambda x: np.array([x[0] - 1.0, -x[0]]),
            budget=8_000, seed=0)
        res = constrained_solve(problem)
        assert res.status == "infeasible"
        assert res.margins is not None and len(res.margins) == 2

    def test_margin_shift_returns_interior_point(self):
        problem = OptProblem(bounds=[[-5, 5]],
                             objective=lambda x: float(x[0] ** 2),
                             constraints=lambda x: np.array([x[0] - 1.0]),
                             budget=40_000, seed=9)
        res = constrained_solve(problem, margin_shift=0.01, inner_tol=0.0)
        assert res.status == "feasible"
        assert res.margins[0] >= 0.0  # strictly inside, not grazing

    def test_deterministic(self):
        problem = OptProblem(bounds=[[-5, 5]],
                             objective=lambda x: float(x[0] ** 2),
                             constraints=lambda x: np.array([x[0] - 1.0]),
                             budget=10_000, seed=21)
        a = constrained_solve(problem)
        b = constrained_solve(problem)
        assert np.array_equal(a.x, b.x)
        assert a.n_evals == b.n_evals


class TestHelpers:
    def test_violation_aggregation(self):
        m = np.array([[0.5, 0.0], [-0.25, 0.5], [np.nan, 0.0]])
        v = violation_from_margins(m)
        assert v[0] == 0.0
        assert v[1] == 0.25
        assert np.isinf(v[2])

    def test_relative_accuracy_formula(self):
        assert round(relative_accuracy(1793.29, 1883.84), 2) == 95.19
        assert relative_accuracy(100.0, 100.0) == 100.0

    def test_result_record_roundtrip(self):
        res = OptResult(x=np.array([0.5]), fun=1.0, n_evals=10,
                        wall_time_s=0.1, status="converged",
                        margins=np.array([0.2]))
        rec = res.to_record()
        assert rec["feasible"] is True
        assert rec["violation_pct"] == 0.0
