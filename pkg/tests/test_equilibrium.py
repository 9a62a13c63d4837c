import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cournot_c4.env import Environment, PowerCost, random_env
from cournot_c4.equilibrium import (
    SolverConfig,
    dsc_hessian,
    projected_residual,
    residual,
    solve_pne,
)
from cournot_c4.errors import ValidationError
from cournot_c4.game import creator_utilities, utility_gradient

from conftest import symmetric_env

TIGHT = SolverConfig(tol=1e-9, max_iter=200_000, polish=True)


def tullock_x(n, c):
    return (n - 1) / (c * n**2)


class TestClosedForm:
    @pytest.mark.parametrize("n,c", [(2, 0.25), (3, 0.5), (4, 0.3), (6, 0.1)])
    def test_symmetric_linear_cost(self, n, c):
        env = symmetric_env(n, 1, c=c, rho=1.0)
        res = solve_pne(env, 3.0, TIGHT)
        assert res.converged
        np.testing.assert_allclose(res.x_star, tullock_x(n, c), atol=1e-8)

    def test_symmetric_convex_cost(self):
        # m users each split evenly: m (n - 1) / (n^2 x) = rho c x^(rho - 1)
        n, m, c, rho = 3, 4, 0.2, 2.0
        res = solve_pne(symmetric_env(n, m, c=c, rho=rho), 1.0, TIGHT)
        np.testing.assert_allclose(res.x_star, (m * (n - 1) / (rho * c * n**2)) ** (1 / rho), atol=1e-8)


class TestSolver:
    def test_no_profitable_unilateral_deviation(self, small_env):
        beta = np.linspace(0, 6, small_env.m)
        x = solve_pne(small_env, beta, TIGHT).x_star
        u = creator_utilities(small_env, x, beta)
        for i in range(small_env.n):
            for f in (0.5, 0.9, 1.1, 2.0):
                y = x.copy()
                y[i] *= f
                assert creator_utilities(small_env, y, beta)[i] <= u[i] + 1e-12

    def test_converges_to_tolerance(self, small_env):
        res = solve_pne(small_env, 2.0, SolverConfig(tol=1e-6))
        assert res.converged and res.final_grad_norm < 1e-6
        assert projected_residual(small_env, 2.0, res.x_star) < 1e-6

    def test_warm_start_saves_iterations(self):
        env = random_env(30, 40, seed=5)
        cfg = SolverConfig(tol=1e-6)
        x1 = solve_pne(env, 5.0, cfg).x_star
        cold = solve_pne(env, 5.1, cfg)
        warm = solve_pne(env, 5.1, cfg, warm_start=x1)
        assert warm.iterations < cold.iterations
        np.testing.assert_allclose(warm.x_star, cold.x_star, atol=1e-4)

    def test_budget_exhaustion_reported(self, small_env):
        res = solve_pne(small_env, 1.0, SolverConfig(tol=1e-12, max_iter=3))
        assert not res.converged and res.iterations == 3

    def test_tiny_creators_pinned_at_floor(self):
        # a creator with a huge cost and nobody preferring it should shut down
        w = np.array([[1.0, 1.0], [0.0, 0.0]])
        env = Environment(w, [PowerCost(0.1, 1.0), PowerCost(50.0, 1.0)])
        res = solve_pne(env, 50.0, SolverConfig(tol=1e-8))
        assert res.converged
        assert res.x_star[1] == pytest.approx(1e-8)
        assert utility_gradient(env, res.x_star, 50.0)[1] < 0

    def test_large_beta_is_finite(self, small_env):
        res = solve_pne(small_env, 1e4, SolverConfig(tol=1e-6))
        assert np.all(np.isfinite(res.x_star)) and res.converged

    @pytest.mark.parametrize(
        "kwargs", [{"eta": 0.0}, {"tol": -1.0}, {"max_iter": 0}, {"x_min": 0.0}, {"x0": [1.0, 2.0]}]
    )
    def test_invalid_config(self, small_env, kwargs):
        with pytest.raises(ValidationError):
            solve_pne(small_env, 1.0, SolverConfig(**kwargs))

    def test_residual_is_foc_norm(self, small_env):
        x = np.ones(small_env.n)
        g = utility_gradient(small_env, x, 1.0)
        assert residual(small_env, 1.0, x) == pytest.approx(np.linalg.norm(g))

    def test_serialization(self, small_env):
        d = solve_pne(small_env, 1.0).to_dict()
        assert set(d) == {"x_star", "iterations", "final_grad_norm", "converged"}

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.0, 30.0))
    def test_restart_independence(self, seed, beta):
        env = random_env(8, 5, seed=seed)
        a = solve_pne(env, beta, SolverConfig(tol=1e-8, x0=0.2))
        b = solve_pne(env, beta, SolverConfig(tol=1e-8, x0=3.0))
        np.testing.assert_allclose(a.x_star, b.x_star, atol=1e-6)


class TestDSC:
    def test_matches_finite_difference_hessian(self, small_env):
        rng = np.random.default_rng(2)
        x = rng.uniform(0.3, 2, small_env.n)
        beta = rng.uniform(0, 4, small_env.m)
        h = 1e-6
        J = np.empty((small_env.n, small_env.n))
        for l in range(small_env.n):
            e = np.zeros(small_env.n)
            e[l] = h
            J[:, l] = (utility_gradient(small_env, x + e, beta) - utility_gradient(small_env, x - e, beta)) / (2 * h)
        H, _ = dsc_hessian(small_env, beta, x)
        np.testing.assert_allclose(H, -0.5 * (J + J.T), rtol=1e-5, atol=1e-7)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 16), st.integers(1, 6), st.integers(0, 10_000), st.floats(0.0, 50.0))
    def test_positive_definite(self, n, m, seed, beta):
        env = random_env(n, m, seed=seed)
        x = np.random.default_rng(seed).uniform(0.01, 5.0, n)
        assert dsc_hessian(env, beta, x)[1] > 0

    def test_size_cap(self):
        with pytest.raises(ValidationError):
            dsc_hessian(random_env(70, 2), 1.0, np.ones(70))
