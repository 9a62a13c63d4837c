import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cournot_c4 import implicit_grad
from cournot_c4.checks import resolve_fd
from cournot_c4.env import random_env
from cournot_c4.equilibrium import SolverConfig, solve_pne
from cournot_c4.errors import NumericalError, ValidationError
from cournot_c4.game import welfare
from cournot_c4.implicit_grad import (
    SketchSpec,
    compress_sketch,
    jacobian_exact,
    pne_partials,
    sketch_matrices,
    smw_apply,
    welfare_gradient,
)

from conftest import symmetric_env

TIGHT = SolverConfig(tol=1e-9, max_iter=200_000, polish=True)


@pytest.fixture
def solved():
    env = random_env(7, 5, seed=11)
    beta = np.random.default_rng(11).uniform(0.5, 5, env.m)
    return env, beta, solve_pne(env, beta, TIGHT).x_star


class TestPartials:
    def test_rejects_non_equilibrium(self, small_env):
        with pytest.raises(ValidationError, match="equilibrium"):
            pne_partials(small_env, np.full(small_env.n, 5.0), 1.0)

    def test_system_matches_foc_jacobian(self, solved):
        env, beta, x = solved
        p = pne_partials(env, x, beta, tol=1e-6)
        h = 1e-6
        from cournot_c4.game import utility_gradient

        J = np.empty((env.n, env.n))
        for l in range(env.n):
            e = np.zeros(env.n)
            e[l] = h
            J[:, l] = (utility_gradient(env, x + e, beta) - utility_gradient(env, x - e, beta)) / (2 * h)
        np.testing.assert_allclose(np.diag(p.D) + p.Y @ p.Z.T, -J, rtol=1e-5, atol=1e-7)


    def test_centered_terms_match_raw_formulas(self, solved):
        env, beta, x = solved
        p = pne_partials(env, x, beta, tol=1e-6)
        w = env.relevance
        T = (w * p.P).sum(axis=0)
        np.testing.assert_allclose(p.T, T, rtol=1e-13)
        np.testing.assert_allclose(p.B, p.Y * (w - T), rtol=1e-10, atol=1e-14)
        np.testing.assert_allclose(implicit_grad.du_dbeta(p), (w * w * p.P).sum(axis=0) - T**2, atol=1e-13)
        np.testing.assert_allclose(implicit_grad.du_dx(p), (p.Z * (w - T)).sum(axis=1), atol=1e-12)


class TestJacobian:
    def test_against_resolve_differences(self, solved):
        env, beta, x = solved
        J = jacobian_exact(pne_partials(env, x, beta, tol=1e-6))
        fd = resolve_fd(env, beta, x, lambda xs, b: xs, solver=TIGHT)
        mask = np.abs(fd) > 1e-8
        assert np.max(np.abs(J - fd)[mask] / np.abs(fd)[mask]) < 1e-4

    def test_ill_conditioned_raises(self, solved):
        env, beta, x = solved
        p = pne_partials(env, x, beta, tol=1e-6)
        bad = implicit_grad.PnePartials(np.full(env.n, 1e-30), 0 * p.Y, p.Z, p.B, p.x, p.P, p.T, p.dev)
        bad.D[0] = 1.0
        with pytest.raises(NumericalError):
            jacobian_exact(bad)


class TestSMW:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 12), st.integers(1, 8), st.integers(0, 10_000))
    def test_matches_dense_inverse(self, n, r, seed):
        rng = np.random.default_rng(seed)
        D = rng.uniform(0.5, 3, n)
        Y = rng.standard_normal((n, r)) * 0.3
        Z = rng.standard_normal((n, r)) * 0.3
        A = np.diag(D) + Y @ Z.T
        if np.linalg.cond(A) > 1e8:
            return
        rhs = rng.standard_normal(n)
        np.testing.assert_allclose(smw_apply(D, Y, Z, rhs), np.linalg.solve(A, rhs), rtol=1e-7, atol=1e-9)

    def test_matrix_rhs(self):
        rng = np.random.default_rng(0)
        D, Y, Z = rng.uniform(1, 2, 5), rng.standard_normal((5, 2)), rng.standard_normal((5, 2))
        rhs = rng.standard_normal((5, 3))
        np.testing.assert_allclose(smw_apply(D, Y, Z, rhs), np.linalg.solve(np.diag(D) + Y @ Z.T, rhs))

    def test_nonpositive_diagonal_rejected(self):
        with pytest.raises(NumericalError):
            smw_apply(np.array([1.0, 0.0]), np.ones((2, 1)), np.ones((2, 1)), np.ones(2))


class TestSketch:
    def test_identity_at_full_rate(self, solved):
        env, beta, x = solved
        p = pne_partials(env, x, beta, tol=1e-6)
        Ys, Zs, col_map = sketch_matrices(p, SketchSpec(1.0))
        np.testing.assert_array_equal(col_map, np.arange(env.m))
        np.testing.assert_array_equal(Ys, p.Y)

    def test_columns_come_from_sample(self):
        env = random_env(5, 40, seed=1)
        x = solve_pne(env, 2.0, TIGHT).x_star
        p = pne_partials(env, x, 2.0, tol=1e-6)
        Ys, Zs, col_map = sketch_matrices(p, SketchSpec(0.1, seed=3))
        assert len(np.unique(col_map)) <= 4 and col_map.shape == (40,)
        np.testing.assert_array_equal(Ys, p.Y[:, col_map])
        Yc, Zc = compress_sketch(p.Y, p.Z, col_map)
        np.testing.assert_allclose(Yc @ Zc.T, Ys @ Zs.T, rtol=1e-12)

    def test_seeded(self):
        env = random_env(5, 40, seed=1)
        x = solve_pne(env, 2.0, TIGHT).x_star
        p = pne_partials(env, x, 2.0, tol=1e-6)
        a = sketch_matrices(p, SketchSpec(0.2, seed=9))[2]
        b = sketch_matrices(p, SketchSpec(0.2, seed=9))[2]
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("delta", [0.0, -0.1, 1.5])
    def test_invalid_rate(self, delta):
        with pytest.raises(ValidationError):
            SketchSpec(delta).validate()

    def test_sample_size_rounds_up(self):
        assert SketchSpec(0.1).sample_size(1000) == 100
        assert SketchSpec(0.1).sample_size(15) == 2


class TestWelfareGradient:
    def test_against_resolve_differences(self, solved):
        env, beta, x = solved
        g = welfare_gradient(env, x, beta, 0.5, tol=1e-6)
        fd = resolve_fd(env, beta, x, lambda xs, b: welfare(env, xs, b, 0.5).W, solver=TIGHT)
        np.testing.assert_allclose(g, fd, rtol=1e-4, atol=1e-8)

    def test_smw_equals_dense(self, solved):
        env, beta, x = solved
        for lam in (0.0, 0.5, 2.0):
            a = welfare_gradient(env, x, beta, lam, tol=1e-6)
            b = welfare_gradient(env, x, beta, lam, method="dense", tol=1e-6)
            np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)

    def test_sketch_diagonal_exact_at_full_rate(self, solved):
        env, beta, x = solved
        a = welfare_gradient(env, x, beta, 0.5, SketchSpec(1.0, sketch_diagonal=True), tol=1e-6)
        b = welfare_gradient(env, x, beta, 0.5, method="dense", tol=1e-6)
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)

    def test_sketched_gradient_is_finite(self):
        env = random_env(20, 60, seed=4)
        x = solve_pne(env, 5.0, TIGHT).x_star
        for diag in (False, True):
            g = welfare_gradient(env, x, 5.0, 0.5, SketchSpec(0.1, 1, diag), tol=1e-6)
            assert g.shape == (60,) and np.all(np.isfinite(g))

    def test_symmetric_environment_has_zero_gradient(self):
        env = symmetric_env(4, 3)
        x = solve_pne(env, 2.0, TIGHT).x_star
        assert np.all(welfare_gradient(env, x, 2.0, 0.5, tol=1e-6) == 0.0)

    def test_unknown_method(self, solved):
        env, beta, x = solved
        with pytest.raises(ValidationError):
            welfare_gradient(env, x, beta, method="lu", tol=1e-6)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 10), st.integers(1, 8), st.integers(0, 10_000), st.floats(0.0, 100.0))
    def test_direct_term_nonnegative(self, n, m, seed, scale):
        env = random_env(n, m, seed=seed)
        rng = np.random.default_rng(seed)
        beta = scale * rng.uniform(size=m)
        x = solve_pne(env, beta, SolverConfig(tol=1e-6)).x_star
        p = pne_partials(env, x, beta, tol=1e-5)
        assert np.all(implicit_grad.du_dbeta(p) >= -1e-12)
