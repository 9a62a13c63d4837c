import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cournot_c4.env import random_env
from cournot_c4.errors import ValidationError
from cournot_c4.game import (
    BetaPolicy,
    as_beta,
    creator_utilities,
    match_kernel,
    match_probabilities,
    ratios,
    utility_gradient,
    welfare,
)

from conftest import symmetric_env


def naive_probabilities(env, x, beta):
    e = x[:, None] * np.exp(np.asarray(beta)[None, :] * env.relevance)
    return e / e.sum(axis=0, keepdims=True)


class TestBetaPolicy:
    def test_homogeneous_constructor(self):
        p = BetaPolicy.homogeneous(2.5, 4)
        assert p.mode == "homogeneous" and np.all(p.beta == 2.5)

    @pytest.mark.parametrize("beta", [[-1.0], [np.nan], [np.inf], []])
    def test_rejects_invalid(self, beta):
        with pytest.raises(ValidationError):
            BetaPolicy(np.array(beta, dtype=float))

    def test_homogeneous_requires_equal_entries(self):
        with pytest.raises(ValidationError):
            BetaPolicy(np.array([1.0, 2.0]), "homogeneous")

    def test_as_beta_broadcasts_and_checks_length(self):
        np.testing.assert_array_equal(as_beta(3.0, 4), np.full(4, 3.0))
        with pytest.raises(ValidationError):
            as_beta(np.ones(3), 4)


class TestMatchProbabilities:
    def test_against_naive_formula(self, small_env):
        rng = np.random.default_rng(0)
        x = rng.uniform(0.1, 2, small_env.n)
        beta = rng.uniform(0, 5, small_env.m)
        np.testing.assert_allclose(
            match_probabilities(small_env, x, beta), naive_probabilities(small_env, x, beta), rtol=1e-12
        )

    def test_beta_zero_is_production_share(self, small_env):
        x = np.arange(1.0, small_env.n + 1)
        P = match_probabilities(small_env, x, 0.0)
        np.testing.assert_allclose(P, np.repeat((x / x.sum())[:, None], small_env.m, axis=1))

    def test_huge_beta_stays_finite(self, small_env):
        P = match_probabilities(small_env, np.ones(small_env.n), 1e4)
        assert np.all(np.isfinite(P))
        np.testing.assert_allclose(P.sum(axis=0), 1.0)

    def test_kernel_ratios_agree(self, small_env):
        x = np.linspace(0.3, 1.2, small_env.n)
        beta = np.linspace(0, 20, small_env.m)
        R, P = ratios(match_kernel(small_env, beta), x)
        np.testing.assert_allclose(P, match_probabilities(small_env, x, beta), rtol=1e-12)
        np.testing.assert_allclose(R, P / x[:, None], rtol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(
        st.integers(1, 6), st.integers(1, 5), st.integers(0, 10_000),
        st.floats(0.0, 2000.0), st.floats(1e-6, 1e3),
    )
    def test_columns_are_distributions(self, n, m, seed, beta_scale, x_scale):
        env = random_env(n, m, seed=seed)
        rng = np.random.default_rng(seed)
        x = x_scale * rng.uniform(1e-3, 1.0, n)
        P = match_probabilities(env, x, beta_scale * rng.uniform(size=m))
        assert np.all(P >= 0) and np.all(P <= 1)
        np.testing.assert_allclose(P.sum(axis=0), 1.0, atol=1e-12)

    def test_rejects_nonpositive_strategy(self, small_env):
        x = np.ones(small_env.n)
        x[0] = 0.0
        with pytest.raises(ValidationError):
            match_probabilities(small_env, x, 1.0)


class TestUtilities:
    def test_gradient_matches_finite_differences(self, small_env):
        rng = np.random.default_rng(1)
        x = rng.uniform(0.2, 2, small_env.n)
        beta = rng.uniform(0, 5, small_env.m)
        h = 1e-6
        fd = np.empty(small_env.n)
        for i in range(small_env.n):
            e = np.zeros(small_env.n)
            e[i] = h
            fd[i] = (creator_utilities(small_env, x + e, beta)[i] - creator_utilities(small_env, x - e, beta)[i]) / (2 * h)
        np.testing.assert_allclose(utility_gradient(small_env, x, beta), fd, rtol=1e-6, atol=1e-9)

    def test_symmetric_utilities_equal(self):
        env = symmetric_env(3, 2)
        u = creator_utilities(env, np.ones(3), 4.0)
        np.testing.assert_allclose(u, u[0])


class TestWelfare:
    def test_aggregates(self, small_env):
        x = np.linspace(0.5, 1.5, small_env.n)
        rep = welfare(small_env, x, 2.0, lam=0.7)
        P = match_probabilities(small_env, x, 2.0)
        np.testing.assert_allclose(rep.pi, (small_env.relevance * P).sum(axis=0))
        assert rep.U == pytest.approx(rep.pi.sum())
        assert rep.V == pytest.approx(x.sum())
        assert rep.W == pytest.approx(rep.U + 0.7 * rep.V)

    def test_to_dict_keys(self, small_env):
        d = welfare(small_env, np.ones(small_env.n), 1.0).to_dict()
        assert set(d) == {"U", "V", "lambda", "W", "pi", "x"}

    def test_negative_lambda_rejected(self, small_env):
        with pytest.raises(ValidationError):
            welfare(small_env, np.ones(small_env.n), 1.0, lam=-0.1)
