import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import gaussian_data
from ssvb.core_math import DomainError, SpikeSlabHyper, validate_dataset
from ssvb.experiments import TruthSpec, simulate
from ssvb.linear_vb import precision_diag
from ssvb.logistic_vb import (
    fit_logistic,
    iterate_logistic,
    linear_predictor_second_moment,
    pg_mean,
    update_beta_logistic,
    update_v,
)


def pg_mean_series(b, c, terms=200_000):
    """Mean of PG(b, c) from its infinite-convolution representation
    sum_k Gamma(b, 1) / (2 pi^2 ((k - 1/2)^2 + c^2 / (4 pi^2))), plus an integral tail."""
    a = c * c / (4 * math.pi**2)
    k = np.arange(1, terms + 1) - 0.5
    head = np.sum(1.0 / (k * k + a))
    tail = 1.0 / (terms + 0.0)  # integral of 1/x^2 beyond the last term's midpoint
    return b * (head + tail) / (2 * math.pi**2)


class TestPGMean:
    def test_zero_tilt_limit(self):
        assert pg_mean(1.0, 0.0) == 0.25

    def test_continuity(self):
        assert abs(pg_mean(1.0, 1e-8) - 0.25) <= 1e-9

    @given(st.floats(0, 50))
    def test_linear_in_shape(self, c):
        assert pg_mean(2.0, c) == pytest.approx(2 * pg_mean(1.0, c), rel=1e-15)

    def test_two(self):
        assert pg_mean(1.0, 2.0) == pytest.approx(math.tanh(1.0) / 4, rel=1e-15)
        assert pg_mean(1.0, 2.0) == pytest.approx(0.190399, abs=1e-6)

    @pytest.mark.parametrize("c", [0.0, 1e-5, 0.3, 2.0, 7.5, 40.0])
    def test_series_oracle(self, c):
        assert pg_mean(1.0, c) == pytest.approx(pg_mean_series(1.0, c), rel=1e-9)

    @given(st.floats(0, 60), st.floats(1e-3, 5))
    def test_decreasing(self, c, dc):
        assert pg_mean(1.0, c + dc) < pg_mean(1.0, c)

    @given(st.floats(0, 1e3))
    def test_range(self, c):
        assert 0 < pg_mean(1.0, c) <= 0.25

    @pytest.mark.parametrize("b", [0.0, -1.0])
    def test_bad_shape(self, b):
        with pytest.raises(DomainError):
            pg_mean(b, 1.0)

    def test_series_branch_agrees(self):
        for c in (9e-5, 1.1e-4):
            assert pg_mean(1.0, c) == pytest.approx(math.tanh(c / 2) / (2 * c), rel=1e-14)


class TestUpdates:
    def test_balanced_intercept(self):
        d = validate_dataset(np.ones((6, 1)), [0, 1, 0, 1, 1, 0], "binary")
        mu, _ = update_beta_logistic(d, np.full(6, 0.25), np.ones(1))
        assert mu[0] == 0.0

    def test_scalar(self):
        d = validate_dataset([[1.0]], [1.0], "binary")
        mu, S = update_beta_logistic(d, np.array([0.25]), np.array([1.0]))
        assert S[0, 0] == pytest.approx(0.8, rel=1e-15)
        assert mu[0] == pytest.approx(0.4, rel=1e-15)

    def test_normal_equations(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((30, 4))
        d = validate_dataset(X, (rng.random(30) < 0.5).astype(float), "binary")
        v = rng.uniform(0.05, 0.25, 30)
        D = np.array([1.0, 100.0, 0.01, 3.0])
        mu, _ = update_beta_logistic(d, v, D)
        M = X.T @ np.diag(v) @ X + np.diag(D)
        rhs = X.T @ (d.y - 0.5)
        assert np.max(np.abs(M @ mu - rhs)) / (1 + np.max(np.abs(rhs))) <= 1e-8

    def test_untilted(self):
        d = validate_dataset(np.random.default_rng(2).standard_normal((5, 2)), [0, 1, 1, 0, 1], "binary")
        c, v = update_v(d, np.zeros(2), np.zeros((2, 2)))
        np.testing.assert_array_equal(c, 0.0)
        np.testing.assert_array_equal(v, 0.25)

    def test_zero_row(self):
        X = np.array([[0.0, 0.0], [1.0, 2.0]])
        d = validate_dataset(X, [0, 1], "binary")
        c, v = update_v(d, np.array([0.3, -0.2]), np.eye(2))
        assert c[0] == 0.0 and v[0] == 0.25

    def test_second_moment_monte_carlo(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((8, 3))
        d = validate_dataset(X, (rng.random(8) < 0.5).astype(float), "binary")
        mu = np.array([0.5, -1.0, 0.2])
        G = rng.standard_normal((3, 3))
        S = 0.3 * G @ G.T + 0.05 * np.eye(3)
        m = linear_predictor_second_moment(d, mu, S)
        draws = rng.multivariate_normal(mu, S, size=10**6)
        sq = (draws @ X.T) ** 2
        est, se = sq.mean(axis=0), sq.std(axis=0, ddof=1) / math.sqrt(10**6)
        assert np.all(np.abs(m - est) <= 3 * se)

    def test_literal_tilt(self):
        d = validate_dataset(np.ones((2, 1)), [0, 1], "binary")
        c, _ = update_v(d, np.array([2.0]), np.array([[0.0]]), tilt="literal")
        np.testing.assert_array_equal(c, 4.0)
        c, _ = update_v(d, np.array([2.0]), np.array([[0.0]]))
        np.testing.assert_array_equal(c, 2.0)

    def test_more_curvature_shrinks_covariance(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((25, 4))
        d = validate_dataset(X, (rng.random(25) < 0.5).astype(float), "binary")
        D = np.ones(4)
        v = rng.uniform(0.05, 0.2, 25)
        _, S = update_beta_logistic(d, v, D)
        _, S2 = update_beta_logistic(d, v + rng.uniform(0, 0.05, 25), D)
        for _ in range(20):
            x = rng.standard_normal(4)
            assert x @ (S - S2) @ x >= 0


class TestFitLogistic:
    def test_balanced_intercept(self):
        d = validate_dataset(np.ones((10, 1)), [0, 1] * 5, "binary")
        r = fit_logistic(d)
        assert r.mu[0] == 0.0
        assert r.tau is None

    def test_single_signal(self):
        d, _ = simulate("logistic", TruthSpec((3.0, 0.0, 0.0)), 500, 5)
        r = fit_logistic(d)
        assert r.selected == (0,) and r.mu[0] > 0

    def test_label_flip(self):
        d, _ = simulate("logistic", TruthSpec((1.5, 0.0, -1.0)), 200, 6)
        a = fit_logistic(d)
        b = fit_logistic(validate_dataset(d.X, 1 - d.y, "binary"))
        np.testing.assert_array_equal(b.mu, -a.mu)
        np.testing.assert_array_equal(b.w, a.w)

    def test_state_invariants(self):
        d, _ = simulate("logistic", TruthSpec((1.0, 0.0)), 100, 7)
        for _, s in zip(range(30), iterate_logistic(d, SpikeSlabHyper())):
            assert np.all((s.v_mean > 0) & (s.v_mean <= 0.25))
            assert np.all(s.c >= 0)
            assert np.all((s.v_mean == 0.25) == (s.c == 0))

    def test_deterministic(self):
        d, _ = simulate("logistic", TruthSpec((1.0, 0.0)), 100, 8)
        assert fit_logistic(d).mu.tobytes() == fit_logistic(d).mu.tobytes()

    def test_rejects_continuous(self):
        with pytest.raises(DomainError):
            fit_logistic(gaussian_data(9, 10, 1))

    def test_precision_uses_shared_prior(self):
        d, _ = simulate("logistic", TruthSpec((1.0, 0.0)), 50, 10)
        h = SpikeSlabHyper()
        s = next(iterate_logistic(d, h))
        M = d.X.T @ d.X + np.diag(precision_diag(np.full(2, 0.5), h))
        np.testing.assert_allclose(np.linalg.inv(M), s.Sigma, rtol=1e-10)
