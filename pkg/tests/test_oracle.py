import math

import numpy as np
import pytest
from scipy import integrate

from conftest import gaussian_data
from ssvb.collapsed_vb import B_jk
from ssvb.core_math import SpikeSlabHyper, validate_dataset
from ssvb.oracle import (
    AccuracyError,
    BudgetError,
    QuadratureOptions,
    all_models,
    enumerate_posterior,
    log_marginal_collapsed,
    log_marginal_model2,
    log_marginal_model2_trapezoid,
)


class TestCollapsedMarginal:
    def test_intercept_closed_form(self):
        rng = np.random.default_rng(1)
        n = 9
        y = 1.3 + rng.standard_normal(n)
        d = validate_dataset(np.ones((n, 1)), y)
        h = SpikeSlabHyper(v0=0.05, v1=20, rho=0.4)
        sy, syy = float(np.sum(y)), float(np.sum(y * y))
        for g, c, prior in ((0, h.v0, 1 - h.rho), (1, h.v1, h.rho)):
            m = n + 1 / c
            hand = (math.log(prior) - 0.5 * math.log(c) - 0.5 * math.log(m)
                    - (h.A + n / 2) * math.log(h.B + 0.5 * syy - 0.5 * sy * sy / m))
            assert log_marginal_collapsed(d, h, [g]) == pytest.approx(hand, rel=1e-13)

    def test_pure(self):
        d = gaussian_data(2, 20, 3, beta=[1, 0, 0])
        h = SpikeSlabHyper()
        assert log_marginal_collapsed(d, h, [1, 0, 1]) == log_marginal_collapsed(d, h, [1, 0, 1])

    def test_equal_variances_equal_weights(self):
        d = gaussian_data(3, 20, 3, beta=[1, 0, 0])
        post = enumerate_posterior(d, SpikeSlabHyper(v0=1.0, v1=1.0 + 1e-12), "collapsed")
        np.testing.assert_allclose(post.probs, 1 / 8, rtol=1e-9)

    def test_bayes_factor_from_Bjk_pieces(self):
        d = gaussian_data(4, 30, 1, beta=[0.4])
        h = SpikeSlabHyper(v0=0.02, v1=30, rho=0.35)
        lhs = log_marginal_collapsed(d, h, [1]) - log_marginal_collapsed(d, h, [0])
        s = d.XtX[0, 0]
        rhs = (h.lam - 0.5 * math.log(h.v1 / h.v0) - 0.5 * math.log((s + 1 / h.v1) / (s + 1 / h.v0))
               - B_jk(d, h, [0.5], 0, 1) + B_jk(d, h, [0.5], 0, 0))
        assert lhs == pytest.approx(rhs, abs=1e-9)

    def test_bad_gamma(self):
        d = gaussian_data(5, 10, 2)
        with pytest.raises(ValueError):
            log_marginal_collapsed(d, SpikeSlabHyper(), [1, 2])
        with pytest.raises(ValueError):
            log_marginal_collapsed(d, SpikeSlabHyper(), [1])


class TestModel2Marginal:
    def test_no_information_design(self):
        d = validate_dataset(np.zeros((6, 3)), np.random.default_rng(6).standard_normal(6))
        post = enumerate_posterior(d, SpikeSlabHyper(), "model2")
        np.testing.assert_allclose(post.probs, 1 / 8, rtol=1e-9)

    def test_trapezoid_reference(self):
        d = gaussian_data(7, 3, 1, beta=[1.0])
        h = SpikeSlabHyper()
        for g in ([0], [1]):
            assert log_marginal_model2(d, h, g) == pytest.approx(
                log_marginal_model2_trapezoid(d, h, g), abs=1e-6)

    def test_double_integral_reference(self):
        # integrate beta and sigma^2 numerically, no analytic marginalization
        d = gaussian_data(8, 2, 1, beta=[0.5])
        h = SpikeSlabHyper(v0=0.3, v1=4.0)
        x, y = d.X[:, 0], d.y

        log_ig = h.A * math.log(h.B) - math.lgamma(h.A)

        def integrand(beta, u, c):
            s = math.exp(u)
            r = y - x * beta
            log_lik = -0.5 * len(y) * math.log(2 * math.pi * s) - 0.5 * float(r @ r) / s
            log_prior = -0.5 * math.log(2 * math.pi * c) - 0.5 * beta * beta / c
            log_ig_s = log_ig - (h.A + 1) * u - h.B / s
            return math.exp(log_lik + log_prior + log_ig_s + u)

        for g, c in ((0, h.v0), (1, h.v1)):
            val, _ = integrate.dblquad(integrand, -12, 12, -12, 12, args=(c,), epsabs=0, epsrel=1e-10)
            ref = math.log(val) + math.log(0.5)
            assert log_marginal_model2(d, h, [g]) == pytest.approx(ref, abs=1e-6)

    def test_forms_agree(self):
        d = gaussian_data(9, 12, 4, beta=[1, 0, -1, 0])
        h = SpikeSlabHyper()
        for g in all_models(4):
            a = log_marginal_model2(d, h, g, QuadratureOptions(form="dense"))
            b = log_marginal_model2(d, h, g, QuadratureOptions(form="woodbury"))
            assert a == pytest.approx(b, abs=1e-8)

    def test_noise_dominated_limit(self):
        d = gaussian_data(10, 20, 2, beta=[2, 0])
        h = SpikeSlabHyper(A=0.5, B=1e12, rho=0.3)
        post = enumerate_posterior(d, h, "model2")
        np.testing.assert_allclose(post.inclusion, 0.3, atol=1e-3)

    def test_equal_variances_give_prior(self):
        d = gaussian_data(11, 15, 3, beta=[2, 0, 1])
        post = enumerate_posterior(d, SpikeSlabHyper(v0=1.0, v1=1.0 + 1e-10, rho=0.3), "model2")
        np.testing.assert_allclose(post.inclusion, 0.3, atol=1e-6)

    def test_accuracy_error(self):
        d = gaussian_data(12, 10, 1, beta=[1.0])
        with pytest.raises(AccuracyError) as exc:
            log_marginal_model2(d, SpikeSlabHyper(), [1], QuadratureOptions(target=1e-30, epsrel=2e-14))
        assert exc.value.achieved > exc.value.target


class TestEnumeration:
    def test_model_order(self):
        np.testing.assert_array_equal(all_models(2), [[0, 0], [1, 0], [0, 1], [1, 1]])

    def test_null_p1(self):
        rng = np.random.default_rng(13)
        d = validate_dataset(rng.standard_normal((200, 1)), rng.standard_normal(200))
        assert enumerate_posterior(d, SpikeSlabHyper(v0=0.01, v1=100)).inclusion[0] < 0.5

    def test_orthogonal_strong_effect(self):
        Q, _ = np.linalg.qr(np.random.default_rng(14).standard_normal((40, 2)))
        X = Q * math.sqrt(40)
        y = 3 * X[:, 0] + np.random.default_rng(15).standard_normal(40)
        post = enumerate_posterior(validate_dataset(X, y), SpikeSlabHyper())
        assert post.map_model == (1, 0)

    @pytest.mark.parametrize("kind", ["collapsed", "model2"])
    def test_normalized(self, kind):
        post = enumerate_posterior(gaussian_data(16, 25, 3, beta=[1, 0, 0]), SpikeSlabHyper(), kind)
        assert abs(post.probs.sum() - 1) <= 1e-12
        assert np.all((post.inclusion >= 0) & (post.inclusion <= 1))
        assert all(math.isfinite(lw) for _, lw in post.models)
        assert len(post.models) == 8

    def test_inclusion_by_direct_sum(self):
        post = enumerate_posterior(gaussian_data(17, 25, 3, beta=[1, 0, 0]), SpikeSlabHyper())
        lw = np.array([lw for _, lw in post.models])
        pr = np.exp(lw - lw.max())
        pr /= pr.sum()
        for j in range(3):
            assert post.inclusion[j] == pytest.approx(sum(p for (g, _), p in zip(post.models, pr) if g[j]),
                                                      rel=1e-12)

    def test_permutation_equivariance(self):
        d = gaussian_data(18, 30, 3, beta=[1.5, 0, -0.5])
        perm = [2, 0, 1]
        h = SpikeSlabHyper()
        a = enumerate_posterior(d, h).inclusion
        b = enumerate_posterior(validate_dataset(d.X[:, perm], d.y), h).inclusion
        np.testing.assert_allclose(b, a[perm], rtol=1e-10)

    def test_budget(self):
        d = validate_dataset(np.eye(21), np.ones(21))
        with pytest.raises(BudgetError):
            enumerate_posterior(d, SpikeSlabHyper())

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            enumerate_posterior(gaussian_data(19, 5, 1), SpikeSlabHyper(), "nope")

    def test_as_dict(self):
        doc = enumerate_posterior(gaussian_data(20, 10, 2), SpikeSlabHyper()).as_dict()
        assert set(doc) == {"kind", "inclusion", "map_model", "models"}
        assert len(doc["models"]) == 4
