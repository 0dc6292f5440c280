import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from powercal import distributions as tn
from powercal.distributions import InvalidParameters, TruncNormalParams

from oracles import (
    central_diff,
    crps_truncnorm_grad_mp,
    crps_truncnorm_mp,
    crps_truncnorm_quad,
    relative_error,
    truncnorm_cdf,
)

PHI0 = 1.0 / np.sqrt(2.0 * np.pi)
UNTRUNCATED_AT_MEAN = 2 * PHI0 - 1 / np.sqrt(np.pi)


def random_cases(n, seed):
    rng = np.random.default_rng(seed)
    mu = rng.uniform(-5, 50, n)
    sigma = rng.uniform(0.1, 20, n)
    y = rng.uniform(0, 60, n)
    return mu, sigma, y


class TestParams:
    @pytest.mark.parametrize("sigma", [0.0, -1.0, np.nan, np.inf])
    def test_bad_sigma(self, sigma):
        with pytest.raises(InvalidParameters):
            TruncNormalParams(0.0, sigma)

    def test_vectorised_check(self):
        with pytest.raises(InvalidParameters):
            tn.crps([1.0, 2.0], [1.0, 0.0], 1.0)


class TestCdf:
    def test_zero_at_boundary(self):
        assert tn.tn_cdf(TruncNormalParams(0, 1), 0.0) == 0.0

    def test_negligible_truncation(self):
        # truncation mass Phi(-10) < 1e-23
        assert tn.tn_cdf(TruncNormalParams(10, 1), 10.0) == pytest.approx(stats.norm.cdf(0.0), abs=1e-15)

    def test_limit_one(self):
        assert tn.tn_cdf(TruncNormalParams(0, 1), 1e6) == 1.0

    def test_matches_scipy(self):
        mu, sigma, y = random_cases(300, 1)
        np.testing.assert_allclose(tn.cdf(y, mu, sigma), truncnorm_cdf(y, mu, sigma), atol=1e-12)

    @given(st.floats(-20, 40), st.floats(0.05, 20), st.floats(0, 80), st.floats(0, 80))
    def test_monotone_in_x(self, mu, sigma, x1, x2):
        lo, hi = sorted((x1, x2))
        assert tn.cdf(lo, mu, sigma) <= tn.cdf(hi, mu, sigma)


class TestQuantile:
    def test_median_untruncated(self):
        assert tn.tn_quantile(TruncNormalParams(10, 1), 0.5) == pytest.approx(10.0, abs=1e-12)

    def test_lower_support(self):
        assert tn.tn_quantile(TruncNormalParams(0, 1), 1e-12) == pytest.approx(0.0, abs=1e-10)

    @given(st.floats(-30, 50), st.floats(0.05, 20), st.floats(0.001, 0.999))
    def test_round_trip(self, mu, sigma, q):
        x = tn.quantile(q, mu, sigma)
        assert tn.cdf(x, mu, sigma) == pytest.approx(q, abs=1e-10)

    @given(st.floats(-30, 50), st.floats(0.05, 20))
    def test_monotone_in_q(self, mu, sigma):
        q = np.linspace(0.01, 0.99, 99)
        assert np.all(np.diff(tn.quantile(q, mu, sigma)) >= 0)

    def test_deep_truncation_finite(self):
        x = tn.quantile(np.array([0.1, 0.5, 0.9]), -300.0, 1.0)
        assert np.all(np.isfinite(x)) and np.all(x >= 0)

    @pytest.mark.parametrize("q", [0.0, 1.0, -0.1])
    def test_level_domain(self, q):
        with pytest.raises(ValueError):
            tn.quantile(q, 0.0, 1.0)


class TestCrps:
    def test_untruncated_limit_at_mean(self):
        value = tn.tn_crps(TruncNormalParams(10, 1), 10.0)
        assert value == pytest.approx(UNTRUNCATED_AT_MEAN, abs=1e-12)
        assert value == pytest.approx(crps_truncnorm_quad(10, 1, 10), abs=1e-8)

    def test_off_centre_quadrature(self):
        assert tn.tn_crps(TruncNormalParams(10, 1), 12.0) == pytest.approx(crps_truncnorm_quad(10, 1, 12), abs=1e-6)

    def test_quadrature_suite(self):
        mu, sigma, y = random_cases(200, 2)
        got = tn.crps(mu, sigma, y)
        want = np.array([crps_truncnorm_quad(m, s, v) for m, s, v in zip(mu, sigma, y)])
        np.testing.assert_allclose(got, want, atol=1e-6, rtol=0)

    @pytest.mark.parametrize("mu,sigma,y", [(-5, 0.1, 0.0), (-5, 0.1, 0.3), (-40, 7, 2.0), (-2, 0.5, 0.0)])
    def test_strong_truncation(self, mu, sigma, y):
        assert tn.crps(mu, sigma, y) == pytest.approx(crps_truncnorm_quad(mu, sigma, y), abs=1e-8)

    def test_observation_below_support(self):
        # CRPS(F, y) for y < 0 equals CRPS(F, 0) + |y| since F = 0 on (y, 0)
        assert tn.crps(3.0, 2.0, -1.5) == pytest.approx(tn.crps(3.0, 2.0, 0.0) + 1.5, abs=1e-12)

    @given(st.floats(-5, 50), st.floats(0.1, 20), st.floats(0, 60), st.floats(0.01, 100))
    def test_positive_homogeneity(self, mu, sigma, y, c):
        assert tn.crps(c * mu, c * sigma, c * y) == pytest.approx(c * tn.crps(mu, sigma, y), rel=1e-9, abs=1e-12)

    @given(st.floats(-5, 50), st.floats(0.1, 20), st.floats(0, 60))
    def test_nonnegative(self, mu, sigma, y):
        assert tn.crps(mu, sigma, y) >= 0

    def test_degenerate_limit(self):
        assert tn.crps(5.0, 1e-9, 5.0) == pytest.approx(0.0, abs=1e-8)


class TestCrpsGrad:
    def test_symmetric_point(self):
        d_mu, d_sigma = tn.tn_crps_grad(TruncNormalParams(10, 1), 10.0)
        assert d_mu == pytest.approx(0.0, abs=1e-12)
        assert d_sigma == pytest.approx(UNTRUNCATED_AT_MEAN, abs=1e-12)
        assert d_sigma > 0

    def test_finite_differences(self):
        mu, sigma, y = random_cases(200, 3)
        d_mu, d_sigma = tn.crps_grad(mu, sigma, y)
        for i in range(mu.size):
            h = 1e-6 * max(abs(mu[i]), sigma[i], 1.0)
            fd = central_diff(lambda t: float(tn.crps(t[0], t[1], y[i])), [mu[i], sigma[i]], h)
            assert relative_error([d_mu[i], d_sigma[i]], fd) < 1e-5

    @pytest.mark.parametrize("mu,sigma,y", [(-3, 1.0, 0.0), (-3, 1.0, 0.4), (-12, 2.0, 1.0)])
    def test_truncated_regime(self, mu, sigma, y):
        d = tn.crps_grad(mu, sigma, y)
        assert relative_error(d, crps_truncnorm_grad_mp(mu, sigma, y)) < 1e-8

    @pytest.mark.parametrize("mu,sigma,y", [(-5, 0.1, 0.01), (-5, 0.1, 0.2), (-20, 0.5, 0.0)])
    def test_deep_truncation_against_high_precision(self, mu, sigma, y):
        # double-precision finite differences are useless here; compare with 1000+ digit arithmetic
        assert tn.crps(mu, sigma, y) == pytest.approx(float(crps_truncnorm_mp(mu, sigma, y)), rel=1e-8)
        assert relative_error(tn.crps_grad(mu, sigma, y), crps_truncnorm_grad_mp(mu, sigma, y)) < 1e-4

    def test_below_support_gradient(self):
        d = tn.crps_grad(1.0, 1.0, -0.5)
        fd = central_diff(lambda t: float(tn.crps(t[0], t[1], -0.5)), [1.0, 1.0], 1e-6)
        assert relative_error(d, fd) < 1e-7

    @settings(max_examples=200)
    @given(st.floats(-5, 50), st.floats(0.1, 20), st.floats(0, 60))
    def test_finite_everywhere(self, mu, sigma, y):
        assert np.all(np.isfinite(tn.crps_grad(mu, sigma, y)))
