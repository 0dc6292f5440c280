"""EMOS, BMA, MBM and DRN."""

import numpy as np
import pytest
from scipy import stats

from powercal import distributions as tn
from powercal.postprocessors import BMA, DRN, EMOS, MBM, MbmParams
from powercal.postprocessors.bma import em_mixture, mixture_quantiles
from powercal.scoring import crps_ensembles

from oracles import central_diff, relative_error


def spread_data(rng, n, k=11, centre=50.0):
    """Ensembles with informative mean and spread, far from the zero boundary."""
    mean = centre + 8 * rng.standard_normal(n)
    spread = rng.uniform(1.0, 4.0, n)
    z = rng.standard_normal((n, k))
    z = (z - z.mean(axis=1, keepdims=True)) / z.std(axis=1, ddof=1, keepdims=True)
    return mean[:, None] + spread[:, None] * z, mean, spread


class TestEMOS:
    def test_exact_shift_recovered(self, rng):
        X, xbar, _ = spread_data(rng, 3000)
        y = xbar + 2.0
        cal = EMOS().fit(X, y)
        p = cal.params
        assert p.a * X.shape[1] == pytest.approx(1.0, abs=0.02)
        assert p.b == pytest.approx(2.0, abs=0.05 * 2 + 0.5)
        med = cal.predict_quantiles(X[:200])[:, X.shape[1] // 2]
        np.testing.assert_allclose(med, xbar[:200] + 2.0, rtol=0.02)

    def test_variance_slope_recovered(self, rng):
        X, xbar, s = spread_data(rng, 2000)
        y = xbar + 2.0 * s * rng.standard_normal(xbar.size)
        p = EMOS().fit(X, y).params
        assert p.d == pytest.approx(4.0, rel=0.15)

    def test_quantiles_are_truncated_normal(self, rng):
        X, xbar, s = spread_data(rng, 500)
        y = xbar + s * rng.standard_normal(xbar.size)
        cal = EMOS().fit(X, y)
        mu, sigma = cal.distribution(X[:20])
        expected = tn.quantile(cal.levels[None, :], mu[:, None], sigma[:, None])
        np.testing.assert_allclose(cal.predict_quantiles(X[:20]), expected, rtol=1e-12)

    def test_degenerate_spread_uses_c(self, rng):
        X, xbar, s = spread_data(rng, 800)
        y = xbar + s * rng.standard_normal(xbar.size)
        cal = EMOS().fit(X, y)
        p = cal.params
        const = np.full((1, X.shape[1]), 30.0)
        want = tn.quantile(cal.levels, p.a * X.shape[1] * 30.0 + p.b, np.sqrt(p.c))
        np.testing.assert_allclose(cal.predict_quantiles(const)[0], want, rtol=1e-12)

    def test_identical_spreads_fix_d(self, rng):
        X = 20 + rng.standard_normal((300, 1)) * 5 + np.array([-1.0, 1.0])
        y = X.mean(axis=1) + rng.standard_normal(300)
        cal = EMOS().fit(X, y)
        assert cal.params.d == 0.0 and cal.params.c > 0

    def test_generator_bias_and_spread(self, biased_deflated):
        X, y, meta = biased_deflated
        cal = EMOS().fit(X[:2000], y[:2000])
        mu, sigma = cal.distribution(X[:2000])
        xbar = X[:2000].mean(axis=1)
        assert np.mean(mu - xbar) == pytest.approx(5.0, abs=0.5)
        ratio = np.mean(sigma) / np.mean(X[:2000].std(axis=1, ddof=1))
        assert ratio == pytest.approx(meta.ideal_spread_ratio(10), rel=0.15)

    def test_warm_start_matches_cold(self, biased_deflated):
        X, y, _ = biased_deflated
        warm = EMOS(warm_start=True).fit(X[:500], y[:500]).fit(X[:1000], y[:1000])
        cold = EMOS().fit(X[:1000], y[:1000])
        assert warm.train_crps == pytest.approx(cold.train_crps, rel=1e-4)

    def test_per_lead_matches_joint_when_coefficients_shared(self):
        from powercal import synthgen
        from powercal.core import align, stack_pairs

        cfg = synthgen.ScenarioConfig(n_dates=1500, leads=(16, 20, 24), seed=3)  # flat skill beyond lead 15
        panel, obs, _ = synthgen.generate(cfg)
        per_lead, joint_X, joint_y, tests = [], [], [], []
        for lead in cfg.leads:
            X, y = stack_pairs(align(panel, obs, lead))
            joint_X.append(X[:1000])
            joint_y.append(y[:1000])
            tests.append((X[1000:], y[1000:]))
            per_lead.append(EMOS().fit(X[:1000], y[:1000]))
        joint = EMOS().fit(np.vstack(joint_X), np.concatenate(joint_y))
        sep = np.mean([crps_ensembles(c.predict_quantiles(X), y).mean() for c, (X, y) in zip(per_lead, tests)])
        one = np.mean([crps_ensembles(joint.predict_quantiles(X), y).mean() for X, y in tests])
        assert abs(sep - one) / one <= 0.02


class TestBMA:
    def test_exchangeable_uniform_weights(self, biased_deflated):
        X, y, _ = biased_deflated
        cal = BMA().fit(X[:300], y[:300])
        np.testing.assert_allclose(cal.params.weights, 1.0 / X.shape[1])
        assert np.all(cal.params.sigma == cal.params.sigma[0])

    def test_exact_member_dominates(self, rng):
        n, k = 500, 5
        y = rng.uniform(5, 50, n)
        X = np.column_stack([y, y[:, None] + rng.uniform(0.5, 6.0, (n, k - 1))])  # exact member is always the minimum
        cal = BMA(per_member=True).fit(X, y)
        assert cal.params.weights[0] >= 0.9

    def test_single_component_quantiles(self):
        means = np.array([[10.0, 30.0, 50.0]])
        q = mixture_quantiles(np.array([0.1, 0.5, 0.9]), means, np.array([1.0, 0.0, 0.0]), np.array([2.0, 1.0, 1.0]))
        np.testing.assert_allclose(q[0], stats.norm.ppf([0.1, 0.5, 0.9], loc=10, scale=2), atol=1e-9)

    def test_mixture_quantiles_invert_cdf(self, rng):
        means = rng.uniform(0, 20, (4, 6))
        w = rng.dirichlet(np.ones(6))
        sig = rng.uniform(0.5, 3, 6)
        lv = np.linspace(0.05, 0.95, 7)
        q = mixture_quantiles(lv, means, w, sig)
        cdf = (w * stats.norm.cdf((q[:, :, None] - means[:, None, :]) / sig)).sum(axis=2)
        np.testing.assert_allclose(cdf, np.broadcast_to(lv, cdf.shape), atol=1e-10)

    @pytest.mark.parametrize("shared", [True, False])
    def test_em_monotone_and_simplex(self, biased_deflated, shared):
        X, y, _ = biased_deflated
        Xs = np.sort(X[:400], axis=1)[:, ::5]
        k = Xs.shape[1]
        means = Xs + 5.0
        _, _, trace = em_mixture(means, y[:400], np.full(k, 1 / k), 3.0, shared=shared, sigma_floor=1e-6, max_iter=200)
        assert np.all(np.diff(trace) >= -1e-9 * np.maximum(1.0, np.abs(trace[:-1])))
        for steps in range(1, 30):
            w, s, _ = em_mixture(means, y[:400], np.full(k, 1 / k), 3.0, shared=shared, sigma_floor=1e-6, max_iter=steps)
            assert np.all(w >= 0) and w.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(s > 0)

    def test_fit_trace_nondecreasing(self, biased_deflated):
        X, y, _ = biased_deflated
        cal = BMA(per_member=True).fit(X[:300, :9], y[:300])
        tr = np.asarray(cal.loglik_trace)
        assert tr.size >= 2 and np.all(np.diff(tr) >= -1e-9 * np.maximum(1.0, np.abs(tr[:-1])))


class TestMBM:
    def test_identity_parameters(self, rng):
        X, xbar, s = spread_data(rng, 50, centre=5.0)
        cal = MBM().fit(X, xbar + s * rng.standard_normal(50))
        cal.params = MbmParams(0.0, 1.0, 1.0, 0.0)
        np.testing.assert_allclose(cal.predict_quantiles(X), np.maximum(np.sort(X, axis=1), 0.0), atol=1e-12)

    def test_mean_preserved(self, rng):
        X, xbar, s = spread_data(rng, 400)
        cal = MBM().fit(X, 3 + 0.9 * xbar + 2 * s * rng.standard_normal(400))
        corrected = cal.corrected_members(X)
        p = cal.params
        np.testing.assert_allclose(corrected.mean(axis=1), p.alpha + p.beta * X.mean(axis=1), rtol=1e-12)

    def test_spread_scaling_recovered(self, biased_deflated):
        X, y, meta = biased_deflated
        cal = MBM().fit(X[:2000], y[:2000])
        assert np.mean(cal.spread_scaling(X[:2000])) == pytest.approx(meta.ideal_spread_ratio(10), rel=0.15)

    def test_tau_form(self):
        p = MbmParams(0, 1, 0.5, 2.0)
        assert p.tau(4.0) == pytest.approx(np.sqrt(0.25 + 4.0 / 16.0))


class TestDRN:
    def _trained(self, biased_deflated, **kw):
        X, y, _ = biased_deflated
        return DRN(max_epochs=200, **kw).fit(X[:300], y[:300]), X[:300], y[:300]

    def test_gradient_finite_differences(self, biased_deflated):
        cal, X, y = self._trained(biased_deflated)
        x = cal._features(X[:40])
        rng = np.random.default_rng(0)
        for _ in range(50):
            flat = cal.params.flat + 0.3 * rng.standard_normal(cal.params.flat.size)
            _, grad = cal.loss_and_grad(flat, x, y[:40])
            fd = central_diff(lambda p: cal.loss_and_grad(p, x, y[:40])[0], flat, 1e-6)
            assert relative_error(grad, fd) < 1e-4

    def test_sigma_positive(self, biased_deflated, rng):
        cal, _, _ = self._trained(biased_deflated)
        X = rng.uniform(0, 200, (2000, 51)) * rng.uniform(0, 1, (2000, 1))
        _, sigma = cal.distribution(X)
        assert np.all(sigma > 0)

    def test_affine_variant_close_to_emos(self):
        # data drawn from an EMOS model: y ~ TN(1 + xbar, 0.5 + 0.8 S^2)
        rng = np.random.default_rng(8)
        n = 3000
        X, xbar, s = spread_data(rng, n, k=21, centre=20.0)
        mu, sigma = 1.0 + xbar, np.sqrt(0.5 + 0.8 * s**2)
        y = tn.quantile(rng.uniform(0.001, 0.999, n), mu, sigma)
        emos = EMOS().fit(X[:2000], y[:2000])
        drn = DRN(hidden_units=0, lr=0.02, max_epochs=5000, patience=200).fit(X[:2000], y[:2000])
        c_emos = crps_ensembles(emos.predict_quantiles(X[2000:]), y[2000:]).mean()
        c_drn = crps_ensembles(drn.predict_quantiles(X[2000:]), y[2000:]).mean()
        assert c_drn <= 1.05 * c_emos
