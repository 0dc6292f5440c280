import datetime as dt

import numpy as np
import pytest

from powercal import synthgen
from powercal.baselines import ClimatologyStore
from powercal.core import align, stack_pairs
from powercal.scoring import crps_ensembles, reliability_frequencies
from powercal.synthgen import ScenarioConfig

from conftest import lead_data


def max_deviation(X, y):
    levels, freq = reliability_frequencies(np.sort(X, axis=1), y)
    return float(np.max(np.abs(freq - levels)))


class TestConfig:
    @pytest.mark.parametrize("rho", [0.0, 1.5, -0.2])
    def test_deflation_domain(self, rho):
        with pytest.raises(ValueError):
            ScenarioConfig(deflation=rho)

    def test_skill_must_not_decrease(self):
        with pytest.raises(ValueError):
            ScenarioConfig(leads=(1, 2, 3), skill=[3.0, 2.0, 4.0])

    def test_schedule_length(self):
        with pytest.raises(ValueError):
            ScenarioConfig(leads=(1, 2, 3), bias=[1.0, 2.0])

    def test_lead_domain(self):
        with pytest.raises(ValueError):
            ScenarioConfig(leads=(0, 1))

    def test_skill_saturates(self):
        s = ScenarioConfig(saturation_lead=15).skill_schedule()
        assert np.all(np.diff(s[:15]) > 0)
        assert np.all(s[14:] == s[14])


class TestGenerate:
    def test_shapes_and_alignment(self):
        cfg = ScenarioConfig(n_dates=50, leads=(1, 7), n_members=11, seed=4)
        panel, obs, meta = synthgen.generate(cfg)
        assert len(panel) == 100 and panel.leads == [1, 7] and panel.n_members == 11
        assert len(align(panel, obs, 7)) == 50
        assert meta.bias == {1: -5.0, 7: -5.0}

    def test_nonnegative(self):
        # heavy negative bias pushes many members onto the clip
        panel, obs, _ = synthgen.generate(ScenarioConfig(n_dates=400, leads=(1, 20), bias=-30.0, seed=5))
        assert min(obs.values()) >= 0
        assert all(np.all(f.members >= 0) for f in panel.values())

    def test_bit_reproducible(self):
        cfg = ScenarioConfig(n_dates=60, leads=(3, 9), seed=11)
        a, oa, _ = synthgen.generate(cfg)
        b, ob, _ = synthgen.generate(cfg)
        assert a == b and dict(oa) == dict(ob)
        c, _, _ = synthgen.generate(ScenarioConfig(n_dates=60, leads=(3, 9), seed=12))
        assert a != c

    def test_target_mean(self):
        _, obs, _ = synthgen.generate(ScenarioConfig(n_dates=20_000, leads=(1,), seed=2))
        assert np.mean(list(obs.values())) == pytest.approx(40.0, rel=0.05)

    def test_calibrated_when_undistorted(self):
        # members and truth share the forecast error eta, so rho = 1 leaves only the
        # 1/K sampling term between predictive and raw spread
        cfg = ScenarioConfig(n_dates=5000, leads=(10,), bias=0.0, deflation=1.0, seed=21)
        X, y, meta = lead_data(cfg, 10)
        assert meta.ideal_spread_ratio(10) == pytest.approx(np.sqrt(1 + 1 / 51), rel=1e-12)
        assert max_deviation(X, y) <= 0.03

    def test_bias_recovered_by_mean(self):
        X, y, _ = lead_data(ScenarioConfig(n_dates=5000, leads=(10,), bias=-5.0, seed=22), 10)
        assert X.mean() - y.mean() == pytest.approx(-5.0, abs=0.5)

    @pytest.mark.parametrize("rho", [0.5, 0.6])
    def test_deflation_breaks_reliability(self, rho):
        X, y, _ = lead_data(ScenarioConfig(n_dates=5000, leads=(10,), bias=0.0, deflation=rho, seed=23), 10)
        assert max_deviation(X, y) >= 0.1

    def test_deviation_grows_as_rho_shrinks(self):
        # near rho = 1 the deviation fades continuously, so only ordering holds there
        devs = [
            max_deviation(*lead_data(ScenarioConfig(n_dates=5000, leads=(10,), bias=0.0, deflation=r, seed=23), 10)[:2])
            for r in (1.0, 0.9, 0.7, 0.5)
        ]
        assert np.all(np.diff(devs) > 0)

    def test_raw_crps_rises_then_plateaus(self):
        cfg = ScenarioConfig(n_dates=1000, bias=0.0, seed=1)
        panel, obs, _ = synthgen.generate(cfg)
        crps = []
        for lead in cfg.leads:
            X, y = stack_pairs(align(panel, obs, lead))
            crps.append(crps_ensembles(np.sort(X, axis=1), y).mean())
        crps = np.array(crps)
        sat = cfg.saturation_lead
        assert np.all(np.diff(crps[:sat]) > 0)
        assert np.max(np.abs(np.diff(crps[sat - 1:]))) <= 0.01 * crps[sat - 1:].mean()

    def test_leads_share_noise(self):
        # common random numbers: with equal schedules two leads verifying the same day agree
        cfg = ScenarioConfig(n_dates=30, leads=(2, 5), skill=[3.0, 3.0], seed=8)
        panel, _, _ = synthgen.generate(cfg)
        day = cfg.start + dt.timedelta(days=10)
        a = panel[(day - dt.timedelta(days=2), 2)].members
        b = panel[(day - dt.timedelta(days=5), 5)].members
        np.testing.assert_array_equal(a, b)


class TestHistory:
    def test_thirty_years_pool_of_90(self):
        cfg = ScenarioConfig(n_dates=10, leads=(1,), seed=3)
        hist = synthgen.history(cfg, 30)
        assert min(hist) == dt.date(1993, 1, 1) and max(hist) == dt.date(2022, 12, 31)
        store = ClimatologyStore(hist, half_width=1, draws=51)
        for target in (dt.date(2023, 3, 14), dt.date(2023, 7, 1), dt.date(2023, 11, 30)):
            assert store.pool(target).size == 90

    def test_seasonal_only_repeats(self):
        cfg = ScenarioConfig(ar_sd=0.0, seed=0)
        hist = synthgen.history(cfg, 4)
        values = dict(hist)
        checked = 0
        for day, v in values.items():
            try:
                nxt = day.replace(year=day.year + 1)
            except ValueError:
                continue
            if nxt in values and not (day.month == 2 and day.day == 29):
                assert values[nxt] == pytest.approx(v, abs=1e-12)
                checked += 1
        assert checked > 1000

    def test_history_matches_truth_law(self):
        # same seasonal structure: annual means of history and scenario truth agree
        cfg = ScenarioConfig(n_dates=3650, leads=(1,), seed=6)
        _, obs, _ = synthgen.generate(cfg)
        hist = synthgen.history(cfg, 10)
        assert np.mean(list(hist.values())) == pytest.approx(np.mean(list(obs.values())), rel=0.1)

    def test_reproducible(self):
        cfg = ScenarioConfig(seed=9)
        assert dict(synthgen.history(cfg, 2)) == dict(synthgen.history(cfg, 2))

    def test_years_domain(self):
        with pytest.raises(ValueError):
            synthgen.history(ScenarioConfig(), 0)
