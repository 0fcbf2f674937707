import numpy as np
import pytest

from conftest import make_same
from mfscm.errors import ConfigError, SampleSizeError
from mfscm.estimator import EffectSeries, FitConfig, effects, fit
from mfscm.inference import (
    BlockRule,
    BootstrapConfig,
    block_bootstrap_ci,
    ci_from_stats,
    sigma_v_hat,
)
from mfscm.panel import MixedPanel
from test_estimator import mixed_noiseless_panel


def noisy_panel(rng, T=60, T0=40):
    donors = tuple(make_same(f"d{j}", rng.normal(size=T) + j) for j in range(5))
    w0 = np.array([0.4, 0.3, 0.2, 0.1, 0.0])
    y = np.column_stack([d.outcomes for d in donors]) @ w0 + 0.3 * rng.normal(size=T)
    return MixedPanel(make_same("y", y), donors, T0=T0, T1=T - T0, Q=0)


class TestSigmaV:
    def test_constant_effects_give_zero(self):
        eff = EffectSeries(np.array([3, 4]), np.array([1.5, 1.5]), 1.5)
        assert sigma_v_hat(eff) == 0.0

    def test_two_point_variance(self):
        eff = EffectSeries(np.array([3, 4]), np.array([0.0, 2.0]), 1.0)
        assert sigma_v_hat(eff) == pytest.approx(1.0, abs=1e-14)

    def test_law_of_large_numbers(self):
        rng = np.random.default_rng(123)
        draws = rng.normal(0.0, 2.0, size=10_000)
        eff = EffectSeries(np.arange(1, 10_001), draws, float(np.mean(draws)))
        assert abs(sigma_v_hat(eff) - 4.0) < 0.1

    def test_single_period_rejected(self):
        eff = EffectSeries(np.array([3]), np.array([1.0]), 1.0)
        with pytest.raises(SampleSizeError):
            sigma_v_hat(eff)


class TestBlockRule:
    def test_pow_rule(self):
        assert BlockRule.pow(0.8).block_size(40) == 19

    def test_fixed_rule(self):
        assert BlockRule.fixed(12).block_size(40) == 12

    def test_minpow_rule(self):
        rule = BlockRule.floor_pow_with_min(0.5, 10)
        assert rule.block_size(40) == 10  # floor(sqrt(40)) = 6 -> floor at 10
        assert rule.block_size(640) == 25

    def test_parse(self):
        assert BlockRule.parse("pow:0.8") == BlockRule.pow(0.8)
        assert BlockRule.parse("fixed:7") == BlockRule.fixed(7)
        assert BlockRule.parse("minpow:0.5:10") == BlockRule.floor_pow_with_min(0.5, 10)
        with pytest.raises(ConfigError):
            BlockRule.parse("median:3")

    def test_block_size_bounds(self):
        with pytest.raises(ConfigError):
            BlockRule.fixed(1).block_size(40)
        with pytest.raises(ConfigError):
            BlockRule.fixed(50).block_size(40)

    def test_level_bounds(self):
        with pytest.raises(ConfigError):
            BootstrapConfig(n_boot=10, seed=0, level=1.5)


class TestBootstrap:
    def test_bit_identical_under_same_seed(self, rng):
        panel = noisy_panel(rng)
        res = fit(panel)
        eff = effects(res, panel)
        cfg = BootstrapConfig(n_boot=200, seed=42, level=0.1, block_rule=BlockRule.fixed(10))
        ci1 = block_bootstrap_ci(panel, res, eff, cfg)
        ci2 = block_bootstrap_ci(panel, res, eff, cfg)
        assert ci1.ci_lower == ci2.ci_lower and ci1.ci_upper == ci2.ci_upper
        np.testing.assert_array_equal(ci1.boot_stats, ci2.boot_stats)

    def test_seed_changes_stats(self, rng):
        panel = noisy_panel(rng)
        res = fit(panel)
        eff = effects(res, panel)
        cfg_a = BootstrapConfig(n_boot=100, seed=1, block_rule=BlockRule.fixed(10))
        cfg_b = BootstrapConfig(n_boot=100, seed=2, block_rule=BlockRule.fixed(10))
        a = block_bootstrap_ci(panel, res, eff, cfg_a)
        b = block_bootstrap_ci(panel, res, eff, cfg_b)
        assert not np.array_equal(a.boot_stats, b.boot_stats)

    def test_nested_intervals_across_levels(self, rng):
        panel = noisy_panel(rng)
        res = fit(panel)
        eff = effects(res, panel)
        stats = np.sort(
            block_bootstrap_ci(
                panel, res, eff, BootstrapConfig(n_boot=500, seed=9, block_rule=BlockRule.fixed(10))
            ).boot_stats
        )
        l99 = ci_from_stats(eff.ate, stats, panel.T1, 0.01)
        l95 = ci_from_stats(eff.ate, stats, panel.T1, 0.05)
        l90 = ci_from_stats(eff.ate, stats, panel.T1, 0.10)
        assert l99[0] <= l95[0] <= l90[0] <= l90[1] <= l95[1] <= l99[1]

    def test_percentile_ordering(self, rng):
        stats = np.sort(rng.normal(size=999))
        lo, hi = ci_from_stats(0.0, stats, 25, 0.1)
        assert lo <= hi

    def test_degenerate_panel_collapses_to_point(self):
        # constant donors, constant treated: identical blocks and zero variance
        T = 30
        donors = (make_same("a", np.full(T, 2.0)), make_same("b", np.full(T, 4.0)))
        y = np.full(T, 3.0)
        panel = MixedPanel(make_same("y", y), donors, T0=20, T1=10, Q=0)
        res = fit(panel)
        eff = effects(res, panel)
        cfg = BootstrapConfig(n_boot=50, seed=0, block_rule=BlockRule.fixed(5))
        ci = block_bootstrap_ci(panel, res, eff, cfg)
        np.testing.assert_allclose(ci.boot_stats, np.zeros(50), atol=1e-9)
        assert ci.ci_lower == pytest.approx(eff.ate, abs=1e-9)
        assert ci.ci_upper == pytest.approx(eff.ate, abs=1e-9)

    def test_block_size_must_be_below_T0(self, rng):
        panel = noisy_panel(rng)
        res = fit(panel)
        eff = effects(res, panel)
        cfg = BootstrapConfig(n_boot=10, seed=0, block_rule=BlockRule.fixed(panel.T0))
        with pytest.raises(ConfigError):
            block_bootstrap_ci(panel, res, eff, cfg)

    def test_doubling_draws_is_stable(self, rng):
        panel = noisy_panel(rng)
        res = fit(panel)
        eff = effects(res, panel)
        rule = BlockRule.fixed(10)
        small = block_bootstrap_ci(panel, res, eff, BootstrapConfig(n_boot=1000, seed=5, block_rule=rule))
        big = block_bootstrap_ci(panel, res, eff, BootstrapConfig(n_boot=2000, seed=5, block_rule=rule))
        iqr = float(np.subtract(*np.percentile(small.boot_stats, [75, 25])))
        tol = 3.0 * iqr / np.sqrt(1000)
        assert abs(small.ci_lower - big.ci_lower) <= tol
        assert abs(small.ci_upper - big.ci_upper) <= tol

    def test_effect_additivity_shifts_interval(self, rng):
        panel, _, _ = mixed_noiseless_panel(rng)
        res = fit(panel, FitConfig(P=0))
        eff = effects(res, panel)
        delta = 2.25
        y2 = np.array(panel.treated.outcomes, copy=True)
        y2[panel.T0 :] += delta
        panel2 = MixedPanel(
            type(panel.treated)("y", panel.treated.freq, y2, panel.treated.covariates),
            panel.donors, panel.T0, panel.T1, panel.Q,
        )
        res2 = fit(panel2, FitConfig(P=0))
        eff2 = effects(res2, panel2)
        cfg = BootstrapConfig(n_boot=300, seed=3, block_rule=BlockRule.fixed(12))
        ci = block_bootstrap_ci(panel, res, eff, cfg)
        ci2 = block_bootstrap_ci(panel2, res2, eff2, cfg)
        assert ci2.ate == pytest.approx(ci.ate + delta, abs=1e-9)
        assert ci2.ci_lower == pytest.approx(ci.ci_lower + delta, abs=1e-8)
        assert ci2.ci_upper == pytest.approx(ci.ci_upper + delta, abs=1e-8)

    def test_result_serializes(self, rng):
        panel = noisy_panel(rng)
        res = fit(panel)
        eff = effects(res, panel)
        ci = block_bootstrap_ci(
            panel, res, eff, BootstrapConfig(n_boot=50, seed=0, block_rule=BlockRule.fixed(10))
        )
        doc = ci.to_dict()
        assert doc["schema_version"] == 1
        assert doc["block_size"] == 10
        assert doc["n_boot"] == 50
