import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_higher, make_lower, make_same
from mfscm.errors import ConfigError, PanelParseError, PanelValidationError
from mfscm.panel import (
    Higher,
    Lower,
    MixedPanel,
    load_panel,
    read_manifest,
    truncate_panel,
    validate_panel,
    write_panel,
)


def build_mixed_panel(rng, T=60, T0=40):
    cov = lambda: rng.normal(size=(1, T))
    treated = make_same("y", rng.normal(size=T), cov())
    d_same = make_same("a", rng.normal(size=T), cov())
    mt = 4
    d_low = make_lower("b", rng.normal(size=T // mt), mt, T, cov())
    d_high = make_higher("c", rng.normal(size=T * 3), 3, cov())
    return MixedPanel(treated=treated, donors=(d_same, d_low, d_high), T0=T0, T1=T - T0, Q=1)


class TestFrequencyClasses:
    def test_lower_requires_ratio_at_least_two(self):
        with pytest.raises(ConfigError):
            Lower(m_tilde=1)

    def test_higher_requires_ratio_at_least_two(self):
        with pytest.raises(ConfigError):
            Higher(m=1)

    def test_point_sample_needs_offset(self):
        with pytest.raises(ConfigError):
            Lower(m_tilde=4, mode="point_sample")
        with pytest.raises(ConfigError):
            Lower(m_tilde=4, mode="point_sample", sample_point=5)

    def test_unknown_mode_rejected(self):
        with pytest.raises(ConfigError):
            Lower(m_tilde=4, mode="interpolate")

    def test_observation_times(self):
        assert Lower(m_tilde=4).observation_times(10).tolist() == [4, 8]
        low = Lower(m_tilde=4, mode="point_sample", sample_point=2)
        assert low.observation_times(10).tolist() == [2, 6, 10]


class TestValidatePanel:
    def test_well_formed_panel_is_clean(self, rng):
        assert validate_panel(build_mixed_panel(rng)) == []

    def test_treated_must_be_baseline_frequency(self, rng):
        panel = build_mixed_panel(rng)
        bad = MixedPanel(
            treated=make_lower("y", rng.normal(size=15), 4, 60, rng.normal(size=(1, 60))),
            donors=panel.donors,
            T0=40,
            T1=20,
            Q=1,
        )
        assert any("treated must be baseline frequency" in d for d in validate_panel(bad))

    def test_empty_post_period_flagged(self, rng):
        panel = build_mixed_panel(rng)
        bad = MixedPanel(panel.treated, panel.donors, T0=60, T1=0, Q=1)
        assert any("post-treatment period empty" in d for d in validate_panel(bad))

    def test_missing_value_cites_unit_and_period(self, rng):
        T = 30
        values = rng.normal(size=T)
        values[16] = np.nan  # t = 17
        panel = MixedPanel(
            treated=make_same("y", rng.normal(size=T)),
            donors=(make_same("a", values),),
            T0=20,
            T1=10,
            Q=0,
        )
        diags = validate_panel(panel)
        assert any("'a'" in d and "t=17" in d for d in diags)

    def test_low_frequency_donor_without_covariates_rejected(self, rng):
        T = 40
        panel = MixedPanel(
            treated=make_same("y", rng.normal(size=T)),
            donors=(make_lower("b", rng.normal(size=10), 4, T),),
            T0=30,
            T1=10,
            Q=0,
        )
        assert any("Q = 0" in d for d in validate_panel(panel))

    def test_higher_frequency_flattened_length(self, rng):
        panel = build_mixed_panel(rng)
        high = panel.donors[2]
        assert high.outcomes.size == 3 * panel.T

    @given(n1=st.integers(0, 3), n2=st.integers(0, 3), n3=st.integers(0, 3))
    @settings(max_examples=25, deadline=None)
    def test_group_partition_covers_all_donors(self, n1, n2, n3):
        rng = np.random.default_rng(7)
        T = 16
        donors = []
        cov = lambda: rng.normal(size=(1, T))
        for i in range(n1):
            donors.append(make_same(f"s{i}", rng.normal(size=T), cov()))
        for i in range(n2):
            donors.append(make_lower(f"l{i}", rng.normal(size=4), 4, T, cov()))
        for i in range(n3):
            donors.append(make_higher(f"h{i}", rng.normal(size=2 * T), 2, cov()))
        if not donors:
            return
        panel = MixedPanel(make_same("y", rng.normal(size=T), cov()), tuple(donors), 12, 4, 1)
        g1, g2, g3 = panel.groups()
        assert len(g1) + len(g2) + len(g3) == panel.J
        assert sorted(g1 + g2 + g3) == list(range(panel.J))


class TestRoundTrip:
    def test_write_then_load_is_bit_exact(self, rng, tmp_path):
        panel = build_mixed_panel(rng)
        manifest = write_panel(panel, tmp_path)
        loaded = load_panel(manifest)
        assert loaded.T0 == panel.T0 and loaded.T1 == panel.T1 and loaded.Q == panel.Q
        for orig, got in zip((panel.treated, *panel.donors), (loaded.treated, *loaded.donors)):
            assert orig.unit_id == got.unit_id
            assert orig.freq == got.freq
            np.testing.assert_array_equal(orig.outcomes, got.outcomes)
            if orig.covariates is None:
                assert got.covariates is None
            else:
                np.testing.assert_array_equal(orig.covariates, got.covariates)
            if orig.obs_times is not None:
                np.testing.assert_array_equal(orig.obs_times, got.obs_times)

    def test_point_sample_round_trip(self, rng, tmp_path):
        T = 24
        low = make_lower(
            "b", rng.normal(size=6), 4, T, rng.normal(size=(1, T)), mode="point_sample", sample_point=1
        )
        panel = MixedPanel(
            make_same("y", rng.normal(size=T), rng.normal(size=(1, T))),
            (make_same("a", rng.normal(size=T), rng.normal(size=(1, T))), low),
            T0=16,
            T1=8,
            Q=1,
        )
        loaded = load_panel(write_panel(panel, tmp_path))
        got = loaded.donor("b")
        assert got.freq == low.freq
        np.testing.assert_array_equal(got.outcomes, low.outcomes)


class TestLoadErrors:
    def test_unknown_frequency_tag(self, rng, tmp_path):
        panel = build_mixed_panel(rng)
        manifest = write_panel(panel, tmp_path)
        text = manifest.read_text().replace('freq = "lower"', 'freq = "weekly"')
        manifest.write_text(text)
        with pytest.raises(ConfigError, match="weekly"):
            load_panel(manifest)

    def test_malformed_csv_names_file_and_line(self, rng, tmp_path):
        panel = build_mixed_panel(rng)
        manifest = write_panel(panel, tmp_path)
        target = tmp_path / "a.csv"
        lines = target.read_text().splitlines()
        lines[3] = "3,,not_a_number"
        target.write_text("\n".join(lines) + "\n")
        with pytest.raises(PanelParseError, match=r"a\.csv:4"):
            load_panel(manifest)

    def test_gap_in_series_cites_unit_and_period(self, rng, tmp_path):
        panel = build_mixed_panel(rng)
        manifest = write_panel(panel, tmp_path)
        target = tmp_path / "a.csv"
        lines = [ln for ln in target.read_text().splitlines() if not ln.startswith("17,")]
        target.write_text("\n".join(lines) + "\n")
        with pytest.raises(PanelValidationError) as err:
            load_panel(manifest)
        assert any("'a'" in d and "17" in d for d in err.value.diagnostics)

    def test_incomplete_higher_frequency_period(self, rng, tmp_path):
        panel = build_mixed_panel(rng)
        manifest = write_panel(panel, tmp_path)
        target = tmp_path / "c.csv"
        lines = [ln for ln in target.read_text().splitlines() if not ln.startswith("5,3,")]
        target.write_text("\n".join(lines) + "\n")
        with pytest.raises(PanelValidationError) as err:
            load_panel(manifest)
        assert any("'c'" in d and "t=5" in d and "k=3" in d for d in err.value.diagnostics)

    def test_missing_manifest_key(self, tmp_path):
        bad = tmp_path / "m.toml"
        bad.write_text('T0 = 10\n[treated]\nid = "y"\n')
        with pytest.raises(ConfigError, match="Q"):
            read_manifest(bad)


class TestTruncate:
    def test_truncation_shortens_every_unit(self, rng):
        panel = build_mixed_panel(rng, T=60, T0=40)
        sub = truncate_panel(panel, 24, 40)
        assert sub.T == 40 and sub.T0 == 24 and sub.T1 == 16
        assert validate_panel(sub) == []
        assert sub.donor("a").outcomes.shape == (40,)
        assert sub.donor("c").outcomes.shape == (40, 3)
        assert sub.donor("b").obs_times.max() <= 40
