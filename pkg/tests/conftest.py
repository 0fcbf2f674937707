import numpy as np
import pytest

from mfscm.panel import Higher, Lower, MixedPanel, Same, UnitSeries


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance experiments")


def make_same(unit_id, values, cov=None):
    return UnitSeries(unit_id, Same(), np.asarray(values, dtype=float), cov)


def make_higher(unit_id, values, m, cov=None):
    arr = np.asarray(values, dtype=float).reshape(-1, m)
    return UnitSeries(unit_id, Higher(m=m), arr, cov)


def make_lower(unit_id, values, m_tilde, T, cov=None, mode="aggregate", sample_point=None):
    freq = Lower(m_tilde=m_tilde, mode=mode, sample_point=sample_point)
    times = freq.observation_times(T)
    return UnitSeries(unit_id, freq, np.asarray(values, dtype=float), cov, obs_times=times)


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


@pytest.fixture
def simple_panel(rng):
    """T=30, T0=20, three same-frequency donors, no covariates."""
    T = 30
    donors = tuple(make_same(f"d{j}", rng.normal(size=T)) for j in range(3))
    w = np.array([0.5, 0.3, 0.2])
    treated = make_same("y", sum(wj * d.outcomes for wj, d in zip(w, donors)))
    return MixedPanel(treated=treated, donors=donors, T0=20, T1=10, Q=0)
