import numpy as np
import pytest

from slopeseg import StateGrid, TimeSeries, warm_up


@pytest.fixture(scope="session", autouse=True)
def _compiled_kernels():
    # Pay the JIT cost once, before any test that measures wall time.
    warm_up()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_instance(rng, n_max=8, m_max=4, value_span=4.0):
    """Small random (series, grid) pair, suitable for the exhaustive oracle."""
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, m_max + 1))
    y = rng.uniform(-value_span, value_span, size=n)
    states = np.sort(rng.choice(np.arange(-4.0, 5.0), size=m, replace=False))
    return TimeSeries(y), StateGrid(states)


def medium_instance(rng, n_max=300, m_max=20):
    n = int(rng.integers(10, n_max + 1))
    m = int(rng.integers(2, m_max + 1))
    y = rng.normal(0.0, 3.0, size=n) + np.linspace(0.0, rng.uniform(-10, 10), n)
    lo = float(np.floor(y.min())) - 2.0
    hi = float(np.ceil(y.max())) + 2.0
    states = np.linspace(lo, hi, m)
    return TimeSeries(y), StateGrid(states)
