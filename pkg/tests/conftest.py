import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "varik",
    deadline=None,
    max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("varik")


def central_diff(f, x, i, h=1e-5):
    """First partial of ``f`` in coordinate ``i`` by a central difference."""
    xp = np.array(x, dtype=float)
    xm = np.array(x, dtype=float)
    xp[i] += h
    xm[i] -= h
    return (f(list(xp)) - f(list(xm))) / (2 * h)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
