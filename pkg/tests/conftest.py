import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from metabias import EffectEstimate

# property suites need >= 200 random cases per property
settings.register_profile(
    "metabias",
    max_examples=200,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("metabias")


def make_effect(value, se=0.2, kind="cohen_d", n1=15, n0=15, df=None):
    if df is None:
        df = n1 + n0 - 2
    return EffectEstimate(value=float(value), variance=float(se) ** 2,
                          kind=kind, df=float(df), n1=n1, n0=n0)


def random_effects(rng, m, mean=0.4, se_lo=0.1, se_hi=0.5, kind="cohen_d"):
    """A generic meta-analysis with heterogeneous standard errors."""
    out = []
    for _ in range(m):
        se = float(rng.uniform(se_lo, se_hi))
        y = mean + float(rng.standard_normal()) * se
        n = int(rng.integers(10, 60))
        out.append(EffectEstimate(value=y, variance=se * se, kind=kind,
                                  df=2 * n - 2, n1=n, n0=n))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
