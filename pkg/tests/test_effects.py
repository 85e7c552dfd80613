import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from metabias.effects import (StudySummary, cohens_d, hedges_g, pooled_sd,
                              small_sample_factor)
from metabias.errors import DomainError

summaries = st.builds(
    StudySummary,
    n1=st.integers(2, 200), n0=st.integers(2, 200),
    mean1=st.floats(-50, 50), mean0=st.floats(-50, 50),
    sd1=st.floats(0.1, 40), sd0=st.floats(0.1, 40),
)


class TestPooledSd:
    def test_equal_sds_reduce(self):
        s = StudySummary(n1=7, mean1=1.0, sd1=3.5, n0=12, mean0=0.0, sd0=3.5)
        assert pooled_sd(s) == pytest.approx(3.5, rel=1e-12)

    def test_hand_value_small_arms(self):
        s = StudySummary(n1=2, mean1=0.0, sd1=1.0, n0=2, mean0=0.0, sd0=3.0)
        assert pooled_sd(s) == pytest.approx(math.sqrt(5.0), rel=1e-12)

    def test_unbalanced_equal_sds(self):
        s = StudySummary(n1=3, mean1=1.0, sd1=2.0, n0=2, mean0=0.0, sd0=2.0)
        assert pooled_sd(s) == pytest.approx(2.0, rel=1e-12)


class TestCohensD:
    def test_zero_difference(self):
        s = StudySummary(n1=9, mean1=4.0, sd1=2.0, n0=11, mean0=4.0, sd0=3.0)
        d = cohens_d(s)
        assert d.value == 0.0
        assert d.variance == pytest.approx(20.0 / 99.0, rel=1e-12)
        assert d.df == 18

    def test_hand_value(self):
        s = StudySummary(n1=15, mean1=5.0, sd1=10.0, n0=15, mean0=0.0, sd0=10.0)
        d = cohens_d(s)
        assert d.value == pytest.approx(0.5, rel=1e-12)
        # 30/225 + 0.25/60
        assert d.variance == pytest.approx(0.1375, rel=1e-12)
        assert d.kind == "cohen_d"

    @given(summaries, st.floats(0.1, 100.0))
    def test_scale_invariance(self, s, c):
        scaled = StudySummary(n1=s.n1, mean1=c * s.mean1, sd1=c * s.sd1,
                              n0=s.n0, mean0=c * s.mean0, sd0=c * s.sd0)
        assert cohens_d(scaled).value == pytest.approx(cohens_d(s).value,
                                                       rel=1e-9, abs=1e-9)

    @given(summaries)
    def test_arm_swap_antisymmetry(self, s):
        swapped = StudySummary(n1=s.n0, mean1=s.mean0, sd1=s.sd0,
                               n0=s.n1, mean0=s.mean1, sd0=s.sd1)
        d, ds = cohens_d(s), cohens_d(swapped)
        assert ds.value == pytest.approx(-d.value, rel=1e-12, abs=1e-12)
        assert ds.variance == pytest.approx(d.variance, rel=1e-12)

    @given(summaries)
    def test_variance_floor(self, s):
        d = cohens_d(s)
        n = s.n1 + s.n0
        floor = n / (s.n1 * s.n0)
        assert d.variance >= floor - 1e-15
        if d.value == 0.0:
            assert d.variance == pytest.approx(floor, rel=1e-12)
        elif d.value ** 2 / (2.0 * n) > 1e-16 * floor:
            # strict once the d^2 term is above rounding of the floor term
            assert d.variance > floor


class TestHedgesG:
    def test_zero_maps_to_zero(self):
        s = StudySummary(n1=5, mean1=2.0, sd1=1.0, n0=5, mean0=2.0, sd0=1.0)
        assert hedges_g(s).value == 0.0

    def test_hand_value(self):
        s = StudySummary(n1=15, mean1=5.0, sd1=10.0, n0=15, mean0=0.0, sd0=10.0)
        g = hedges_g(s)
        assert small_sample_factor(28) == pytest.approx(1.0 - 3.0 / 111.0,
                                                        rel=1e-12)
        assert g.value == pytest.approx(0.4864865, abs=1e-7)
        assert g.kind == "hedges_g"

    def test_large_sample_limit(self):
        s = StudySummary(n1=50_000, mean1=1.0, sd1=2.0,
                         n0=50_000, mean0=0.0, sd0=2.0)
        d, g = cohens_d(s), hedges_g(s)
        assert g.value == pytest.approx(d.value, rel=1e-4)

    @given(summaries)
    def test_shrinks_toward_zero(self, s):
        d, g = cohens_d(s), hedges_g(s)
        if d.value == 0.0:
            assert g.value == 0.0
        else:
            assert abs(g.value) < abs(d.value)
        assert g.variance < d.variance


class TestValidation:
    def test_small_arm_rejected(self):
        with pytest.raises(DomainError):
            StudySummary(n1=1, mean1=0.0, sd1=1.0, n0=5, mean0=0.0, sd0=1.0)

    def test_nonpositive_sd_rejected(self):
        with pytest.raises(DomainError):
            StudySummary(n1=5, mean1=0.0, sd1=0.0, n0=5, mean0=0.0, sd0=1.0)

    def test_nan_mean_rejected(self):
        with pytest.raises(DomainError):
            StudySummary(n1=5, mean1=float("nan"), sd1=1.0, n0=5,
                         mean0=0.0, sd0=1.0)
