import numpy as np
import pytest

from conftest import make_effect, random_effects
from metabias.errors import InsufficientStudies
from metabias.pooling import dl_random_effects
from metabias.trimfill import estimate_l0, trim_and_fill


class TestEstimateL0:
    def test_symmetric_values_give_zero(self):
        effs = [make_effect(v) for v in (-0.4, -0.2, 0.0, 0.2, 0.4)]
        assert estimate_l0(effs, 0.0) == 0

    def test_hand_rank_case(self):
        # y=(1..5), center=1: distances (0,1,2,3,4) -> ranks (1,2,3,4,5);
        # above-center studies 2..5 carry ranks 2+3+4+5 = 14;
        # L0 = floor((56-30)/9) = 2
        effs = [make_effect(v, se=1.0) for v in (1.0, 2.0, 3.0, 4.0, 5.0)]
        assert estimate_l0(effs, 1.0) == 2

    def test_two_studies_both_above(self):
        # T = 1+2 = 3, L0 = floor((12-6)/3) = 2
        effs = [make_effect(1.0), make_effect(2.0)]
        assert estimate_l0(effs, 0.0) == 2

    def test_ties_use_average_ranks(self):
        # distances (1, 1, 2, 2): average ranks (1.5, 1.5, 3.5, 3.5);
        # above center: +1 (1.5) and +2 (3.5): T = 5 -> floor(0/7) = 0
        effs = [make_effect(v) for v in (-1.0, 1.0, -2.0, 2.0)]
        assert estimate_l0(effs, 0.0) == 0

    def test_needs_two_studies(self):
        with pytest.raises(InsufficientStudies):
            estimate_l0([make_effect(0.1)], 0.0)

    def test_value_at_center_not_counted(self):
        effs = [make_effect(v) for v in (0.0, 0.0, 0.0)]
        assert estimate_l0(effs, 0.0) == 0


class TestTrimAndFill:
    def test_symmetric_funnel_unchanged(self):
        effs = [make_effect(0.5 + d, se) for d, se in
                ((-0.3, 0.3), (-0.1, 0.2), (0.0, 0.1), (0.1, 0.2), (0.3, 0.3))]
        res = trim_and_fill(effs)
        dl = dl_random_effects(effs)
        assert res.l0_final == 0
        assert res.imputed_effects == []
        assert res.pooled.estimate == pytest.approx(dl.estimate)
        assert res.pooled.method == "trim_fill"
        assert res.converged

    def test_hand_traced_iteration(self):
        # equal variances (0.04), values 0.40..0.60 (six) plus 2.6,2.8,3.0,3.2
        # pass 1: center = mean = 1.46; above-center distances take the four
        #         top ranks (7,8,9,10): T = 34, L0 = floor(26/19) = 1
        # pass 2: trim y=3.2, center = 11.4/9 = 1.2667; ranks unchanged in
        #         structure: T = 34 again, L0 = 1 -> stable
        # impute the mirror 2*1.2667 - 3.2 = -2/3; final mean = 41.8/33
        values = (0.40, 0.44, 0.48, 0.52, 0.56, 0.60, 2.6, 2.8, 3.0, 3.2)
        effs = [make_effect(v, se=0.2) for v in values]
        res = trim_and_fill(effs)
        assert res.l0_final == 1
        assert res.iterations == 2
        assert len(res.imputed_effects) == 1
        assert res.imputed_effects[0].value == pytest.approx(-2.0 / 3.0,
                                                             abs=1e-12)
        assert res.pooled.estimate == pytest.approx(41.8 / 33.0, abs=1e-12)

    def test_spec_flat_case_no_trim(self):
        # one high study among a tight cluster never rejects symmetry here:
        # center 0.6, T = 5, L0 = floor(-10/9) -> 0
        effs = [make_effect(v, se=0.2) for v in (0.1, 0.2, 0.3, 0.4, 2.0)]
        res = trim_and_fill(effs)
        assert res.l0_final == 0
        assert res.pooled.estimate == pytest.approx(0.6, abs=1e-12)

    def test_identical_values(self):
        effs = [make_effect(0.4, se=0.2) for _ in range(5)]
        res = trim_and_fill(effs)
        assert res.l0_final == 0
        assert res.pooled.estimate == pytest.approx(0.4)

    def test_needs_three_studies(self):
        with pytest.raises(InsufficientStudies):
            trim_and_fill([make_effect(0.1), make_effect(0.2)])

    def test_imputation_only_lowers_estimate(self, rng):
        # right-skewed funnels: whenever studies are imputed the adjusted
        # estimate cannot exceed the unadjusted DL estimate
        seen_imputed = 0
        for _ in range(200):
            m = int(rng.integers(6, 16))
            effs = random_effects(rng, m, mean=0.3)
            # skew: push the top third further right
            effs = sorted(effs, key=lambda e: e.value)
            boosted = effs[: 2 * m // 3] + [
                make_effect(e.value + 1.2, e.se) for e in effs[2 * m // 3:]]
            res = trim_and_fill(boosted)
            if res.l0_final > 0:
                seen_imputed += 1
                dl = dl_random_effects(boosted)
                assert res.pooled.estimate <= dl.estimate + 1e-12
        assert seen_imputed > 0

    def test_imputed_variances_mirror_originals(self, rng):
        for _ in range(50):
            effs = random_effects(rng, 10, mean=0.2)
            effs = sorted(effs, key=lambda e: e.value)
            effs = effs[:7] + [make_effect(e.value + 1.5, e.se)
                               for e in effs[7:]]
            res = trim_and_fill(effs)
            if res.l0_final:
                original_vars = sorted(e.variance for e in effs)[
                    len(effs) - res.l0_final:]
                top_by_value = sorted(effs, key=lambda e: e.value)[
                    len(effs) - res.l0_final:]
                assert sorted(e.variance for e in res.imputed_effects) == \
                    sorted(e.variance for e in top_by_value)

    def test_idempotence_up_to_rank_discreteness(self, rng):
        for _ in range(50):
            effs = random_effects(rng, 12, mean=0.3)
            effs = sorted(effs, key=lambda e: e.value)
            effs = effs[:8] + [make_effect(e.value + 1.4, e.se)
                               for e in effs[8:]]
            res = trim_and_fill(effs)
            if res.l0_final:
                again = trim_and_fill(effs + res.imputed_effects)
                assert again.l0_final <= 1
