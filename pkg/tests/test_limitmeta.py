import numpy as np
import pytest

import _oracles as oracles
from conftest import make_effect, random_effects
from metabias.errors import InsufficientStudies, SingularDesign
from metabias.limitmeta import limit_meta
from metabias.petpeese import pet
from metabias.pooling import dl_random_effects

SES = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


class TestLimitMeta:
    def test_exact_radial_line_with_zero_tau(self):
        # y_i = 2 + 0.5 se_i keeps Q below m-1, so tau_hat = 0 and the
        # radial points sit exactly on r = 0.5 + 2 x
        effs = [make_effect(2.0 + 0.5 * se, se) for se in SES]
        res = limit_meta(effs)
        assert res.tau_hat == 0.0
        assert res.intercept == pytest.approx(0.5, abs=1e-10)
        assert res.slope == pytest.approx(2.0, abs=1e-10)
        assert res.pooled.estimate == pytest.approx(2.0, abs=1e-10)

    def test_identical_effects_alpha_zero(self):
        effs = [make_effect(0.8, se) for se in SES]
        res = limit_meta(effs)
        assert res.tau_hat == 0.0
        assert res.alpha_hat == pytest.approx(0.0, abs=1e-10)
        assert res.pooled.estimate == pytest.approx(0.8, abs=1e-10)

    def test_against_normal_equations_oracle(self, rng):
        effs = random_effects(rng, 6)
        res = limit_meta(effs)
        tau = res.tau_hat
        x = [1.0 / (e.se + tau) for e in effs]
        r = [e.value / (e.se + tau) for e in effs]
        icept, slope = oracles.wls_normal_equations(x, r, [1.0] * 6)
        assert res.intercept == pytest.approx(icept, abs=1e-10)
        assert res.slope == pytest.approx(slope, abs=1e-10)

    def test_adjusted_identity(self, rng):
        for _ in range(200):
            effs = random_effects(rng, int(rng.integers(3, 12)))
            res = limit_meta(effs)
            assert res.pooled.estimate == pytest.approx(
                res.slope + res.tau_hat * res.intercept, rel=1e-12, abs=1e-12)

    def test_zero_alpha_means_adjusted_equals_slope(self):
        effs = [make_effect(0.8, se) for se in SES]
        res = limit_meta(effs)
        assert res.pooled.estimate == pytest.approx(res.slope, abs=1e-12)

    def test_coincides_with_pet_when_tau_zero(self, rng):
        # tau_hat = 0 makes the design matrix identical to the Egger
        # regression, so the radial slope equals the PET effect coefficient
        for _ in range(50):
            effs = [make_effect(0.5 + 0.05 * float(rng.standard_normal()) * se,
                                se) for se in SES]
            res = limit_meta(effs)
            if res.tau_hat == 0.0:
                fit = pet(effs)
                assert res.slope == pytest.approx(fit.alpha1, abs=1e-10)
                assert res.intercept == pytest.approx(fit.alpha0, abs=1e-10)

    def test_permutation_invariance(self, rng):
        effs = random_effects(rng, 9)
        base = limit_meta(effs)
        for _ in range(20):
            perm = list(effs)
            rng.shuffle(perm)
            res = limit_meta(perm)
            assert res.pooled.estimate == pytest.approx(base.pooled.estimate,
                                                        rel=1e-12, abs=1e-12)

    def test_tau_matches_dl(self, rng):
        effs = random_effects(rng, 8)
        res = limit_meta(effs)
        assert res.tau_hat ** 2 == pytest.approx(
            dl_random_effects(effs).tau2, rel=1e-12, abs=1e-15)

    def test_ci_brackets_estimate(self, rng):
        effs = random_effects(rng, 10)
        res = limit_meta(effs)
        assert res.pooled.ci_low <= res.pooled.estimate <= res.pooled.ci_high

    def test_equal_ses_singular(self):
        with pytest.raises(SingularDesign):
            limit_meta([make_effect(v, 0.3) for v in (0.1, 0.4, 0.2)])

    def test_needs_three_studies(self):
        with pytest.raises(InsufficientStudies):
            limit_meta([make_effect(0.1), make_effect(0.2)])
