"""Standardized mean differences (Cohen's d, Hedges' g) from two-arm summaries.

The sampling variance uses the conventional large-sample form
``Var(d) = (n1+n0)/(n1*n0) + d^2 / (2(n1+n0))`` and ``Var(g) = J^2 Var(d)``.
The degrees of freedom attached to an effect default to the pooled-variance
value ``n1+n0-2``; the simulation engine substitutes a Satterthwaite value
under its unequal-variance scenario.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

__all__ = ["StudySummary", "EffectEstimate", "pooled_sd", "cohens_d",
           "hedges_g", "small_sample_factor"]

COHEN_D = "cohen_d"
HEDGES_G = "hedges_g"
EFFECT_KINDS = (COHEN_D, HEDGES_G)


@dataclass(frozen=True)
class StudySummary:
    """Per-arm summary statistics of one two-arm study.

    Arm 1 is treatment, arm 0 control; SDs must be positive and each arm
    needs at least two subjects so that the pooled SD has df >= 2.
    """

    n1: int
    mean1: float
    sd1: float
    n0: int
    mean0: float
    sd0: float

    def __post_init__(self):
        if self.n1 < 2 or self.n0 < 2:
            raise DomainError(f"arm sizes must be >= 2, got n1={self.n1}, n0={self.n0}")
        if self.sd1 <= 0.0 or self.sd0 <= 0.0:
            raise DomainError("arm standard deviations must be positive")
        for name in ("mean1", "mean0", "sd1", "sd0"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")


@dataclass(frozen=True)
class EffectEstimate:
    """A standardized mean difference with its sampling variance.

    ``df`` is the degrees of freedom used for the study's significance test;
    the arm sizes are carried through for methods that need them.
    """

    value: float
    variance: float
    kind: str
    df: float
    n1: int
    n0: int

    def __post_init__(self):
        if self.kind not in EFFECT_KINDS:
            raise DomainError(f"unknown effect kind {self.kind!r}")
        if self.variance <= 0.0:
            raise DomainError("effect variance must be positive")
        if self.df <= 0.0:
            raise DomainError("df must be positive")

    @property
    def se(self) -> float:
        return math.sqrt(self.variance)


def pooled_sd(s: StudySummary) -> float:
    """Pooled standard deviation across the two arms."""
    df = s.n1 + s.n0 - 2
    return math.sqrt(((s.n1 - 1) * s.sd1 ** 2 + (s.n0 - 1) * s.sd0 ** 2) / df)


def _d_variance(d: float, n1: int, n0: int) -> float:
    n = n1 + n0
    return n / (n1 * n0) + d * d / (2.0 * n)


def cohens_d(s: StudySummary) -> EffectEstimate:
    """Cohen's d: mean difference over the pooled SD."""
    d = (s.mean1 - s.mean0) / pooled_sd(s)
    return EffectEstimate(value=d, variance=_d_variance(d, s.n1, s.n0),
                          kind=COHEN_D, df=s.n1 + s.n0 - 2, n1=s.n1, n0=s.n0)


def small_sample_factor(df: float) -> float:
    """Hedges' correction factor J = 1 - 3/(4 df - 1)."""
    return 1.0 - 3.0 / (4.0 * df - 1.0)


def hedges_g(s: StudySummary) -> EffectEstimate:
    """Hedges' g: Cohen's d shrunk by the small-sample factor J."""
    d = cohens_d(s)
    j = small_sample_factor(s.n1 + s.n0 - 2)
    return EffectEstimate(value=j * d.value, variance=j * j * d.variance,
                          kind=HEDGES_G, df=d.df, n1=s.n1, n0=s.n0)
