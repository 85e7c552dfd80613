"""Monte Carlo engine: study generation, selection, and calibration.

One replicate = one meta-analysis of ``m`` two-arm studies.  Per study, arm
sizes are Poisson(delta) (resampled below 2), the underlying variance is
N(100, 100) (resampled below 1, a probability-~0 event), the study effect is
eta plus a N(0, tau2) random effect, arm means carry N(0, S^2/n) noise, and
the reported arm SDs are draws from the sampling law of a sample SD (scaled
chi-square).  Under the unequal-variance scenario the control arm variance
is shrunk to 0.8 S^2 and significance tests use Satterthwaite degrees of
freedom computed from the reported variances.

Selection: a study is published when its pooled t statistic
``d * sqrt(n1 n0/(n1+n0))`` exceeds the upper alpha/2 t critical value
(positive direction only), and otherwise with probability ``1 - pi_pub``.

Determinism: every replicate draws from an independent stream derived from
(seed, stream kind, replicate index) via numpy ``SeedSequence`` spawn keys —
a counter-based splitting scheme — so results are bit-identical for any
worker count.  The uniform publication draw is consumed for every study,
significant or not, so scalar and batch paths see identical streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._core import kernels
from .effects import (COHEN_D, EFFECT_KINDS, EffectEstimate, StudySummary,
                      small_sample_factor)
from .errors import DomainError, TargetUnreachable

__all__ = ["SimConfig", "GeneratedStudy", "MetaSample", "replicate_stream",
           "generate_study", "apply_selection", "generate_meta",
           "calibrate_pi_pub", "true_smd", "satterthwaite_df",
           "pi_pub_for_target", "published_count", "significant_fraction"]

STREAM_SIM = 0
STREAM_CALIB = 1
_ORACLE_SEED = 815250997  # fixed so the truth constant never varies with runs
_ORACLE_DRAWS = 10_000_000
_MAX_REGENERATIONS = 100_000

EQUAL = "equal"
UNEQUAL = "unequal"
VARIANCE_SCENARIOS = (EQUAL, UNEQUAL)


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulation scenario."""

    m: int
    delta: float
    eta: float
    tau2: float
    variance_scenario: str
    effect_kind: str
    alpha: float = 0.05
    pi_pub: float = 0.0
    replicates: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.m < 2:
            raise DomainError(f"m must be >= 2, got {self.m}")
        if self.delta <= 0.0:
            raise DomainError("delta must be positive")
        if self.tau2 < 0.0:
            raise DomainError("tau2 must be nonnegative")
        if self.variance_scenario not in VARIANCE_SCENARIOS:
            raise DomainError(
                f"unknown variance scenario {self.variance_scenario!r}")
        if self.effect_kind not in EFFECT_KINDS:
            raise DomainError(f"unknown effect kind {self.effect_kind!r}")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha must lie in (0, 1)")
        if not 0.0 <= self.pi_pub <= 1.0:
            raise DomainError("pi_pub must lie in [0, 1]")
        if self.replicates < 1:
            raise DomainError("replicates must be >= 1")
        for name in ("delta", "eta", "tau2", "alpha", "pi_pub"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")


@dataclass(frozen=True)
class GeneratedStudy:
    summary: StudySummary
    df_for_test: float
    significant: bool
    published: bool


class MetaSample(NamedTuple):
    published: list[EffectEstimate]
    all_effects: list[EffectEstimate]
    truth: float
    n_regenerated: int


def replicate_stream(seed: int, stream: int, *path: int) -> np.random.Generator:
    """Independent generator for (seed, stream kind, indices...)."""
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(stream, *path)))


def satterthwaite_df(ssq0, n0, ssq1, n1):
    """Welch-Satterthwaite effective degrees of freedom (vectorized).

    With equal per-arm variances and equal arm sizes this reduces exactly to
    the pooled value n0 + n1 - 2.
    """
    q0 = np.asarray(ssq0, dtype=np.float64) / n0
    q1 = np.asarray(ssq1, dtype=np.float64) / n1
    return (q0 + q1) ** 2 / (q0 * q0 / (np.asarray(n0) - 1.0)
                             + q1 * q1 / (np.asarray(n1) - 1.0))


def pi_pub_for_target(p_sig: float, target_rate: float) -> float:
    """Exact solution of p + (1-p)(1-pi) = target, clamped into [0, 1]."""
    if p_sig > target_rate:
        raise TargetUnreachable(
            f"significant fraction {p_sig:.4f} already exceeds the "
            f"target rate {target_rate}")
    if 1.0 - p_sig < 1e-12:
        return 0.0
    pi = 1.0 - (target_rate - p_sig) / (1.0 - p_sig)
    return min(max(pi, 0.0), 1.0)


# ---------------------------------------------------------------------------
# raw draws for one replicate (fixed draw order; see module docstring)
# ---------------------------------------------------------------------------

def _draw_resampled(draw, predicate, m: int) -> np.ndarray:
    out = draw(m)
    bad = ~predicate(out)
    while bad.any():
        out[bad] = draw(int(bad.sum()))
        bad = ~predicate(out)
    return out


def _draw_studies(cfg: SimConfig, rng: np.random.Generator, m: int) -> dict:
    n0 = _draw_resampled(lambda k: rng.poisson(cfg.delta, k),
                         lambda n: n >= 2, m).astype(np.float64)
    n1 = _draw_resampled(lambda k: rng.poisson(cfg.delta, k),
                         lambda n: n >= 2, m).astype(np.float64)
    theta = rng.standard_normal(m) * math.sqrt(cfg.tau2)
    s2 = _draw_resampled(lambda k: rng.normal(100.0, 10.0, k),
                         lambda v: v >= 1.0, m)
    if cfg.variance_scenario == EQUAL:
        v0, v1 = s2, s2
    else:
        v0, v1 = 0.8 * s2, s2
    mean0 = rng.standard_normal(m) * np.sqrt(v0 / n0)
    mean1 = (cfg.eta + theta) + rng.standard_normal(m) * np.sqrt(v1 / n1)
    ssq0 = v0 * rng.chisquare(n0 - 1.0) / (n0 - 1.0)
    ssq1 = v1 * rng.chisquare(n1 - 1.0) / (n1 - 1.0)
    u_pub = rng.uniform(size=m)

    if cfg.variance_scenario == EQUAL:
        df = n0 + n1 - 2.0
    else:
        df = satterthwaite_df(ssq0, n0, ssq1, n1)
    return {"n0": n0, "n1": n1, "mean0": mean0, "mean1": mean1,
            "ssq0": ssq0, "ssq1": ssq1, "df": df, "u_pub": u_pub}


_tcrit_cache: dict[tuple[float, float], float] = {}


def _t_crit(p: float, df: np.ndarray, integral_df: bool) -> np.ndarray:
    """Per-study critical values; integer df hits a cache."""
    if integral_df:
        out = np.empty(df.size)
        for i, d in enumerate(df):
            key = (p, float(d))
            c = _tcrit_cache.get(key)
            if c is None:
                c = kernels.t_quantile(p, float(d))
                _tcrit_cache[key] = c
            out[i] = c
        return out
    return np.asarray(kernels.t_quantile_many(p, df))


def _cohens_d_arrays(draws: dict) -> tuple[np.ndarray, np.ndarray]:
    n0, n1 = draws["n0"], draws["n1"]
    sp = np.sqrt(((n1 - 1.0) * draws["ssq1"] + (n0 - 1.0) * draws["ssq0"])
                 / (n0 + n1 - 2.0))
    d = (draws["mean1"] - draws["mean0"]) / sp
    t_stat = d * np.sqrt(n1 * n0 / (n1 + n0))
    return d, t_stat


def _selection_flags(cfg: SimConfig, draws: dict) -> tuple[np.ndarray, np.ndarray]:
    _, t_stat = _cohens_d_arrays(draws)
    crit = _t_crit(1.0 - cfg.alpha / 2.0, draws["df"],
                   cfg.variance_scenario == EQUAL)
    significant = t_stat > crit
    published = significant | (draws["u_pub"] <= 1.0 - cfg.pi_pub)
    return significant, published


def _study_from_row(draws: dict, i: int) -> StudySummary:
    return StudySummary(n1=int(draws["n1"][i]), mean1=float(draws["mean1"][i]),
                        sd1=float(math.sqrt(draws["ssq1"][i])),
                        n0=int(draws["n0"][i]), mean0=float(draws["mean0"][i]),
                        sd0=float(math.sqrt(draws["ssq0"][i])))


def generate_study(cfg: SimConfig, rng: np.random.Generator) -> GeneratedStudy:
    """Draw a single study and apply the selection rule to it."""
    draws = _draw_studies(cfg, rng, 1)
    significant, published = _selection_flags(cfg, draws)
    return GeneratedStudy(summary=_study_from_row(draws, 0),
                          df_for_test=float(draws["df"][0]),
                          significant=bool(significant[0]),
                          published=bool(published[0]))


def apply_selection(study: GeneratedStudy, cfg: SimConfig,
                    rng: np.random.Generator) -> bool:
    """Publication flag for a study: significant, or lucky enough.

    The uniform draw is consumed unconditionally so that callers replaying a
    stream see the same consumption whether or not the study is significant.
    """
    s = study.summary
    sp = math.sqrt(((s.n1 - 1) * s.sd1 ** 2 + (s.n0 - 1) * s.sd0 ** 2)
                   / (s.n1 + s.n0 - 2))
    d = (s.mean1 - s.mean0) / sp
    t_stat = d * math.sqrt(s.n1 * s.n0 / (s.n1 + s.n0))
    significant = t_stat > kernels.t_quantile(1.0 - cfg.alpha / 2.0,
                                              study.df_for_test)
    u = float(rng.uniform())
    return bool(significant or u <= 1.0 - cfg.pi_pub)


def _effects_from_draws(cfg: SimConfig, draws: dict,
                        mask: np.ndarray) -> list[EffectEstimate]:
    d, _ = _cohens_d_arrays(draws)
    n0, n1 = draws["n0"], draws["n1"]
    n = n0 + n1
    var_d = n / (n0 * n1) + d * d / (2.0 * n)
    if cfg.effect_kind == COHEN_D:
        value, variance = d, var_d
    else:
        j = small_sample_factor(n - 2.0)
        value, variance = j * d, j * j * var_d
    out = []
    for i in np.nonzero(mask)[0]:
        out.append(EffectEstimate(value=float(value[i]),
                                  variance=float(variance[i]),
                                  kind=cfg.effect_kind,
                                  df=float(draws["df"][i]),
                                  n1=int(n1[i]), n0=int(n0[i])))
    return out


def generate_meta(cfg: SimConfig, rng: np.random.Generator) -> MetaSample:
    """One meta-analysis: m studies, selection applied, effects computed.

    Metas with fewer than 3 published studies are regenerated wholesale
    (several adjustment methods need at least 3); the count of regenerations
    is reported in the sample.
    """
    truth = true_smd(cfg.eta, cfg.variance_scenario, cfg.delta)
    for regen in range(_MAX_REGENERATIONS):
        draws = _draw_studies(cfg, rng, cfg.m)
        _, published = _selection_flags(cfg, draws)
        if int(published.sum()) >= 3:
            return MetaSample(
                published=_effects_from_draws(cfg, draws, published),
                all_effects=_effects_from_draws(
                    cfg, draws, np.ones(cfg.m, dtype=bool)),
                truth=truth, n_regenerated=regen)
    raise RuntimeError("selection kept rejecting whole meta-analyses; "
                       "check pi_pub against the scenario")


def published_count(cfg: SimConfig, rng: np.random.Generator) -> int:
    """Published-study count of one replicate (no effect objects built)."""
    draws = _draw_studies(cfg, rng, cfg.m)
    _, published = _selection_flags(cfg, draws)
    return int(published.sum())


def significant_fraction(cfg: SimConfig, reps: int) -> float:
    """Monte Carlo estimate of the per-study significance probability."""
    total = 0
    count = 0
    for rep in range(reps):
        rng = replicate_stream(cfg.seed, STREAM_CALIB, rep)
        draws = _draw_studies(cfg, rng, cfg.m)
        significant, _ = _selection_flags(cfg, draws)
        total += int(significant.sum())
        count += cfg.m
    return total / count


def calibrate_pi_pub(cfg: SimConfig, target_rate: float = 0.8,
                     calib_reps: int = 2000) -> float:
    """Suppression probability giving the target publishing rate.

    Solves ``p_sig + (1 - p_sig)(1 - pi) = target`` exactly with a Monte
    Carlo estimate of ``p_sig``; the result is clamped into [0, 1].
    """
    if not 0.0 < target_rate <= 1.0:
        raise DomainError("target_rate must lie in (0, 1]")
    return pi_pub_for_target(significant_fraction(cfg, calib_reps),
                             target_rate)


# ---------------------------------------------------------------------------
# scenario truth
# ---------------------------------------------------------------------------

_truth_cache: dict[tuple[float, str, float], float] = {}


def true_smd(eta: float, variance_scenario: str, delta: float,
             n_draws: int = _ORACLE_DRAWS) -> float:
    """Population standardized effect E[(eta + theta)/S_pool] of a scenario.

    Computed once per (eta, scenario, delta) by a large Monte Carlo oracle
    with a fixed internal seed and cached.  The random effect theta has mean
    zero, so the value does not depend on tau2; under the equal-variance
    scenario the pooled population SD equals the study SD, so delta drops
    out as well.
    """
    if variance_scenario not in VARIANCE_SCENARIOS:
        raise DomainError(f"unknown variance scenario {variance_scenario!r}")
    key = (eta, variance_scenario, delta if variance_scenario == UNEQUAL else 0.0)
    cached = _truth_cache.get(key)
    if cached is not None:
        return cached
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=_ORACLE_SEED))
    total = 0.0
    done = 0
    chunk = 1_000_000
    while done < n_draws:
        k = min(chunk, n_draws - done)
        s2 = _draw_resampled(lambda n: rng.normal(100.0, 10.0, n),
                             lambda v: v >= 1.0, k)
        if variance_scenario == EQUAL:
            pooled_var = s2
        else:
            n0 = _draw_resampled(lambda n: rng.poisson(delta, n),
                                 lambda v: v >= 2, k).astype(np.float64)
            n1 = _draw_resampled(lambda n: rng.poisson(delta, n),
                                 lambda v: v >= 2, k).astype(np.float64)
            pooled_var = ((n1 - 1.0) * s2 + (n0 - 1.0) * 0.8 * s2) / (n0 + n1 - 2.0)
        total += float(np.sum(eta / np.sqrt(pooled_var)))
        done += k
    value = total / n_draws
    _truth_cache[key] = value
    return value
