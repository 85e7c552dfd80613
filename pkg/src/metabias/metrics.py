"""Aggregation of per-replicate estimator outputs into scenario metrics.

AMSE and bias use the population (1/N) forms, so
``amse = bias^2 + variance`` holds exactly.  Coverage is the fraction of
intervals containing the truth; power the fraction excluding zero.
Failed replicates (estimator exceptions) are excluded per method and
counted, never silently dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AllFailed

__all__ = ["ScenarioMetrics", "aggregate"]


@dataclass(frozen=True)
class ScenarioMetrics:
    method: str
    amse: float
    bias: float
    coverage: float
    power: float
    mean_published: float
    n_replicates_used: int
    n_failures: int


def aggregate(results, truth: float, method: str = "",
              published_counts=None) -> ScenarioMetrics:
    """Collapse replicate results (or failures) into one metrics row.

    ``results`` holds objects exposing ``estimate``, ``ci_low`` and
    ``ci_high``; entries that are ``None`` or exceptions count as failures.
    """
    estimates = []
    lows = []
    highs = []
    failures = 0
    for r in results:
        if r is None or isinstance(r, BaseException):
            failures += 1
            continue
        estimates.append(r.estimate)
        lows.append(r.ci_low)
        highs.append(r.ci_high)
    if not estimates:
        raise AllFailed(f"no successful replicate for method {method!r}")
    est = np.asarray(estimates)
    lo = np.asarray(lows)
    hi = np.asarray(highs)
    n = est.size
    bias = float(np.mean(est)) - truth
    amse = float(np.mean((est - truth) ** 2))
    coverage = float(np.mean((lo <= truth) & (truth <= hi)))
    power = float(np.mean((lo > 0.0) | (hi < 0.0)))
    mean_pub = (float(np.mean(published_counts))
                if published_counts is not None else 0.0)
    return ScenarioMetrics(method=method, amse=amse, bias=bias,
                           coverage=coverage, power=power,
                           mean_published=mean_pub,
                           n_replicates_used=n, n_failures=failures)
