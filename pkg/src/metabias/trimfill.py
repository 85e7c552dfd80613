"""Iterative Trim & Fill with the L0 suppressed-study estimator.

The missing side is fixed to the left of the pooled estimate (the positive-
direction convention); ranks of |effect - center| use average ranks on ties.
Centers are re-fitted with DL random effects during the iteration, mirrored
studies keep the variance of their originals, and the final pool is a DL fit
on observed plus imputed studies.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .effects import EffectEstimate
from .errors import InsufficientStudies
from .pooling import MetaResult, dl_random_effects

__all__ = ["TrimFillResult", "estimate_l0", "trim_and_fill"]


@dataclass(frozen=True)
class TrimFillResult:
    pooled: MetaResult
    l0_final: int
    iterations: int
    imputed_effects: list[EffectEstimate]
    converged: bool


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ascending 1-based ranks with average ranks on ties."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def estimate_l0(effects: list[EffectEstimate], center: float) -> int:
    """L0 = floor([4 T - m(m+1)] / [2m - 1]), clamped at zero.

    T is the rank-sum of the studies lying above the center, with ranks of
    the absolute distances |effect - center|.
    """
    m = len(effects)
    if m < 2:
        raise InsufficientStudies(f"estimate_l0 needs >= 2 studies, got {m}")
    y = np.array([e.value for e in effects])
    ranks = _average_ranks(np.abs(y - center))
    t_sum = float(np.sum(ranks[y > center]))
    l0 = math.floor((4.0 * t_sum - m * (m + 1)) / (2.0 * m - 1.0))
    return max(0, l0)


def trim_and_fill(effects: list[EffectEstimate],
                  max_iter: int = 50) -> TrimFillResult:
    """Trim the extreme right-side studies, mirror them, and re-pool.

    Iterates center/L0 re-estimation until L0 stabilizes; if it still
    oscillates after ``max_iter`` passes the last state is returned with
    ``converged=False``.
    """
    m = len(effects)
    if m < 3:
        raise InsufficientStudies(f"trim_and_fill needs >= 3 studies, got {m}")
    by_value = sorted(range(m), key=lambda i: effects[i].value)

    l0 = 0
    converged = False
    iterations = 0
    center = dl_random_effects(effects).estimate
    for _ in range(max_iter):
        iterations += 1
        l0_new = estimate_l0(effects, center)
        l0_new = min(l0_new, m - 2)  # keep at least two studies in the refit
        if l0_new == l0 and iterations > 1:
            converged = True
            break
        l0 = l0_new
        kept = [effects[i] for i in by_value[:m - l0]] if l0 else list(effects)
        center = dl_random_effects(kept).estimate

    imputed = []
    for i in by_value[m - l0:]:
        src = effects[i]
        imputed.append(dataclasses.replace(src, value=2.0 * center - src.value))
    pooled = dl_random_effects(list(effects) + imputed)
    pooled = dataclasses.replace(pooled, method="trim_fill")
    return TrimFillResult(pooled=pooled, l0_final=l0, iterations=iterations,
                          imputed_effects=imputed, converged=converged)
