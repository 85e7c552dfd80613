"""Self-contained numerics: special functions, tiny regressions, root finding
and bounded derivative-free maximization.

Distribution functions are computed from series/continued-fraction expansions
(see :mod:`metabias._core`) rather than an external stats library, because the
bias-adjustment estimators are sensitive to tail accuracy.  All operations are
pure functions and safe for concurrent callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._core import kernels
from .errors import DomainError, LengthMismatch, NoBracket, SingularDesign

__all__ = [
    "WlsFit",
    "MaximizeResult",
    "norm_cdf",
    "norm_sf",
    "log_norm_cdf",
    "norm_quantile",
    "t_quantile",
    "t_cdf",
    "gamma_quantile",
    "gamma_cdf",
    "wls_fit",
    "find_root",
    "maximize_bounded",
]

Z_975 = 1.959963984540054  # norm_quantile(0.975), used for all normal 95% CIs


def norm_cdf(x: float) -> float:
    """Standard normal CDF, absolute error below 1e-12."""
    if not math.isfinite(x):
        raise DomainError(f"norm_cdf requires finite x, got {x!r}")
    return kernels.norm_cdf(x)


def norm_sf(x: float) -> float:
    """Upper tail 1 - Phi(x) without cancellation."""
    if not math.isfinite(x):
        raise DomainError(f"norm_sf requires finite x, got {x!r}")
    return kernels.norm_sf(x)


def log_norm_cdf(x: float) -> float:
    """log Phi(x), numerically stable far into the left tail."""
    if not math.isfinite(x):
        raise DomainError(f"log_norm_cdf requires finite x, got {x!r}")
    return kernels.log_norm_cdf(x)


def norm_quantile(p: float) -> float:
    """Inverse standard normal CDF on (0, 1)."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"norm_quantile requires p in (0,1), got {p!r}")
    return kernels.norm_quantile(p)


def t_cdf(x: float, df: float) -> float:
    """Student-t CDF with real-valued degrees of freedom."""
    if df <= 0.0:
        raise DomainError(f"t_cdf requires df > 0, got {df!r}")
    return kernels.t_cdf(x, df)


def t_quantile(p: float, df: float) -> float:
    """Student-t quantile; df may be non-integer (Satterthwaite)."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"t_quantile requires p in (0,1), got {p!r}")
    if df <= 0.0:
        raise DomainError(f"t_quantile requires df > 0, got {df!r}")
    return kernels.t_quantile(p, df)


def gamma_cdf(x: float, shape: float, scale: float) -> float:
    """Gamma CDF (shape/scale parameterization)."""
    if shape <= 0.0 or scale <= 0.0:
        raise DomainError("gamma_cdf requires shape > 0 and scale > 0")
    return kernels.gammainc_reg(shape, x / scale)


def gamma_quantile(p: float, shape: float, scale: float) -> float:
    """Inverse gamma CDF (shape/scale parameterization)."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"gamma_quantile requires p in (0,1), got {p!r}")
    if shape <= 0.0 or scale <= 0.0:
        raise DomainError("gamma_quantile requires shape > 0 and scale > 0")
    return kernels.gamma_quantile(p, shape, scale)


@dataclass(frozen=True)
class WlsFit:
    """Weighted least squares fit of y on a single regressor plus intercept.

    ``coefficients`` is (intercept, slope); ``covariance`` is the 2x2
    covariance of the coefficients, ``residual_variance * (X'WX)^-1``.
    """

    coefficients: tuple[float, float]
    covariance: np.ndarray
    residual_variance: float
    df_residual: int

    def se(self, index: int) -> float:
        return math.sqrt(max(self.covariance[index, index], 0.0))


def wls_fit(x, y, weights) -> WlsFit:
    """Weighted least squares of y on x (intercept first in the output).

    Minimizes ``sum w_i (y_i - a - b x_i)^2``; the coefficient covariance is
    ``s^2 (X'WX)^-1`` with ``s^2`` the weighted residual mean square on
    ``n - 2`` degrees of freedom.  Equal weights reduce to ordinary least
    squares.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if x.shape != y.shape or x.shape != w.shape:
        raise LengthMismatch(
            f"wls_fit got lengths x={x.size}, y={y.size}, weights={w.size}")
    n = x.size
    if n < 3:
        raise DomainError(f"wls_fit needs at least 3 points, got {n}")
    if np.any(w < 0.0) or not np.any(w > 0.0):
        raise DomainError("weights must be nonnegative and not all zero")

    sw = float(np.sum(w))
    swx = float(np.sum(w * x))
    swxx = float(np.sum(w * x * x))
    det = sw * swxx - swx * swx
    # scale-aware singularity test: vanishing weighted variance of x
    if det <= 1e-14 * sw * max(swxx, 1e-300):
        raise SingularDesign("regressor is constant under the given weights")
    swy = float(np.sum(w * y))
    swxy = float(np.sum(w * x * y))
    intercept = (swxx * swy - swx * swxy) / det
    slope = (sw * swxy - swx * swy) / det

    resid = y - intercept - slope * x
    df_resid = n - 2
    rss = float(np.sum(w * resid * resid))
    s2 = max(rss, 0.0) / df_resid
    inv_xtwx = np.array([[swxx, -swx], [-swx, sw]]) / det
    return WlsFit(
        coefficients=(intercept, slope),
        covariance=s2 * inv_xtwx,
        residual_variance=s2,
        df_residual=df_resid,
    )


def find_root(f, lo: float, hi: float, tol: float = 1e-10) -> float:
    """Bisection root of a monotone function on [lo, hi].

    Requires a sign change on the bracket; iterates until
    ``|hi - lo| <= tol``.
    """
    flo = f(lo)
    fhi = f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0.0) == (fhi > 0.0):
        raise NoBracket(f"f({lo}) and f({hi}) have the same sign")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (fmid > 0.0) == (flo > 0.0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class MaximizeResult:
    argmax: tuple[float, ...]
    value: float
    converged: bool
    n_eval: int
    diagnostics: dict = field(default_factory=dict)


def maximize_bounded(f, lower, upper, start, max_eval: int = 2000,
                     diam_tol: float = 1e-8) -> MaximizeResult:
    """Derivative-free maximization over a box (2 or 3 parameters).

    Nelder-Mead with clip-to-box projection; stops when the simplex diameter
    drops below ``diam_tol`` or after ``max_eval`` objective evaluations.
    Never raises on non-convergence: the best point found is returned with
    ``converged=False``.
    """
    k = len(start)
    if k not in (2, 3):
        raise DomainError(f"maximize_bounded supports 2 or 3 parameters, got {k}")
    if len(lower) != k or len(upper) != k:
        raise LengthMismatch("bounds must match the dimension of start")
    for i in range(k):
        if not (math.isfinite(lower[i]) and math.isfinite(upper[i])):
            raise DomainError("bounds must be finite")
        if not lower[i] <= start[i] <= upper[i]:
            raise DomainError(f"start[{i}]={start[i]} outside [{lower[i]}, {upper[i]}]")
    x, fx, converged, n_eval = kernels.nelder_mead_box(
        f, list(start), list(lower), list(upper),
        max_eval=max_eval, diam_tol=diam_tol)
    return MaximizeResult(argmax=tuple(x), value=fx, converged=converged,
                          n_eval=n_eval, diagnostics={"diam_tol": diam_tol})
