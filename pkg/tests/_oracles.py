"""Independent oracles used to freeze expected values in the tests.

Everything here is deliberately written from first principles (series,
quadrature, enumeration, golden-section search) and shares no code with the
package, so a test that compares the two is a genuine cross-check.
"""

from __future__ import annotations

import math


def erf_series(x: float, terms: int = 200) -> float:
    """Maclaurin series of erf; accurate to ~1e-14 for |x| <= 5."""
    total = 0.0
    term = x
    n = 0
    while n < terms:
        total += term / (2 * n + 1)
        n += 1
        term *= -x * x / n
        if abs(term) < 1e-18:
            break
    return 2.0 / math.sqrt(math.pi) * total


def norm_cdf_series(x: float) -> float:
    return 0.5 * (1.0 + erf_series(x / math.sqrt(2.0)))


def simpson(f, a: float, b: float, n: int = 4000) -> float:
    """Composite Simpson rule on [a, b] with n (even) intervals."""
    if n % 2:
        n += 1
    h = (b - a) / n
    total = f(a) + f(b)
    for i in range(1, n):
        total += f(a + i * h) * (4.0 if i % 2 else 2.0)
    return total * h / 3.0


def t_pdf(x: float, df: float) -> float:
    ln = (math.lgamma(0.5 * (df + 1.0)) - math.lgamma(0.5 * df)
          - 0.5 * math.log(df * math.pi)
          - 0.5 * (df + 1.0) * math.log(1.0 + x * x / df))
    return math.exp(ln)


def t_cdf_quadrature(x: float, df: float, n: int = 20000) -> float:
    """CDF by integrating the density from 0 (plus the symmetric half)."""
    if x < 0.0:
        return 1.0 - t_cdf_quadrature(-x, df, n)
    return 0.5 + simpson(lambda u: t_pdf(u, df), 0.0, x, n)


def t_quantile_bisect(p: float, df: float) -> float:
    """Quantile by bisection on the quadrature CDF."""
    lo, hi = 0.0, 1.0
    while t_cdf_quadrature(hi, df) < p:
        lo, hi = hi, hi * 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if t_cdf_quadrature(mid, df) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gammainc_lower_series(a: float, x: float, terms: int = 2000) -> float:
    """Regularized lower incomplete gamma by its power series (all x >= 0)."""
    if x <= 0.0:
        return 0.0
    total = 0.0
    term = 1.0 / a
    k = 0
    while k < terms:
        total += term
        k += 1
        term *= x / (a + k)
        if abs(term) < abs(total) * 1e-17:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gamma_quantile_bisect(p: float, shape: float) -> float:
    lo, hi = 0.0, 1.0
    while gammainc_lower_series(shape, hi) < p:
        lo, hi = hi, hi * 2.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if gammainc_lower_series(shape, mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def wls_normal_equations(x, y, w):
    """Hand solve of the 2x2 weighted normal equations (Cramer's rule)."""
    sw = sum(w)
    swx = sum(wi * xi for wi, xi in zip(w, x))
    swxx = sum(wi * xi * xi for wi, xi in zip(w, x))
    swy = sum(wi * yi for wi, yi in zip(w, y))
    swxy = sum(wi * xi * yi for wi, xi, yi in zip(w, x, y))
    det = sw * swxx - swx * swx
    intercept = (swxx * swy - swx * swxy) / det
    slope = (sw * swxy - swx * swy) / det
    return intercept, slope


def golden_max(f, lo: float, hi: float, iters: int = 200):
    """Golden-section maximization of a unimodal scalar function."""
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - phi * (b - a)
    d = a + phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def re_ml_fit(y, v):
    """Random-effects ML by profiling: closed-form mean given tau2,
    golden-section over tau2."""

    def profile(tau2):
        w = [1.0 / (vi + tau2) for vi in v]
        mu = sum(wi * yi for wi, yi in zip(w, y)) / sum(w)
        ll = 0.0
        for yi, vi in zip(y, v):
            s2 = vi + tau2
            ll += -0.5 * math.log(2.0 * math.pi * s2) - (yi - mu) ** 2 / (2.0 * s2)
        return ll

    mean_y = sum(y) / len(y)
    var_y = sum((yi - mean_y) ** 2 for yi in y) / max(len(y) - 1, 1)
    tau2, _ = golden_max(profile, 0.0, 10.0 * var_y + 1e-9, iters=300)
    if profile(0.0) >= profile(tau2):
        tau2 = 0.0
    w = [1.0 / (vi + tau2) for vi in v]
    mu = sum(wi * yi for wi, yi in zip(w, y)) / sum(w)
    return mu, tau2


def binorm_pdf(x: float, z: float, mx: float, mz: float, sx: float,
               corr: float) -> float:
    """Bivariate normal density; the z margin has unit variance."""
    dx = (x - mx) / sx
    dz = z - mz
    q = (dx * dx - 2.0 * corr * dx * dz + dz * dz) / (1.0 - corr * corr)
    return math.exp(-0.5 * q) / (2.0 * math.pi * sx * math.sqrt(1.0 - corr * corr))


def copas_conditional_logpdf_quadrature(y_obs, mu, tau2, rho, a1, a2, se,
                                        n=20000):
    """log P(y | z > 0) by integrating the joint density over z in (0, inf).

    The latent publication score z has mean a1 + a2/se and unit variance and
    correlates with the observed effect through rho * se / sigma.
    """
    sigma = math.sqrt(tau2 + se * se)
    corr = rho * se / sigma
    u = a1 + a2 / se
    upper = u + 12.0
    num = simpson(lambda z: binorm_pdf(y_obs, z, mu, u, sigma, corr),
                  0.0, upper, n)
    denom = 0.5 * math.erfc(-u / math.sqrt(2.0))
    return math.log(num) - math.log(denom)
