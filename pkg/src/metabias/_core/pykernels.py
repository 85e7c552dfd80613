"""Pure-Python lane of the numeric kernels.

This module is the reference implementation; ``_ckernels.pyx`` is a compiled
twin with identical algorithms and branch structure, selected at import time
by :mod:`metabias._core` when available.  Keep the two in lock-step: the
cross-lane test suite asserts agreement to near machine precision.

Accuracy notes
--------------
* ``norm_cdf`` wraps the C library ``erfc`` (absolute error below 1e-15).
* ``log_norm_cdf`` switches to a Mills-ratio asymptotic series below
  x = -37 where ``erfc`` underflows; the truncated series carries a
  relative error under 1e-13 there.
* The regularized incomplete beta/gamma functions use the classical
  series/continued-fraction split (modified Lentz), converged to 3e-16;
  quantiles are then solved by safeguarded Newton to |cdf - p| <= 1e-14,
  which bounds the quantile error well below the 1e-10 contract.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_CF_EPS = 3e-16
_CF_TINY = 1e-300
_CF_MAXIT = 300


# ---------------------------------------------------------------------------
# normal distribution
# ---------------------------------------------------------------------------

def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / _SQRT2)


def norm_sf(x: float) -> float:
    """Upper tail 1 - Phi(x), computed without cancellation."""
    return 0.5 * math.erfc(x / _SQRT2)


def norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x - _LOG_SQRT_2PI)


def log_norm_cdf(x: float) -> float:
    """log Phi(x), stable over the whole real line."""
    if x >= -1.0:
        # Phi(-x) <= 0.84 here, so log1p is well conditioned.
        return math.log1p(-0.5 * math.erfc(x / _SQRT2))
    if x > -37.0:
        return math.log(0.5 * math.erfc(-x / _SQRT2))
    # Mills-ratio asymptotic: Phi(x) ~ phi(x)/(-x) * (1 - 1/x^2 + 3/x^4 - ...)
    inv2 = 1.0 / (x * x)
    series = 1.0 + inv2 * (-1.0 + inv2 * (3.0 + inv2 * (-15.0 + inv2 * 105.0)))
    return -0.5 * x * x - _LOG_SQRT_2PI - math.log(-x) + math.log(series)


# Acklam's rational approximation for the inverse normal CDF
# (|relative error| < 1.15e-9) followed by one Halley refinement against
# erfc, which brings the result to full double precision.
_PPF_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_PPF_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_PPF_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_PPF_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)


def norm_quantile(p: float) -> float:
    """Inverse of norm_cdf on (0, 1)."""
    if p <= 0.0 or p >= 1.0:
        return math.nan
    plow = 0.02425
    if p < plow:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_PPF_C[0] * q + _PPF_C[1]) * q + _PPF_C[2]) * q + _PPF_C[3]) * q
               + _PPF_C[4]) * q + _PPF_C[5])
             / ((((_PPF_D[0] * q + _PPF_D[1]) * q + _PPF_D[2]) * q + _PPF_D[3]) * q + 1.0))
    elif p <= 1.0 - plow:
        q = p - 0.5
        r = q * q
        x = ((((((_PPF_A[0] * r + _PPF_A[1]) * r + _PPF_A[2]) * r + _PPF_A[3]) * r
               + _PPF_A[4]) * r + _PPF_A[5]) * q
             / (((((_PPF_B[0] * r + _PPF_B[1]) * r + _PPF_B[2]) * r + _PPF_B[3]) * r
                 + _PPF_B[4]) * r + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -((((((_PPF_C[0] * q + _PPF_C[1]) * q + _PPF_C[2]) * q + _PPF_C[3]) * q
                + _PPF_C[4]) * q + _PPF_C[5])
              / ((((_PPF_D[0] * q + _PPF_D[1]) * q + _PPF_D[2]) * q + _PPF_D[3]) * q + 1.0))
    # Halley step: e is the CDF error, u = e / phi(x)
    e = 0.5 * math.erfc(-x / _SQRT2) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


# ---------------------------------------------------------------------------
# regularized incomplete beta -> Student t
# ---------------------------------------------------------------------------

def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            break
    return h


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
             + a * math.log(x) + b * math.log1p(-x))
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def t_cdf(t: float, df: float) -> float:
    x = df / (df + t * t)
    p = 0.5 * betainc_reg(0.5 * df, 0.5, x)
    return p if t <= 0.0 else 1.0 - p


def t_pdf(t: float, df: float) -> float:
    ln = (math.lgamma(0.5 * (df + 1.0)) - math.lgamma(0.5 * df)
          - 0.5 * math.log(df * math.pi)
          - 0.5 * (df + 1.0) * math.log1p(t * t / df))
    return math.exp(ln)


def _t_upper_guess(ph: float, df: float) -> float:
    """Cornish-Fisher expansion of the upper-half t quantile in powers of 1/df."""
    z = norm_quantile(ph)
    z2 = z * z
    g1 = z * (z2 + 1.0) / 4.0
    g2 = z * (5.0 * z2 * z2 + 16.0 * z2 + 3.0) / 96.0
    g3 = z * (3.0 * z2 * z2 * z2 + 19.0 * z2 * z2 + 17.0 * z2 - 15.0) / 384.0
    invdf = 1.0 / df
    t = z + invdf * (g1 + invdf * (g2 + invdf * g3))
    return max(t, z)


def t_quantile(p: float, df: float) -> float:
    """Inverse Student-t CDF, safeguarded Newton on the CDF."""
    if p == 0.5:
        return 0.0
    sign = 1.0 if p > 0.5 else -1.0
    ph = p if p > 0.5 else 1.0 - p
    t = _t_upper_guess(ph, df)
    # establish a bracket [lo, hi] with cdf(lo) <= ph <= cdf(hi)
    lo = 0.0
    hi = max(t, 1.0)
    for _ in range(300):
        if t_cdf(hi, df) >= ph:
            break
        lo = hi
        hi *= 2.0
    if t < lo or t > hi:
        t = 0.5 * (lo + hi)
    for _ in range(100):
        f = t_cdf(t, df) - ph
        if f > 0.0:
            hi = t
        else:
            lo = t
        if abs(f) < 1e-14:
            break
        step = f / t_pdf(t, df)
        t_new = t - step
        if t_new <= lo or t_new >= hi:
            t_new = 0.5 * (lo + hi)
        if t_new == t:
            break
        t = t_new
    return sign * t


# ---------------------------------------------------------------------------
# regularized incomplete gamma -> gamma quantile
# ---------------------------------------------------------------------------

def gammainc_reg(a: float, x: float) -> float:
    """Regularized lower incomplete gamma function P(a, x)."""
    if x <= 0.0:
        return 0.0
    if x < a + 1.0:
        # series representation
        ap = a
        term = 1.0 / a
        total = term
        for _ in range(_CF_MAXIT * 2):
            ap += 1.0
            term *= x / ap
            total += term
            if abs(term) < abs(total) * _CF_EPS:
                break
        return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    # continued fraction for Q(a, x)
    b = x + 1.0 - a
    c = 1.0 / _CF_TINY
    d = 1.0 / b
    h = d
    for i in range(1, _CF_MAXIT * 2):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = b + an / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            break
    return 1.0 - math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def _gamma_pdf_std(a: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    return math.exp((a - 1.0) * math.log(x) - x - math.lgamma(a))


def gamma_quantile(p: float, shape: float, scale: float) -> float:
    """Inverse gamma CDF (shape/scale parameterization)."""
    a = shape
    # Wilson-Hilferty starting point; fall back to the small-x expansion
    z = norm_quantile(p)
    g = 1.0 - 1.0 / (9.0 * a) + z / (3.0 * math.sqrt(a))
    x = a * g * g * g if g > 0.0 else 0.0
    if x <= 0.0:
        x = math.exp((math.log(p) + math.lgamma(a + 1.0)) / a)
    lo = 0.0
    hi = max(x, 1.0)
    for _ in range(400):
        if gammainc_reg(a, hi) >= p:
            break
        lo = hi
        hi *= 2.0
    if x <= lo or x >= hi:
        x = 0.5 * (lo + hi)
    for _ in range(100):
        f = gammainc_reg(a, x) - p
        if f > 0.0:
            hi = x
        else:
            lo = x
        if abs(f) < 1e-14:
            break
        pdf = _gamma_pdf_std(a, x)
        x_new = x - f / pdf if pdf > 0.0 else 0.5 * (lo + hi)
        if x_new <= lo or x_new >= hi:
            x_new = 0.5 * (lo + hi)
        if x_new == x:
            break
        x = x_new
    return x * scale


# ---------------------------------------------------------------------------
# vectorized t quantiles (hot path of the selection model)
# ---------------------------------------------------------------------------

def _betainc_reg_vec(a: np.ndarray, b: float, x: np.ndarray) -> np.ndarray:
    """Vectorized I_x(a, b) via the same Lentz continued fraction."""
    a = np.asarray(a, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    swap = x >= (a + 1.0) / (a + b + 2.0)
    aa = np.where(swap, b, a)
    bb = np.where(swap, a, b)
    xx = np.where(swap, 1.0 - x, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        ln_bt = (_lgamma_vec(aa + bb) - _lgamma_vec(aa) - _lgamma_vec(bb)
                 + aa * np.log(xx) + bb * np.log1p(-xx))
    bt = np.exp(ln_bt)

    qab = aa + bb
    qap = aa + 1.0
    qam = aa - 1.0
    c = np.ones_like(xx)
    d = 1.0 - qab * xx / qap
    np.copyto(d, _CF_TINY, where=np.abs(d) < _CF_TINY)
    d = 1.0 / d
    h = d.copy()
    active = np.ones(xx.shape, dtype=bool)
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2 * m
        num = m * (bb - m) * xx / ((qam + m2) * (aa + m2))
        d = 1.0 + num * d
        np.copyto(d, _CF_TINY, where=np.abs(d) < _CF_TINY)
        c = 1.0 + num / c
        np.copyto(c, _CF_TINY, where=np.abs(c) < _CF_TINY)
        d = 1.0 / d
        h = np.where(active, h * d * c, h)
        num = -(aa + m) * (qab + m) * xx / ((aa + m2) * (qap + m2))
        d = 1.0 + num * d
        np.copyto(d, _CF_TINY, where=np.abs(d) < _CF_TINY)
        c = 1.0 + num / c
        np.copyto(c, _CF_TINY, where=np.abs(c) < _CF_TINY)
        d = 1.0 / d
        delta = d * c
        h = np.where(active, h * delta, h)
        active = active & (np.abs(delta - 1.0) >= _CF_EPS)
        if not active.any():
            break
    res = bt * h / aa
    res = np.where(xx <= 0.0, 0.0, res)
    res = np.where(xx >= 1.0, 1.0, res)
    return np.where(swap, 1.0 - res, res)


_lgamma_vec = np.vectorize(math.lgamma, otypes=[np.float64])


def _t_cdf_upper_vec(t: np.ndarray, df: np.ndarray) -> np.ndarray:
    """CDF for t >= 0, vectorized."""
    x = df / (df + t * t)
    return 1.0 - 0.5 * _betainc_reg_vec(0.5 * df, 0.5, x)


def _t_pdf_vec(t: np.ndarray, df: np.ndarray) -> np.ndarray:
    ln = (_lgamma_vec(0.5 * (df + 1.0)) - _lgamma_vec(0.5 * df)
          - 0.5 * np.log(df * math.pi)
          - 0.5 * (df + 1.0) * np.log1p(t * t / df))
    return np.exp(ln)


def t_quantile_many(p: float, df: np.ndarray) -> np.ndarray:
    """Upper-half t quantile (p > 0.5) for an array of degrees of freedom."""
    df = np.asarray(df, dtype=np.float64)
    if p == 0.5:
        return np.zeros_like(df)
    if p < 0.5:
        return -t_quantile_many(1.0 - p, df)
    z = norm_quantile(p)
    z2 = z * z
    g1 = z * (z2 + 1.0) / 4.0
    g2 = z * (5.0 * z2 * z2 + 16.0 * z2 + 3.0) / 96.0
    g3 = z * (3.0 * z2 * z2 * z2 + 19.0 * z2 * z2 + 17.0 * z2 - 15.0) / 384.0
    invdf = 1.0 / df
    t = np.maximum(z + invdf * (g1 + invdf * (g2 + invdf * g3)), z)
    for _ in range(40):
        f = _t_cdf_upper_vec(t, df) - p
        if np.all(np.abs(f) < 1e-13):
            break
        step = f / _t_pdf_vec(t, df)
        t_new = t - step
        t = np.where(t_new <= 0.0, 0.5 * t, t_new)
    # stragglers (tiny df with a poor start) fall back to the scalar solver
    bad = np.abs(_t_cdf_upper_vec(t, df) - p) >= 1e-12
    if bad.any():
        flat = t.reshape(-1)
        dflat = df.reshape(-1)
        for i in np.nonzero(bad.reshape(-1))[0]:
            flat[i] = t_quantile(p, float(dflat[i]))
    return t


# ---------------------------------------------------------------------------
# bounded Nelder-Mead (maximization) and the Copas kernel
# ---------------------------------------------------------------------------

def nelder_mead_box(f, start, lower, upper, max_eval=2000, diam_tol=1e-8,
                    flat_tol=0.0):
    """Maximize ``f`` over a box via Nelder-Mead with clip-to-box projection.

    Returns ``(x, fx, converged, n_eval)``.  Deterministic: ties in the
    vertex ordering are broken by insertion order.  A positive ``flat_tol``
    additionally declares convergence when the simplex function values agree
    to that relative tolerance (needed when a likelihood has an unidentified
    direction along which the geometric diameter cannot collapse).
    """
    k = len(start)

    def clip(pt):
        return [min(max(pt[i], lower[i]), upper[i]) for i in range(k)]

    x0 = clip(list(start))
    verts = [x0]
    for i in range(k):
        h = 0.05 * (upper[i] - lower[i])
        if h == 0.0:
            h = 1e-8
        v = list(x0)
        v[i] = x0[i] + h
        v = clip(v)
        if v == x0:
            v = list(x0)
            v[i] = x0[i] - h
            v = clip(v)
        verts.append(v)
    fvals = [f(v) for v in verts]
    n_eval = k + 1

    def order():
        idx = sorted(range(k + 1), key=lambda i: (-fvals[i], i))
        return [verts[i] for i in idx], [fvals[i] for i in idx]

    converged = False
    while n_eval < max_eval:
        verts, fvals = order()
        diam = 0.0
        for v in verts[1:]:
            d = max(abs(v[i] - verts[0][i]) for i in range(k))
            diam = max(diam, d)
        if diam < diam_tol:
            converged = True
            break
        if flat_tol > 0.0 and fvals[0] - fvals[k] <= flat_tol * (1.0 + abs(fvals[0])):
            converged = True
            break
        centroid = [sum(verts[j][i] for j in range(k)) / k for i in range(k)]
        worst = verts[k]
        xr = clip([centroid[i] + (centroid[i] - worst[i]) for i in range(k)])
        fr = f(xr)
        n_eval += 1
        if fr > fvals[0]:
            xe = clip([centroid[i] + 2.0 * (centroid[i] - worst[i]) for i in range(k)])
            fe = f(xe)
            n_eval += 1
            if fe > fr:
                verts[k], fvals[k] = xe, fe
            else:
                verts[k], fvals[k] = xr, fr
        elif fr > fvals[k - 1]:
            verts[k], fvals[k] = xr, fr
        else:
            if fr > fvals[k]:
                xc = clip([centroid[i] + 0.5 * (centroid[i] - worst[i]) for i in range(k)])
            else:
                xc = clip([centroid[i] - 0.5 * (centroid[i] - worst[i]) for i in range(k)])
            fc = f(xc)
            n_eval += 1
            if fc > min(fr, fvals[k]):
                verts[k], fvals[k] = xc, fc
            else:
                # shrink toward the best vertex
                for j in range(1, k + 1):
                    verts[j] = clip([verts[0][i] + 0.5 * (verts[j][i] - verts[0][i])
                                     for i in range(k)])
                    fvals[j] = f(verts[j])
                n_eval += k
    verts, fvals = order()
    return list(verts[0]), fvals[0], converged, n_eval


def copas_loglik_arr(mu, tau2, rho, a1, a2, y, se):
    """Conditional log-likelihood of published effects under the Copas model.

    ``y`` and ``se`` are equal-length float sequences (observed effects and
    their within-study standard errors).
    """
    total = 0.0
    for i in range(len(y)):
        v = se[i] * se[i]
        sig2 = tau2 + v
        sig = math.sqrt(sig2)
        u = a1 + a2 / se[i]
        resid = (y[i] - mu) / sig
        rho_t = rho * se[i] / sig
        denom = math.sqrt(1.0 - rho_t * rho_t)
        vv = (u + rho_t * resid) / denom
        total += (-0.5 * resid * resid - _LOG_SQRT_2PI - math.log(sig)
                  + log_norm_cdf(vv) - log_norm_cdf(u))
    return total


def copas_fit_point(y, se, a1, a2, start, lower, upper, max_eval=2000, diam_tol=1e-8):
    """Maximize the Copas conditional likelihood over (mu, tau2, rho).

    Returns ``(mu, tau2, rho, loglik, converged, n_eval)``.

    Internally tau2 is parameterized as s^2 so its zero boundary becomes an
    interior point (a clipped simplex otherwise collapses onto the tau2 = 0
    face and misses maxima just above it), and the search restarts from the
    incumbent with a fresh simplex until the value stops improving.  When
    selection is effectively absent the likelihood is flat in rho, so
    machine-level flatness of the simplex also counts as convergence.
    """
    yl = [float(v) for v in y]
    sl = [float(v) for v in se]

    def objective(theta):
        return copas_loglik_arr(theta[0], theta[1] * theta[1], theta[2],
                                a1, a2, yl, sl)

    s_hi = math.sqrt(max(upper[1], 0.0))
    t_lower = [lower[0], -s_hi, lower[2]]
    t_upper = [upper[0], s_hi, upper[2]]
    x = [start[0], math.sqrt(max(start[1], 0.0)), start[2]]
    fx = -math.inf
    converged = False
    n_eval = 0
    for _ in range(3):
        x_new, f_new, converged, ne = nelder_mead_box(
            objective, x, t_lower, t_upper, max_eval=max_eval,
            diam_tol=diam_tol, flat_tol=1e-12)
        n_eval += ne
        improved = f_new > fx + 1e-9 * (1.0 + abs(f_new))
        x, fx = x_new, f_new
        if converged and not improved:
            break
    return x[0], x[1] * x[1], x[2], fx, converged, n_eval
