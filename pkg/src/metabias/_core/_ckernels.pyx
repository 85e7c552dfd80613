# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled lane of the numeric kernels.

Algorithmic twin of ``pykernels.py``; keep branch structure and constants
identical so the two lanes agree to near machine precision.
"""

import numpy as np

from libc.math cimport erfc, exp, fabs, lgamma, log, log1p, sqrt, NAN

BACKEND = "compiled"

cdef double _SQRT2 = sqrt(2.0)
cdef double _PI = 3.141592653589793238462643383279503
cdef double _LOG_SQRT_2PI = 0.5 * log(2.0 * _PI)
cdef double _CF_EPS = 3e-16
cdef double _CF_TINY = 1e-300
cdef int _CF_MAXIT = 300


# ---------------------------------------------------------------------------
# normal distribution
# ---------------------------------------------------------------------------

cdef inline double _norm_cdf(double x) nogil:
    return 0.5 * erfc(-x / _SQRT2)


cdef inline double _norm_sf(double x) nogil:
    return 0.5 * erfc(x / _SQRT2)


cdef double _log_norm_cdf(double x) nogil:
    cdef double inv2, series
    if x >= -1.0:
        return log1p(-0.5 * erfc(x / _SQRT2))
    if x > -37.0:
        return log(0.5 * erfc(-x / _SQRT2))
    inv2 = 1.0 / (x * x)
    series = 1.0 + inv2 * (-1.0 + inv2 * (3.0 + inv2 * (-15.0 + inv2 * 105.0)))
    return -0.5 * x * x - _LOG_SQRT_2PI - log(-x) + log(series)


cdef double _norm_quantile(double p) nogil:
    cdef double q, r, x, e, u
    if p <= 0.0 or p >= 1.0:
        return NAN
    if p < 0.02425:
        q = sqrt(-2.0 * log(p))
        x = (((((( -7.784894002430293e-03 * q + -3.223964580411365e-01) * q
                 + -2.400758277161838e+00) * q + -2.549732539343734e+00) * q
                 + 4.374664141464968e+00) * q + 2.938163982698783e+00)
             / ((((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
                  + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0))
    elif p <= 1.0 - 0.02425:
        q = p - 0.5
        r = q * q
        x = (((((( -3.969683028665376e+01 * r + 2.209460984245205e+02) * r
                 + -2.759285104469687e+02) * r + 1.383577518672690e+02) * r
                 + -3.066479806614716e+01) * r + 2.506628277459239e+00) * q
             / ((((( -5.447609879822406e+01 * r + 1.615858368580409e+02) * r
                   + -1.556989798598866e+02) * r + 6.680131188771972e+01) * r
                   + -1.328068155288572e+01) * r + 1.0))
    else:
        q = sqrt(-2.0 * log1p(-p))
        x = -(((((( -7.784894002430293e-03 * q + -3.223964580411365e-01) * q
                  + -2.400758277161838e+00) * q + -2.549732539343734e+00) * q
                  + 4.374664141464968e+00) * q + 2.938163982698783e+00)
              / ((((7.784695709041462e-03 * q + 3.224671290700398e-01) * q
                   + 2.445134137142996e+00) * q + 3.754408661907416e+00) * q + 1.0))
    e = 0.5 * erfc(-x / _SQRT2) - p
    u = e * sqrt(2.0 * _PI) * exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


# ---------------------------------------------------------------------------
# regularized incomplete beta -> Student t
# ---------------------------------------------------------------------------

cdef double _betacf(double a, double b, double x) nogil:
    cdef double qab = a + b
    cdef double qap = a + 1.0
    cdef double qam = a - 1.0
    cdef double c = 1.0
    cdef double d = 1.0 - qab * x / qap
    cdef double h, aa, delta
    cdef int m, m2
    if fabs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAXIT + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if fabs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if fabs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if fabs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if fabs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < _CF_EPS:
            break
    return h


cdef double _betainc_reg(double a, double b, double x) nogil:
    cdef double ln_bt, bt
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = (lgamma(a + b) - lgamma(a) - lgamma(b)
             + a * log(x) + b * log1p(-x))
    bt = exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


cdef double _t_cdf(double t, double df) nogil:
    cdef double x = df / (df + t * t)
    cdef double p = 0.5 * _betainc_reg(0.5 * df, 0.5, x)
    return p if t <= 0.0 else 1.0 - p


cdef double _t_pdf(double t, double df) nogil:
    cdef double ln = (lgamma(0.5 * (df + 1.0)) - lgamma(0.5 * df)
                      - 0.5 * log(df * _PI)
                      - 0.5 * (df + 1.0) * log1p(t * t / df))
    return exp(ln)


cdef double _t_upper_guess(double ph, double df) nogil:
    cdef double z = _norm_quantile(ph)
    cdef double z2 = z * z
    cdef double g1 = z * (z2 + 1.0) / 4.0
    cdef double g2 = z * (5.0 * z2 * z2 + 16.0 * z2 + 3.0) / 96.0
    cdef double g3 = z * (3.0 * z2 * z2 * z2 + 19.0 * z2 * z2 + 17.0 * z2 - 15.0) / 384.0
    cdef double invdf = 1.0 / df
    cdef double t = z + invdf * (g1 + invdf * (g2 + invdf * g3))
    return t if t > z else z


cdef double _t_quantile(double p, double df) nogil:
    cdef double sign, ph, t, lo, hi, f, step, t_new
    cdef int i
    if p == 0.5:
        return 0.0
    sign = 1.0 if p > 0.5 else -1.0
    ph = p if p > 0.5 else 1.0 - p
    t = _t_upper_guess(ph, df)
    lo = 0.0
    hi = t if t > 1.0 else 1.0
    for i in range(300):
        if _t_cdf(hi, df) >= ph:
            break
        lo = hi
        hi *= 2.0
    if t < lo or t > hi:
        t = 0.5 * (lo + hi)
    for i in range(100):
        f = _t_cdf(t, df) - ph
        if f > 0.0:
            hi = t
        else:
            lo = t
        if fabs(f) < 1e-14:
            break
        step = f / _t_pdf(t, df)
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

cdef double _gammainc_reg(double a, double x) nogil:
    cdef double ap, term, total, b, c, d, h, an, delta
    cdef int i
    if x <= 0.0:
        return 0.0
    if x < a + 1.0:
        ap = a
        term = 1.0 / a
        total = term
        for i in range(_CF_MAXIT * 2):
            ap += 1.0
            term *= x / ap
            total += term
            if fabs(term) < fabs(total) * _CF_EPS:
                break
        return total * exp(-x + a * log(x) - lgamma(a))
    b = x + 1.0 - a
    c = 1.0 / _CF_TINY
    d = 1.0 / b
    h = d
    for i in range(1, _CF_MAXIT * 2):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if fabs(d) < _CF_TINY:
            d = _CF_TINY
        c = b + an / c
        if fabs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < _CF_EPS:
            break
    return 1.0 - exp(-x + a * log(x) - lgamma(a)) * h


cdef double _gamma_pdf_std(double a, double x) nogil:
    if x <= 0.0:
        return 0.0
    return exp((a - 1.0) * log(x) - x - lgamma(a))


cdef double _gamma_quantile(double p, double shape, double scale) nogil:
    cdef double a = shape
    cdef double z, g, x, lo, hi, f, pdf, x_new
    cdef int i
    z = _norm_quantile(p)
    g = 1.0 - 1.0 / (9.0 * a) + z / (3.0 * sqrt(a))
    x = a * g * g * g if g > 0.0 else 0.0
    if x <= 0.0:
        x = exp((log(p) + lgamma(a + 1.0)) / a)
    lo = 0.0
    hi = x if x > 1.0 else 1.0
    for i in range(400):
        if _gammainc_reg(a, hi) >= p:
            break
        lo = hi
        hi *= 2.0
    if x <= lo or x >= hi:
        x = 0.5 * (lo + hi)
    for i in range(100):
        f = _gammainc_reg(a, x) - p
        if f > 0.0:
            hi = x
        else:
            lo = x
        if fabs(f) < 1e-14:
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
# Copas conditional likelihood and its bounded Nelder-Mead fit
# ---------------------------------------------------------------------------

cdef double _copas_loglik(double mu, double tau2, double rho, double a1,
                          double a2, double[:] y, double[:] se) nogil:
    cdef double total = 0.0
    cdef double v, sig2, sig, u, resid, rho_t, denom, vv
    cdef Py_ssize_t i, n = y.shape[0]
    for i in range(n):
        v = se[i] * se[i]
        sig2 = tau2 + v
        sig = sqrt(sig2)
        u = a1 + a2 / se[i]
        resid = (y[i] - mu) / sig
        rho_t = rho * se[i] / sig
        denom = sqrt(1.0 - rho_t * rho_t)
        vv = (u + rho_t * resid) / denom
        total += (-0.5 * resid * resid - _LOG_SQRT_2PI - log(sig)
                  + _log_norm_cdf(vv) - _log_norm_cdf(u))
    return total


cdef inline double _clip1(double x, double lo, double hi) nogil:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


cdef void _nm_copas(double[:] y, double[:] se, double a1, double a2,
                    double* start, double* lower, double* upper,
                    int max_eval, double diam_tol, double flat_tol,
                    double* out_x, double* out_f, int* out_conv,
                    int* out_neval) nogil:
    """Nelder-Mead (k=3, maximization) on the Copas likelihood with box clip."""
    cdef int k = 3
    cdef double verts[4][3]
    cdef double fvals[4]
    cdef int order_idx[4]
    cdef double centroid[3]
    cdef double xr[3]
    cdef double xe[3]
    cdef double xc[3]
    cdef double h, fr, fe, fc, diam, d, tmpf
    cdef int i, j, m, n_eval, tmpi, converged

    for i in range(k):
        verts[0][i] = _clip1(start[i], lower[i], upper[i])
    for j in range(k):
        h = 0.05 * (upper[j] - lower[j])
        if h == 0.0:
            h = 1e-8
        for i in range(k):
            verts[j + 1][i] = verts[0][i]
        verts[j + 1][j] = _clip1(verts[0][j] + h, lower[j], upper[j])
        if verts[j + 1][j] == verts[0][j]:
            verts[j + 1][j] = _clip1(verts[0][j] - h, lower[j], upper[j])
    for j in range(k + 1):
        fvals[j] = _copas_loglik(verts[j][0], verts[j][1] * verts[j][1],
                                 verts[j][2], a1, a2, y, se)
    n_eval = k + 1
    converged = 0

    while n_eval < max_eval:
        # insertion sort, descending f, stable on ties
        for j in range(k + 1):
            order_idx[j] = j
        for j in range(1, k + 1):
            tmpi = order_idx[j]
            m = j - 1
            while m >= 0 and fvals[order_idx[m]] < fvals[tmpi]:
                order_idx[m + 1] = order_idx[m]
                m -= 1
            order_idx[m + 1] = tmpi
        # reorder in place via temp copies
        _reorder(verts, fvals, order_idx, k)

        diam = 0.0
        for j in range(1, k + 1):
            for i in range(k):
                d = fabs(verts[j][i] - verts[0][i])
                if d > diam:
                    diam = d
        if diam < diam_tol:
            converged = 1
            break
        if flat_tol > 0.0 and fvals[0] - fvals[k] <= flat_tol * (1.0 + fabs(fvals[0])):
            converged = 1
            break

        for i in range(k):
            centroid[i] = (verts[0][i] + verts[1][i] + verts[2][i]) / 3.0
        for i in range(k):
            xr[i] = _clip1(centroid[i] + (centroid[i] - verts[k][i]),
                           lower[i], upper[i])
        fr = _copas_loglik(xr[0], xr[1] * xr[1], xr[2], a1, a2, y, se)
        n_eval += 1
        if fr > fvals[0]:
            for i in range(k):
                xe[i] = _clip1(centroid[i] + 2.0 * (centroid[i] - verts[k][i]),
                               lower[i], upper[i])
            fe = _copas_loglik(xe[0], xe[1] * xe[1], xe[2], a1, a2, y, se)
            n_eval += 1
            if fe > fr:
                for i in range(k):
                    verts[k][i] = xe[i]
                fvals[k] = fe
            else:
                for i in range(k):
                    verts[k][i] = xr[i]
                fvals[k] = fr
        elif fr > fvals[k - 1]:
            for i in range(k):
                verts[k][i] = xr[i]
            fvals[k] = fr
        else:
            if fr > fvals[k]:
                for i in range(k):
                    xc[i] = _clip1(centroid[i] + 0.5 * (centroid[i] - verts[k][i]),
                                   lower[i], upper[i])
            else:
                for i in range(k):
                    xc[i] = _clip1(centroid[i] - 0.5 * (centroid[i] - verts[k][i]),
                                   lower[i], upper[i])
            fc = _copas_loglik(xc[0], xc[1] * xc[1], xc[2], a1, a2, y, se)
            n_eval += 1
            tmpf = fr if fr < fvals[k] else fvals[k]
            if fc > tmpf:
                for i in range(k):
                    verts[k][i] = xc[i]
                fvals[k] = fc
            else:
                for j in range(1, k + 1):
                    for i in range(k):
                        verts[j][i] = _clip1(
                            verts[0][i] + 0.5 * (verts[j][i] - verts[0][i]),
                            lower[i], upper[i])
                    fvals[j] = _copas_loglik(verts[j][0],
                                             verts[j][1] * verts[j][1],
                                             verts[j][2], a1, a2, y, se)
                n_eval += k

    for j in range(k + 1):
        order_idx[j] = j
    for j in range(1, k + 1):
        tmpi = order_idx[j]
        m = j - 1
        while m >= 0 and fvals[order_idx[m]] < fvals[tmpi]:
            order_idx[m + 1] = order_idx[m]
            m -= 1
        order_idx[m + 1] = tmpi
    _reorder(verts, fvals, order_idx, k)

    for i in range(k):
        out_x[i] = verts[0][i]
    out_f[0] = fvals[0]
    out_conv[0] = converged
    out_neval[0] = n_eval


cdef void _reorder(double verts[4][3], double* fvals, int* order_idx, int k) nogil:
    cdef double tmp_v[4][3]
    cdef double tmp_f[4]
    cdef int i, j
    for j in range(k + 1):
        for i in range(k):
            tmp_v[j][i] = verts[order_idx[j]][i]
        tmp_f[j] = fvals[order_idx[j]]
    for j in range(k + 1):
        for i in range(k):
            verts[j][i] = tmp_v[j][i]
        fvals[j] = tmp_f[j]


# ---------------------------------------------------------------------------
# Python-visible wrappers
# ---------------------------------------------------------------------------

def norm_cdf(double x):
    return _norm_cdf(x)


def norm_sf(double x):
    return _norm_sf(x)


def norm_pdf(double x):
    return exp(-0.5 * x * x - _LOG_SQRT_2PI)


def log_norm_cdf(double x):
    return _log_norm_cdf(x)


def norm_quantile(double p):
    return _norm_quantile(p)


def betainc_reg(double a, double b, double x):
    return _betainc_reg(a, b, x)


def t_cdf(double t, double df):
    return _t_cdf(t, df)


def t_pdf(double t, double df):
    return _t_pdf(t, df)


def t_quantile(double p, double df):
    return _t_quantile(p, df)


def gammainc_reg(double a, double x):
    return _gammainc_reg(a, x)


def gamma_quantile(double p, double shape, double scale):
    return _gamma_quantile(p, shape, scale)


def t_quantile_many(double p, df):
    cdef double[:] dv = np.ascontiguousarray(df, dtype=np.float64).reshape(-1)
    dfa = np.asarray(df, dtype=np.float64)
    out = np.empty(dfa.size, dtype=np.float64)
    cdef double[:] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(dv.shape[0]):
            ov[i] = _t_quantile(p, dv[i])
    return out.reshape(dfa.shape)


def nelder_mead_box(f, start, lower, upper, max_eval=2000, diam_tol=1e-8):
    # generic callable objective: delegate to the pure-Python implementation
    from . import pykernels
    return pykernels.nelder_mead_box(f, start, lower, upper,
                                     max_eval=max_eval, diam_tol=diam_tol)


def copas_loglik_arr(double mu, double tau2, double rho, double a1, double a2,
                     y, se):
    cdef double[:] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[:] sv = np.ascontiguousarray(se, dtype=np.float64)
    return _copas_loglik(mu, tau2, rho, a1, a2, yv, sv)


def copas_fit_point(y, se, double a1, double a2, start, lower, upper,
                    int max_eval=2000, double diam_tol=1e-8):
    # tau2 runs on the s^2 scale (boundary becomes interior; see pykernels),
    # with deterministic fresh-simplex restarts from the incumbent
    cdef double[:] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[:] sv = np.ascontiguousarray(se, dtype=np.float64)
    cdef double c_start[3]
    cdef double c_lower[3]
    cdef double c_upper[3]
    cdef double out_x[3]
    cdef double out_f, fx, s_hi
    cdef int out_conv, out_neval
    cdef int i, n_eval, attempt
    cdef bint converged = False, improved
    s_hi = sqrt(upper[1] if upper[1] > 0.0 else 0.0)
    c_lower[0] = lower[0]
    c_lower[1] = -s_hi
    c_lower[2] = lower[2]
    c_upper[0] = upper[0]
    c_upper[1] = s_hi
    c_upper[2] = upper[2]
    c_start[0] = start[0]
    c_start[1] = sqrt(start[1] if start[1] > 0.0 else 0.0)
    c_start[2] = start[2]
    fx = -1e308
    n_eval = 0
    for attempt in range(3):
        with nogil:
            _nm_copas(yv, sv, a1, a2, c_start, c_lower, c_upper,
                      max_eval, diam_tol, 1e-12, out_x, &out_f, &out_conv,
                      &out_neval)
        n_eval += out_neval
        improved = out_f > fx + 1e-9 * (1.0 + fabs(out_f))
        fx = out_f
        for i in range(3):
            c_start[i] = out_x[i]
        converged = out_conv != 0
        if converged and not improved:
            break
    return out_x[0], out_x[1] * out_x[1], out_x[2], fx, converged, n_eval
