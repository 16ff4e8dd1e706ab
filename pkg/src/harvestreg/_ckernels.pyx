# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled HJB row kernel.

Mirrors ``_kernels_py.hjb_rhs`` operation by operation so the two backends
agree to rounding.
"""
import numpy as np

from libc.math cimport fabs, floor

NAME = "cython"


cdef struct Tab:
    const double* v
    const double* m
    double h
    int k


cdef inline double _theta(double u, Tab* tab) noexcept nogil:
    cdef double a, s, t, omt, val
    cdef int i
    if u <= -1.0:
        return 0.0
    if u >= 1.0:
        return 1.0
    a = -fabs(u)
    s = (a + 1.0) / tab.h
    i = <int>floor(s)
    if i < 0:
        i = 0
    elif i > tab.k - 2:
        i = tab.k - 2
    t = s - i
    omt = 1.0 - t
    val = ((1.0 + 2.0 * t) * omt * omt * tab.v[i]
           + t * omt * omt * tab.h * tab.m[i]
           + t * t * (3.0 - 2.0 * t) * tab.v[i + 1]
           + t * t * (t - 1.0) * tab.h * tab.m[i + 1])
    if u > 0.0:
        return 1.0 - val
    return val


cdef inline double _abs_eps(double x, double eps, Tab* tab) noexcept nogil:
    cdef double k = 4.0 / eps
    return fabs(x) * (_theta(-k * x - 3.0, tab) + _theta(k * x - 3.0, tab))


cdef inline double _max_eps(double x, double y, double eps, Tab* tab) noexcept nogil:
    return 0.5 * (_abs_eps(x - y, eps, tab) + x + y)


cdef inline double _fmax(double a, double b) noexcept nogil:
    return a if a >= b else b


def hjb_rhs(const double[::1] w, const double[::1] pi, const double[::1] drift0, ctx, double dy,
            bint smooth, bint diffusion=True):
    from .smoothing import theta_table

    table = theta_table()
    cdef const double[::1] tv = table.values
    cdef const double[::1] tm = table.slopes
    cdef Tab tab
    tab.v = &tv[0]
    tab.m = &tm[0]
    tab.h = table.h
    tab.k = tv.shape[0]

    cdef double kap = ctx.kappa
    cdef double pen = ctx.penalty
    cdef double ml = ctx.m_lower
    cdef double mu = ctx.m_upper
    cdef double gam = ctx.Gamma
    cdef double eps = ctx.epsilon
    cdef double hw = ctx.window
    cdef double hs2 = 0.5 * ctx.sigma ** 2
    cdef double half = 0.5 * eps
    cdef int n = w.shape[0]
    cdef int j
    cdef double d1, d2, central, a, p, lin, common, interior, upper, lower, s
    cdef double k1, k2, q, wu, wl, lo_w, up_w, core
    out = np.empty(n)
    cdef double[::1] o = out

    with nogil:
        for j in range(n):
            p = pi[j]
            if j == 0:
                d1 = (w[1] - w[0]) / dy
                d2 = 0.0
            elif j == n - 1:
                d1 = (w[n - 1] - w[n - 2]) / dy
                d2 = 0.0
            else:
                central = (w[j + 1] - w[j - 1]) / (2.0 * dy)
                a = p - central / kap
                if a < -ml:
                    a = -ml
                if a > mu:
                    a = mu
                if drift0[j] - a > 0.0:
                    d1 = (w[j + 1] - w[j]) / dy
                else:
                    d1 = (w[j] - w[j - 1]) / dy
                d2 = (w[j + 1] - 2.0 * w[j] + w[j - 1]) / (dy * dy)

            k1 = (d1 - p - 0.5 * ml) * ml - pen * (ml + p) ** 2
            k2 = (-d1 + p - 0.5 * mu) * mu - pen * _fmax(mu - p, 0.0) ** 2
            lin = p * kap - d1
            common = pen * p * p
            interior = lin * lin / (2.0 * kap) - common
            upper = -0.5 * kap * mu ** 2 + lin * mu - common
            lower = -0.5 * kap * ml ** 2 - lin * ml - common
            s = lin / kap
            if smooth:
                wu = _theta((s - mu) / hw, &tab)
                wl = _theta((-ml - s) / hw, &tab)
                q = (1.0 - wu - wl) * interior + wu * upper + wl * lower
                lo_w = _theta(2.0 * (d1 - gam) - 1.0, &tab)
                up_w = _theta(-2.0 * (gam + d1) - 1.0, &tab)
                q = q * (1.0 - lo_w - up_w) + lower * lo_w + upper * up_w
                core = _max_eps(k1, _max_eps(k2, q, half, &tab), half, &tab)
            else:
                if s > mu:
                    q = upper
                elif s < -ml:
                    q = lower
                else:
                    q = interior
                core = _fmax(_fmax(k1, k2), q)
            o[j] = core + drift0[j] * d1
            if diffusion:
                o[j] = o[j] + hs2 * d2
    return out
