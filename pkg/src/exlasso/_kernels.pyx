# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: grouped sorting-threshold prox and scalar logistic prox.

Both functions mirror ``exlasso._fallback`` operation for operation. The prox
agrees bitwise; the logistic kernel may differ in the last few bits because
libm ``exp`` and numpy's vectorized ``exp`` round differently.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs
from libcpp.algorithm cimport sort
from libcpp.pair cimport pair
from libcpp.vector cimport vector

cnp.import_array()


def group_prox(const double[::1] a, const double[::1] w, const cnp.int64_t[::1] offsets,
               double rho):
    """Prox of ``rho * sum_g ||w_g o x_g||_1^2`` for contiguous groups.

    Returns ``(x, alpha_bar, active)`` with one threshold per group.
    """
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t ngroups = offsets.shape[0] - 1
    x_arr = np.zeros(n, dtype=np.float64)
    alpha_arr = np.zeros(ngroups, dtype=np.float64)
    active_arr = np.ones(n, dtype=np.bool_)
    cdef double[::1] x = x_arr
    cdef double[::1] alpha_bar = alpha_arr
    cdef cnp.npy_bool[::1] active = active_arr

    cdef vector[pair[double, Py_ssize_t]] keys
    cdef Py_ssize_t g, i, j, lo, hi, size, kbest, idx
    cdef double s, L, alpha, best, sbest, dbest, mag, num, wi, ai

    for g in range(ngroups):
        lo = offsets[g]
        hi = offsets[g + 1]
        size = hi - lo
        keys.clear()
        for i in range(lo, hi):
            # ascending on (-ratio, index) == stable descending on ratio
            keys.push_back(pair[double, Py_ssize_t](-fabs(a[i]) / w[i], i))
        sort(keys.begin(), keys.end())

        s = 0.0
        L = 0.0
        best = -1.0
        sbest = 0.0
        dbest = 1.0
        for j in range(size):
            idx = keys[j].second
            s = s + w[idx] * fabs(a[idx])
            L = L + w[idx] * w[idx]
            alpha = s / (1.0 + 2.0 * rho * L)
            if alpha > best:
                best = alpha
                sbest = s
                dbest = 1.0 + 2.0 * rho * L
        if sbest == 0.0:
            alpha_bar[g] = 0.0
            continue
        alpha_bar[g] = sbest / dbest
        for i in range(lo, hi):
            ai = a[i]
            mag = fabs(ai)
            num = mag * dbest - 2.0 * rho * w[i] * sbest
            if num > 0.0:
                if ai >= 0.0:
                    x[i] = num / dbest
                else:
                    x[i] = -(num / dbest)
                active[i] = False
    return x_arr, alpha_arr, active_arr


cdef inline double _sigmoid_neg(double t) nogil:
    # 1 / (1 + exp(t)) without overflow
    cdef double e
    if t >= 0.0:
        e = exp(-t)
        return e / (1.0 + e)
    return 1.0 / (1.0 + exp(t))


def logistic_prox(const double[::1] v, const double[::1] b, double nu,
                  double tol=1e-12, int max_iter=50):
    """Coordinatewise argmin of ``log(1 + exp(-b y)) + (y - v)^2 / (2 nu)``.

    Newton on the margin ``t = b y`` for ``g(t) = t - b v - nu / (1 + exp(t))``.
    ``g`` is convex for ``t < 0`` and concave for ``t > 0``, so starting on the
    side of 0 away from the root makes the iterates monotone. Bisection on the
    bracket ``[b v, b v + nu]`` guards against roundoff.
    """
    cdef Py_ssize_t m = v.shape[0]
    y_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] y = y_arr
    cdef Py_ssize_t i
    cdef int it
    cdef double vt, t, lo, hi, s, g, dg, tnew, eps = 2.220446049250313e-16
    cdef bint done
    for i in range(m):
        vt = b[i] * v[i]
        lo = vt
        hi = vt + nu
        if -vt - 0.5 * nu < 0.0:
            t = vt if vt > 0.0 else 0.0
        else:
            t = hi if hi < 0.0 else 0.0
        done = False
        for it in range(max_iter):
            s = _sigmoid_neg(t)
            g = t - vt - nu * s
            if fabs(g) <= tol + 8.0 * eps * (fabs(t) + fabs(vt)):
                done = True
                break
            if g > 0.0:
                hi = t
            else:
                lo = t
            dg = 1.0 + nu * s * (1.0 - s)
            tnew = t - g / dg
            if tnew < lo or tnew > hi:
                tnew = 0.5 * (lo + hi)
            if fabs(tnew - t) <= 4.0 * eps * (1.0 + fabs(t)):
                t = tnew
                done = True
                break
            t = tnew
        if not done:
            raise RuntimeError(f"logistic prox did not converge at coordinate {i}")
        y[i] = b[i] * t
    return y_arr
