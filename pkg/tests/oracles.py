"""Independent reference computations used by the tests.

None of these call the package's prox or dual code paths.
"""
import itertools

import numpy as np
from scipy.optimize import brentq, minimize


def group_objective(x, a, w, rho):
    return rho * float(np.sum(w * np.abs(x))) ** 2 + 0.5 * float(np.sum((x - a) ** 2))


_MASKS = {}


def _masks(n):
    if n not in _MASKS:
        _MASKS[n] = np.array(list(itertools.product([False, True], repeat=n)), dtype=bool)
    return _MASKS[n]


def prox_enumeration(a, w, rho):
    """Prox of ``rho (sum w|x|)^2`` at ``a`` by checking every support pattern.

    For a support S the stationarity conditions force
    ``|x_i| = |a_i| - 2 rho w_i t`` on S with ``t = sum_S w|x|``, so
    ``t = sum_S w|a| / (1 + 2 rho sum_S w^2)``. A pattern is kept when the
    implied magnitudes are positive on S and ``|a_i| <= 2 rho w_i t`` off S;
    the kept candidate with the lowest objective is returned.
    """
    a = np.asarray(a, dtype=float)
    w = np.asarray(w, dtype=float)
    mag = np.abs(a)
    M = _masks(a.size)
    s = M @ (w * mag)
    L = M @ (w * w)
    t = s / (1.0 + 2.0 * rho * L)
    X = np.where(M, mag[None, :] - 2.0 * rho * w[None, :] * t[:, None], 0.0)
    slack = 1e-12 * (1.0 + mag.max())
    on_ok = np.all(np.where(M, X > 0, True), axis=1)
    off_ok = np.all(np.where(M, True, mag[None, :] <= 2.0 * rho * w[None, :] * t[:, None] + slack),
                    axis=1)
    best, best_val = None, np.inf
    for k in np.flatnonzero(on_ok & off_ok):
        xk = np.sign(a) * X[k]
        val = group_objective(xk, a, w, rho)
        if val < best_val:
            best, best_val = xk, val
    if best is None:
        raise AssertionError("no pattern satisfies the optimality conditions")
    return best


def prox_conjugate_regularizer(z, groups, w, lam, nu):
    """``Prox_{p*/nu}(z)`` for ``p = lam * sum_g (sum w|x|)^2``.

    ``p*(z) = sum_g max_i (|z_i|/w_i)^2 / (4 lam)``. Per group the prox
    clips ``z`` to ``|y_i| <= w_i t`` where ``t`` minimizes the convex scalar
    ``c t^2 + 0.5 sum (|z_i| - w_i t)_+^2`` with ``c = 1 / (4 lam nu)``.
    """
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    c = 1.0 / (4.0 * lam * nu)
    for g in groups:
        zg, wg = np.abs(z[g]), w[g]

        def deriv(t, zg=zg, wg=wg):
            return 2.0 * c * t - float(np.sum(wg * np.maximum(zg - wg * t, 0.0)))

        hi = float(np.max(zg / wg))
        t = 0.0 if hi == 0.0 else brentq(deriv, 0.0, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
        out[g] = np.sign(z[g]) * np.minimum(zg, wg * t)
    return out


def logistic_conjugate_prox(z, b, nu):
    """``Prox_{h*/nu}(z)`` for the logistic loss, one bisection per coordinate.

    With ``t = -u b`` in (0, 1) the prox solves
    ``b (log(1 - t) - log t) / nu + u - z = 0``.
    """
    out = np.empty_like(z)
    for i, (zi, bi) in enumerate(zip(z, b)):
        def f(t, zi=zi, bi=bi):
            return bi * (np.log1p(-t) - np.log(t)) / nu + (-t * bi) - zi

        t = brentq(f, 1e-300, 1.0 - 1e-16, xtol=1e-300, rtol=1e-15, maxiter=1000)
        out[i] = -t * bi
    return out


def scipy_exclusive_lasso(A, b, lam, groups, w=None, loss="least_squares"):
    """Objective minimum by L-BFGS-B on the split ``x = x+ - x-``."""
    m, n = A.shape
    w = np.ones(n) if w is None else w
    gid = np.empty(n, dtype=int)
    for k, g in enumerate(groups):
        gid[g] = k

    def fun(z):
        xp, xm = z[:n], z[n:]
        x = xp - xm
        r = A @ x
        if loss == "least_squares":
            val = 0.5 * float((r - b) @ (r - b))
            gr = r - b
        else:
            val = float(np.sum(np.logaddexp(0.0, -b * r)))
            gr = -b / (1.0 + np.exp(b * r))
        sums = np.bincount(gid, weights=w * (xp + xm), minlength=len(groups))
        val += lam * float(sums @ sums)
        gx = A.T @ gr
        greg = 2.0 * lam * sums[gid] * w
        return val, np.concatenate([gx + greg, -gx + greg])

    best = None
    for seed in range(3):
        z0 = np.random.default_rng(seed).uniform(0, 0.1, 2 * n)
        res = minimize(fun, z0, jac=True, method="L-BFGS-B", bounds=[(0, None)] * (2 * n),
                       options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 50000, "maxcor": 50})
        if best is None or res.fun < best.fun:
            best = res
    return best.x[:n] - best.x[n:], float(best.fun)


def central_difference_grad(f, u, h):
    g = np.empty_like(u)
    for i in range(u.size):
        e = np.zeros_like(u)
        e[i] = h
        g[i] = (f(u + e) - f(u - e)) / (2.0 * h)
    return g
