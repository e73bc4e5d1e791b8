"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""
import numpy as np


def _prox_block(a, w, rho):
    # a, w: (ngroups, size) with rows = groups
    mag = np.abs(a)
    order = np.argsort(-mag / w, axis=1, kind="stable")
    ms = np.take_along_axis(mag, order, axis=1)
    ws = np.take_along_axis(w, order, axis=1)
    s = np.cumsum(ws * ms, axis=1)
    L = np.cumsum(ws * ws, axis=1)
    denom = 1.0 + 2.0 * rho * L
    alpha = s / denom
    k = np.argmax(alpha, axis=1)
    rows = np.arange(a.shape[0])
    sbest = s[rows, k]
    dbest = denom[rows, k]
    num = mag * dbest[:, None] - 2.0 * rho * w * sbest[:, None]
    keep = num > 0.0
    x = np.where(keep, num / dbest[:, None], 0.0)
    x = np.where(a >= 0.0, x, -x)
    alpha_bar = np.where(sbest == 0.0, 0.0, sbest / dbest)
    return x, alpha_bar, ~keep


def group_prox(a, w, offsets, rho):
    """Same contract as ``_kernels.group_prox``."""
    a = np.asarray(a, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.int64)
    sizes = np.diff(offsets)
    ngroups = len(sizes)
    if ngroups and np.all(sizes == sizes[0]) and sizes[0] > 0:
        p = int(sizes[0])
        x, alpha_bar, active = _prox_block(a.reshape(ngroups, p), w.reshape(ngroups, p), rho)
        return x.ravel(), alpha_bar, active.ravel()
    x = np.zeros_like(a)
    alpha_bar = np.zeros(ngroups)
    active = np.ones(a.shape[0], dtype=bool)
    for g in range(ngroups):
        lo, hi = offsets[g], offsets[g + 1]
        if hi == lo:
            continue
        xg, ag, actg = _prox_block(a[None, lo:hi], w[None, lo:hi], rho)
        x[lo:hi] = xg[0]
        alpha_bar[g] = ag[0]
        active[lo:hi] = actg[0]
    return x, alpha_bar, active


def _sigmoid_neg(t):
    # 1 / (1 + exp(t)) without overflow
    out = np.empty_like(t)
    pos = t >= 0.0
    e = np.exp(-t[pos])
    out[pos] = e / (1.0 + e)
    out[~pos] = 1.0 / (1.0 + np.exp(t[~pos]))
    return out


def logistic_prox(v, b, nu, tol=1e-12, max_iter=50):
    """Same contract as ``_kernels.logistic_prox``."""
    eps = np.finfo(np.float64).eps
    v = np.asarray(v, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    vt = b * v
    lo = vt.copy()
    hi = vt + nu
    right = -vt - 0.5 * nu < 0.0
    t = np.where(right, np.maximum(vt, 0.0), np.minimum(hi, 0.0))
    live = np.ones(v.shape[0], dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(live)
        if idx.size == 0:
            break
        ti = t[idx]
        s = _sigmoid_neg(ti)
        g = ti - vt[idx] - nu * s
        ok = np.abs(g) <= tol + 8.0 * eps * (np.abs(ti) + np.abs(vt[idx]))
        live[idx[ok]] = False
        idx, ti, s, g = idx[~ok], ti[~ok], s[~ok], g[~ok]
        pos = g > 0.0
        hi[idx[pos]] = ti[pos]
        lo[idx[~pos]] = ti[~pos]
        dg = 1.0 + nu * s * (1.0 - s)
        tnew = ti - g / dg
        out = (tnew < lo[idx]) | (tnew > hi[idx])
        tnew[out] = 0.5 * (lo[idx[out]] + hi[idx[out]])
        tiny = np.abs(tnew - ti) <= 4.0 * eps * (1.0 + np.abs(ti))
        t[idx] = tnew
        live[idx[tiny]] = False
    if live.any():
        raise RuntimeError(
            f"logistic prox did not converge at coordinate {int(np.flatnonzero(live)[0])}"
        )
    return b * t
