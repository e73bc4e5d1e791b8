"""Group bookkeeping, the exclusive lasso prox, and its HS-Jacobian element.

The regularizer is ``sum_g ||w_g o x_g||_1^2`` over a disjoint partition of
the coordinates. Its prox splits over groups; within a group it is a sorting
threshold ``x = sign(a) o (|a| - 2 rho alpha_bar w)^+``. The Jacobian element
returned here is, per group, a 0-1 diagonal minus one rank-one term.
"""
from dataclasses import dataclass, field

import numpy as np

from . import kernels


class DimensionError(ValueError):
    """Vector length does not match the partition."""


class GroupPartition:
    """Disjoint groups covering ``range(n)`` with a positive weight per coordinate.

    Indices are 0-based. Groups are stored in the given order; coordinates are
    additionally laid out group-contiguously (``order``/``offsets``) for the
    kernels.
    """

    def __init__(self, groups, weights=None, n=None):
        groups = [np.asarray(g, dtype=np.int64).ravel() for g in groups]
        if not groups:
            raise ValueError("partition needs at least one group")
        if any(len(g) == 0 for g in groups):
            raise ValueError("empty group")
        order = np.concatenate(groups)
        if n is None:
            n = len(order)
        if len(order) != n or order.min() < 0 or order.max() >= n:
            raise ValueError("groups must cover exactly range(n)")
        if len(np.unique(order)) != n:
            raise ValueError("groups overlap")
        if weights is None:
            weights = np.ones(n)
        weights = np.asarray(weights, dtype=np.float64).ravel()
        if weights.shape != (n,):
            raise DimensionError(f"weights have shape {weights.shape}, expected ({n},)")
        if not np.all(weights > 0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and strictly positive")

        self.groups = groups
        self.n = int(n)
        self.weights = weights
        self.order = order
        self.offsets = np.zeros(len(groups) + 1, dtype=np.int64)
        self.offsets[1:] = np.cumsum([len(g) for g in groups])
        self.group_id = np.empty(n, dtype=np.int64)
        for k, g in enumerate(groups):
            self.group_id[g] = k
        self.contiguous = bool(np.array_equal(order, np.arange(n)))
        self.weights_perm = np.ascontiguousarray(weights[order])

    @classmethod
    def contiguous_blocks(cls, sizes, weights=None):
        """Consecutive blocks, e.g. ``sizes=[3, 2]`` gives ``[0,1,2], [3,4]``."""
        bounds = np.concatenate([[0], np.cumsum(sizes)])
        groups = [np.arange(bounds[i], bounds[i + 1]) for i in range(len(sizes))]
        return cls(groups, weights)

    @classmethod
    def from_labels(cls, labels, weights=None):
        """One group per distinct label, in order of first appearance."""
        labels = list(labels)
        seen = {}
        for i, lab in enumerate(labels):
            seen.setdefault(lab, []).append(i)
        part = cls(list(seen.values()), weights)
        part.labels = list(seen.keys())
        return part

    @property
    def ngroups(self):
        return len(self.groups)

    def __len__(self):
        return self.n

    def __repr__(self):
        return f"GroupPartition(n={self.n}, ngroups={self.ngroups})"

    def check(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n,):
            raise DimensionError(f"vector has shape {x.shape}, expected ({self.n},)")
        return x

    def to_perm(self, x):
        return x if self.contiguous else x[self.order]

    def from_perm(self, xp):
        if self.contiguous:
            return xp
        out = np.empty_like(xp)
        out[self.order] = xp
        return out


@dataclass
class ProxResult:
    """Prox output with the certificate needed to build the Jacobian.

    ``alpha_bar[g]`` is the threshold of group ``g``; ``active[i]`` is True
    where the output is zero; ``sign`` uses sign(0) = +1.
    """

    x: np.ndarray
    alpha_bar: np.ndarray
    active: np.ndarray
    sign: np.ndarray
    rho: float


@dataclass
class JacobianElement:
    """Groupwise ``Diag(mask) - coeff_g * v_g v_g^T``, never stored densely."""

    mask: np.ndarray
    v: np.ndarray
    coeff: np.ndarray
    group_id: np.ndarray = field(repr=False)

    def apply(self, d):
        d = np.asarray(d, dtype=np.float64)
        t = np.bincount(self.group_id, weights=self.v * d, minlength=len(self.coeff))
        return self.mask * d - self.v * (self.coeff * t)[self.group_id]

    __matmul__ = apply

    def to_dense(self):
        n = len(self.mask)
        M = np.diag(self.mask)
        same = self.group_id[:, None] == self.group_id[None, :]
        M -= same * self.coeff[self.group_id][:, None] * np.outer(self.v, self.v)
        return M

    @property
    def support(self):
        """Indices where the mask is 1 (inactive coordinates)."""
        return np.flatnonzero(self.mask)


def regularizer_value(x, part):
    """``sum_g (sum_{i in g} w_i |x_i|)^2``."""
    x = part.check(x)
    t = np.bincount(part.group_id, weights=part.weights * np.abs(x), minlength=part.ngroups)
    return float(t @ t)


def _check_rho(rho):
    if not rho > 0 or not np.isfinite(rho):
        raise ValueError(f"rho must be positive and finite, got {rho}")


def _single_group(a, w, rho):
    a = np.ascontiguousarray(a, dtype=np.float64).ravel()
    w = np.ascontiguousarray(w, dtype=np.float64).ravel()
    if a.shape != w.shape:
        raise DimensionError(f"a has shape {a.shape}, w has shape {w.shape}")
    if not np.all(w > 0):
        raise ValueError("weights must be strictly positive")
    _check_rho(rho)
    offsets = np.array([0, len(a)], dtype=np.int64)
    x, alpha_bar, active = kernels.group_prox(a, w, offsets, float(rho))
    sign = np.where(a >= 0, 1.0, -1.0)
    return ProxResult(x, alpha_bar, active, sign, float(rho))


def prox_sq_l1_nonneg(a, w, rho):
    """Minimizer of ``0.5||x - a||^2 + rho ||w o x||_1^2`` over ``x >= 0`` for ``a >= 0``."""
    a = np.asarray(a, dtype=np.float64)
    if np.any(a < 0):
        raise ValueError("a must be elementwise nonnegative")
    return _single_group(a, w, rho)


def prox_sq_l1(a, w, rho):
    """Prox of ``rho ||w o .||_1^2`` at any real ``a`` (sign-symmetric extension)."""
    return _single_group(a, w, rho)


def prox_regularizer(a, part, sigma_lambda):
    """Prox of ``sigma_lambda * Delta``, applied group by group.

    ``sigma_lambda == 0`` is the identity map (no coordinate is active).
    """
    a = part.check(a)
    if sigma_lambda == 0:
        return ProxResult(a.copy(), np.zeros(part.ngroups), np.zeros(part.n, dtype=bool),
                          np.where(a >= 0, 1.0, -1.0), 0.0)
    _check_rho(sigma_lambda)
    ap = np.ascontiguousarray(part.to_perm(a))
    xp, alpha_bar, actp = kernels.group_prox(ap, part.weights_perm, part.offsets,
                                             float(sigma_lambda))
    return ProxResult(part.from_perm(xp), alpha_bar, part.from_perm(actp),
                      np.where(a >= 0, 1.0, -1.0), float(sigma_lambda))


def moreau_envelope(a, part, sigma_lambda, res=None):
    """``min_y sigma_lambda * Delta(y) + 0.5 ||y - a||^2``."""
    a = part.check(a)
    if res is None:
        res = prox_regularizer(a, part, sigma_lambda)
    r = res.x - a
    return sigma_lambda * regularizer_value(res.x, part) + 0.5 * float(r @ r)


def hs_jacobian(res, part, sigma_lambda=None):
    """The element ``M0`` of the HS-Jacobian at the point that produced ``res``.

    Coordinates exactly at the threshold count as active, which selects the
    largest index set and hence ``M0``.
    """
    rho = res.rho if sigma_lambda is None else float(sigma_lambda)
    if sigma_lambda is not None and rho != res.rho:
        raise ValueError("sigma_lambda differs from the one used for the prox")
    mask = (~res.active).astype(np.float64)
    v = res.sign * mask * part.weights
    vv = np.bincount(part.group_id, weights=v * v, minlength=part.ngroups)
    coeff = 2.0 * rho / (1.0 + 2.0 * rho * vv)
    return JacobianElement(mask, v, coeff, part.group_id)
