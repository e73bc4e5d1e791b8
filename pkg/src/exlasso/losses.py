"""Least-squares and logistic losses with conjugates and proximal maps."""
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import kernels
from .groups_prox import DimensionError


class DomainError(ValueError):
    """Argument outside the domain of the conjugate."""


def _log1pexp(z):
    # log(1 + exp(z)), overflow-safe
    return np.logaddexp(0.0, z)


def _sigmoid_neg(z):
    # 1 / (1 + exp(z))
    return expit(-z)


def _xlogx(t):
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = t[pos] * np.log(t[pos])
    return out


@dataclass
class LossModel:
    """``h(y) = sum_i 0.5 (y_i - b_i)^2`` or ``sum_i log(1 + exp(-b_i y_i))``.

    ``alpha_h`` is the strong convexity modulus of ``h*`` on its domain:
    1 for least squares and 4 for logistic (the conjugate's Hessian diagonal
    ``1 / (s (1 - s))`` with ``s = -u_i b_i`` never drops below 4).
    """

    kind: str
    b: np.ndarray

    def __post_init__(self):
        if self.kind not in ("least_squares", "logistic"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        self.b = np.asarray(self.b, dtype=np.float64).ravel()
        if self.kind == "logistic" and not np.all(np.abs(self.b) == 1.0):
            raise ValueError("logistic labels must be exactly +1 or -1")

    @property
    def m(self):
        return len(self.b)

    @property
    def alpha_h(self):
        return 1.0 if self.kind == "least_squares" else 4.0

    @property
    def curvature(self):
        """Upper bound on the Hessian of ``h`` (Lipschitz constant of its gradient)."""
        return 1.0 if self.kind == "least_squares" else 0.25

    def _check(self, y):
        y = np.asarray(y, dtype=np.float64)
        if y.shape != self.b.shape:
            raise DimensionError(f"vector has shape {y.shape}, expected {self.b.shape}")
        return y

    # h and its gradient

    def value(self, y):
        y = self._check(y)
        if self.kind == "least_squares":
            r = y - self.b
            return 0.5 * float(r @ r)
        return float(np.sum(_log1pexp(-self.b * y)))

    def grad(self, y):
        y = self._check(y)
        if self.kind == "least_squares":
            return y - self.b
        return -self.b * _sigmoid_neg(self.b * y)

    def hess_diag(self, y):
        y = self._check(y)
        if self.kind == "least_squares":
            return np.ones_like(y)
        s = _sigmoid_neg(self.b * y)
        return s * (1.0 - s)

    # h* and its derivatives

    def in_conjugate_domain(self, u, margin=0.0):
        if self.kind == "least_squares":
            return True
        t = -self._check(u) * self.b
        return bool(np.all(t > margin) and np.all(t < 1.0 - margin))

    def conjugate_value(self, u):
        u = self._check(u)
        if self.kind == "least_squares":
            return 0.5 * float(u @ u) + float(self.b @ u)
        t = -u * self.b
        if np.any(t < 0) or np.any(t > 1):
            raise DomainError("u_i * b_i must lie in [-1, 0]")
        return float(np.sum(_xlogx(1.0 - t) + _xlogx(t)))

    def conjugate_grad(self, u):
        u = self._check(u)
        if self.kind == "least_squares":
            return u + self.b
        t = -u * self.b
        if not (np.all(t > 0) and np.all(t < 1)):
            raise DomainError("u_i * b_i must lie in the open interval (-1, 0)")
        return self.b * (np.log1p(-t) - np.log(t))

    def conjugate_hess_diag(self, u):
        u = self._check(u)
        if self.kind == "least_squares":
            return np.ones_like(u)
        t = -u * self.b
        if not (np.all(t > 0) and np.all(t < 1)):
            raise DomainError("u_i * b_i must lie in the open interval (-1, 0)")
        return 1.0 / (t * (1.0 - t))

    # prox of nu * h

    def prox(self, v, nu):
        """``argmin_y h(y) + ||y - v||^2 / (2 nu)``."""
        v = self._check(v)
        if not nu > 0:
            raise ValueError(f"nu must be positive, got {nu}")
        if self.kind == "least_squares":
            return (v + nu * self.b) / (1.0 + nu)
        return kernels.logistic_prox(np.ascontiguousarray(v), self.b, float(nu))

    def prox_jacobian_diag(self, y, nu):
        """Derivative of the prox, given its output ``y``: ``1 / (1 + nu h''(y))``."""
        if self.kind == "least_squares":
            return np.full(self.m, 1.0 / (1.0 + nu))
        return 1.0 / (1.0 + nu * self.hess_diag(y))

    def envelope(self, v, nu, y=None):
        """Moreau envelope of ``nu * h`` at ``v``."""
        v = self._check(v)
        if y is None:
            y = self.prox(v, nu)
        r = y - v
        return nu * self.value(y) + 0.5 * float(r @ r)


def least_squares(b):
    return LossModel("least_squares", b)


def logistic(b):
    return LossModel("logistic", b)
