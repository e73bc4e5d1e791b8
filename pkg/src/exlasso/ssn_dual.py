"""Dual proximal-point subproblems and the semismooth Newton solver.

For the outer iterate ``x_tilde`` and step ``sigma`` the subproblem

    min_x h(Ax) - <c, x> + p(x) + ||x - x_tilde||^2 / (2 sigma)
          [+ tau ||A(x - x_tilde)||^2 / (2 sigma)]

is solved through its dual in ``u`` (length m). With ``tau == 0`` the dual is
``phi``; with ``tau > 0`` it is ``psi``. Both are maximized here; the primal
point is recovered as ``x+ = Prox_{sigma p}(x_tilde + sigma c - sigma A^T u)``.

Dual values are computed in Lagrangian form (the minimizing primal pieces
plugged back in), which equals the Moreau-envelope expression exactly but
avoids cancelling terms of size ``sigma ||A^T u||^2``.
"""
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, cg

from .groups_prox import hs_jacobian, prox_regularizer, regularizer_value
from .losses import DomainError

log = logging.getLogger(__name__)

EPS = np.finfo(np.float64).eps

# line search keeps u_i b_i inside (-1 + DOMAIN_MARGIN, -DOMAIN_MARGIN)
DOMAIN_MARGIN = 1e-12


@dataclass
class SubproblemContext:
    A: object
    c: np.ndarray
    x_tilde: np.ndarray
    sigma: float
    tau: float
    loss: object
    part: object
    lam: float
    Ax_tilde: np.ndarray = None

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")
        m, n = self.A.shape
        if self.x_tilde.shape != (n,) or self.c.shape != (n,) or self.loss.m != m:
            raise ValueError("inconsistent subproblem dimensions")
        if self.Ax_tilde is None and self.tau > 0:
            self.Ax_tilde = np.asarray(self.A @ self.x_tilde)

    @property
    def nu(self):
        """Step of the loss prox in the preconditioned dual."""
        return self.sigma / self.tau


@dataclass
class NewtonState:
    """Everything cached at one dual point ``u``."""

    ctx: SubproblemContext = field(repr=False)
    u: np.ndarray
    z: np.ndarray
    prox: object
    jac: object
    Ax: np.ndarray
    value: float
    grad: np.ndarray
    diag: np.ndarray
    y: np.ndarray = None
    _cols: tuple = field(default=None, repr=False)
    _B: np.ndarray = field(default=None, repr=False)

    @property
    def x(self):
        return self.prox.x

    def columns(self):
        """``(S, A_S)``: the inactive index set and the matching dense columns of A."""
        if self._cols is None:
            S = self.jac.support
            A_S = self.ctx.A[:, S]
            if sp.issparse(A_S):
                A_S = A_S.toarray()
            self._cols = (S, np.asarray(A_S))
        return self._cols

    def factor(self):
        """B with ``A M0 A^T = B B^T``, one column per inactive index."""
        if self._B is None:
            self._B = _factor_columns(self.jac, *self.columns())
        return self._B


def evaluate(ctx, u):
    """Dual value, gradient, and Newton data at ``u``."""
    u = np.asarray(u, dtype=np.float64)
    A, loss, sigma = ctx.A, ctx.loss, ctx.sigma
    Atu = np.asarray(A.T @ u)
    z = ctx.x_tilde + sigma * (ctx.c - Atu)
    prox = prox_regularizer(z, ctx.part, sigma * ctx.lam)
    x = prox.x
    Ax = np.asarray(A @ x)
    dx = x - ctx.x_tilde
    primal_part = (ctx.lam * regularizer_value(x, ctx.part) + float(Atu @ x) - float(ctx.c @ x)
                   + float(dx @ dx) / (2.0 * sigma))
    y = None
    if ctx.tau == 0:
        value = -loss.conjugate_value(u) + primal_part
        grad = -loss.conjugate_grad(u) + Ax
        diag = loss.conjugate_hess_diag(u)
    else:
        nu = ctx.nu
        y = loss.prox(ctx.Ax_tilde + nu * u, nu)
        dy = y - ctx.Ax_tilde
        value = loss.value(y) - float(u @ y) + float(dy @ dy) / (2.0 * nu) + primal_part
        grad = Ax - y
        diag = nu * loss.prox_jacobian_diag(y, nu)
        diag = diag + 1e-12 * np.max(np.abs(diag))
    jac = hs_jacobian(prox, ctx.part)
    return NewtonState(ctx, u, z, prox, jac, Ax, value, grad, diag, y)


def dual_objective(ctx, u):
    """``phi(u)`` when ``tau == 0``, ``psi(u)`` otherwise (constants included)."""
    return evaluate(ctx, u).value


def dual_gradient(ctx, u):
    return evaluate(ctx, u).grad


def subproblem_primal(ctx, x):
    """The primal subproblem objective ``f_k(x)`` the dual is paired with."""
    x = np.asarray(x, dtype=np.float64)
    Ax = np.asarray(ctx.A @ x)
    dx = x - ctx.x_tilde
    val = (ctx.loss.value(Ax) - float(ctx.c @ x) + ctx.lam * regularizer_value(x, ctx.part)
           + float(dx @ dx) / (2.0 * ctx.sigma))
    if ctx.tau > 0:
        dAx = Ax - ctx.Ax_tilde
        val += ctx.tau * float(dAx @ dAx) / (2.0 * ctx.sigma)
    return val


def duality_gap(state):
    """``f_k(x+) - psi(u)`` at the primal point recovered from ``state``."""
    return subproblem_primal(state.ctx, state.x) - state.value


def _factor_columns(jac, S, A_S):
    if S.size == 0:
        return A_S
    gid = jac.group_id[S]
    vS = jac.v[S]
    ngroups = len(jac.coeff)
    # per-group A_{S_g} v_g
    G = sp.csr_matrix((vS, (np.arange(S.size), gid)), shape=(S.size, ngroups))
    Av = np.asarray((G.T @ A_S.T).T)
    vv = np.bincount(gid, weights=vS * vS, minlength=ngroups)
    # (I - c v v^T) = (I - g v v^T)^2 with g = c / (1 + sqrt(1 - c |v|^2))
    gam = jac.coeff / (1.0 + np.sqrt(np.maximum(1.0 - jac.coeff * vv, 0.0)))
    return A_S - Av[:, gid] * (gam[gid] * vS)[None, :]


def newton_system_apply(state, d):
    """``(D + sigma A M0 A^T) d`` touching only columns in the inactive set."""
    d = np.asarray(d, dtype=np.float64)
    S, A_S = state.columns()
    out = state.diag * d
    if S.size == 0:
        return out
    jac = state.jac
    gid = jac.group_id[S]
    vS = jac.v[S]
    w = A_S.T @ d
    t = np.bincount(gid, weights=vS * w, minlength=len(jac.coeff)) * jac.coeff
    return out + state.ctx.sigma * (A_S @ (w - vS * t[gid]))


@dataclass
class SolveInfo:
    method: str
    residual: float
    bound: float
    cg_iterations: int = 0
    fallback: bool = False


def newton_system_solve(state, rhs, gamma_bar=0.1, tau_exp=0.5, direct_limit=500,
                        cg_max_iter=300):
    """Solve ``(D + sigma A M0 A^T) d = rhs``.

    Direct (Cholesky on the smaller of the m x m and |S| x |S| forms) when that
    size is at most ``direct_limit``; CG otherwise. The returned residual is
    checked against ``min(gamma_bar, ||rhs||^(1 + tau_exp))``.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    sigma = state.ctx.sigma
    D = state.diag
    S, _ = state.columns()
    k, m = S.size, len(rhs)
    bound = min(gamma_bar, float(np.linalg.norm(rhs)) ** (1.0 + tau_exp))
    fallback = False
    cg_its = 0
    if k == 0:
        method = "diagonal"
        d = rhs / D
    elif min(k, m) <= direct_limit:
        B = state.factor()
        if k < m:
            method = "woodbury"
            BD = B / D[:, None]
            K = BD.T @ B
            K[np.diag_indices_from(K)] += 1.0 / sigma
            r = rhs / D
            d = r - BD @ _chol_solve(K, B.T @ r)
        else:
            method = "dense"
            H = sigma * (B @ B.T)
            H[np.diag_indices_from(H)] += D
            d = _chol_solve(H, rhs)
    else:
        method = "cg"
        op = LinearOperator((m, m), matvec=lambda v: newton_system_apply(state, v), dtype=float)
        pre = LinearOperator((m, m), matvec=lambda v: v / D, dtype=float)
        counter = [0]

        def cb(_):
            counter[0] += 1

        d, info = cg(op, rhs, rtol=0.0, atol=bound, maxiter=cg_max_iter, M=pre, callback=cb)
        cg_its = counter[0]
        if info != 0:
            log.warning("CG stopped after %d iterations; using the gradient direction", cg_its)
            d = rhs.copy()
            fallback = True
    res = float(np.linalg.norm(newton_system_apply(state, d) - rhs))
    return d, SolveInfo(method, res, bound, cg_its, fallback)


def _chol_solve(K, r):
    try:
        return sla.cho_solve(sla.cho_factor(K, lower=True, check_finite=False), r,
                             check_finite=False)
    except sla.LinAlgError:
        return np.linalg.lstsq(K, r, rcond=None)[0]


@dataclass
class SsnStats:
    iterations: int = 0
    converged: bool = False
    grad_norm: float = np.inf
    line_search_steps: int = 0
    solves: list = field(default_factory=list)
    values: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    message: str = ""
    state: object = field(default=None, repr=False)

    @property
    def bound_violations(self):
        return sum(1 for s in self.solves if not s.fallback and s.residual > s.bound)


def _in_domain(ctx, u):
    if ctx.tau > 0 or ctx.loss.kind == "least_squares":
        return True
    return ctx.loss.in_conjugate_domain(u, DOMAIN_MARGIN)


def ssn_solve(ctx, u0, stop=None, *, max_iter=100, mu=1e-4, delta=0.5, gamma_bar=0.1,
              tau_exp=0.5, grad_floor=1e-12, max_line_search=60, record=False,
              direct_limit=500):
    """Maximize the subproblem dual by semismooth Newton with Armijo backtracking.

    ``stop(state) -> bool`` is the caller's acceptance test (the outer
    inexactness criteria); ``||grad|| <= grad_floor`` always stops. Returns
    ``(u, prox_result, stats)``; at the iteration cap the last (best) iterate
    is returned with ``stats.converged = False``. ``stats.state`` holds the
    final ``NewtonState``.
    """
    if not (0 < mu < 0.5 and 0 < delta < 1 and 0 < gamma_bar < 1 and 0 < tau_exp <= 1):
        raise ValueError("SSN parameters out of range")
    u = np.array(u0, dtype=np.float64)
    if not _in_domain(ctx, u):
        raise DomainError("u0 must lie in the interior of dom(h*)")
    state = evaluate(ctx, u)
    stats = SsnStats()
    stats.values.append(state.value)
    if record:
        stats.iterates.append(state.u.copy())
    for j in range(max_iter + 1):
        gnorm = float(np.linalg.norm(state.grad))
        stats.grad_norm = gnorm
        if gnorm <= grad_floor or (stop is not None and stop(state)):
            stats.converged = True
            break
        if j == max_iter:
            stats.message = "iteration cap"
            break
        d, info = newton_system_solve(state, state.grad, gamma_bar, tau_exp, direct_limit)
        stats.solves.append(info)
        slope = float(state.grad @ d)
        if not slope > 0:
            d = state.grad.copy()
            slope = gnorm * gnorm
        slack = 4.0 * EPS * (1.0 + abs(state.value))
        alpha = 1.0
        new = None
        for _ in range(max_line_search):
            trial = state.u + alpha * d
            stats.line_search_steps += 1
            if _in_domain(ctx, trial):
                cand = evaluate(ctx, trial)
                if cand.value >= state.value + mu * alpha * slope - slack:
                    new = cand
                    break
            alpha *= delta
        if new is None:
            stats.message = "line search failed"
            break
        state = new
        stats.iterations += 1
        stats.values.append(state.value)
        if record:
            stats.iterates.append(state.u.copy())
    stats.state = state
    return state.u, state.prox, stats
