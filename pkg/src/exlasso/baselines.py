"""First-order reference solvers: dual ADMM and restarted FISTA on the primal."""
import time
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .groups_prox import prox_regularizer, regularizer_value
from .ppdna import SolveReport, kkt_residual, lambda_max_AAt, primal_objective

GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0


@dataclass
class FirstOrderConfig:
    tol: float = 1e-6
    max_iter: int = 200000
    time_cap: float = 3600.0
    check_every: int = 10  # iterations between KKT evaluations
    # ADMM
    sigma0: float = 1.0
    kappa: float = 1.618
    balance_every: int = 50
    balance_factor: float = 2.0
    sigma_bounds: tuple = (1e-4, 1e4)
    direct_limit: int = 5000  # largest m for a dense Cholesky of I + AA^T
    # APG
    lipschitz: float = None  # None: power iteration times a safety margin
    lipschitz_safety: float = 1.01
    power_iters: int = 100

    def __post_init__(self):
        if not 0 < self.kappa < GOLDEN:
            raise ValueError("kappa must lie in (0, (1 + sqrt 5) / 2)")
        if self.max_iter < 1 or self.check_every < 1:
            raise ValueError("max_iter and check_every must be positive")


def _dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M)


class _CapacitySolver:
    """Solves ``(I + A A^T) u = r``; factorized once, CG when m is large."""

    def __init__(self, A, direct_limit):
        self.A = A
        m = A.shape[0]
        self.direct = m <= direct_limit
        if self.direct:
            self.K = np.eye(m) + _dense(A @ A.T)
            self.chol = sla.cho_factor(self.K, lower=True)
        else:
            sq = A.multiply(A) if sp.issparse(A) else A * A
            self.diag = 1.0 + np.asarray(sq.sum(axis=1)).ravel()
            self.K = spla.LinearOperator((m, m), matvec=self._matvec, dtype=np.float64)
            self.M = spla.LinearOperator((m, m), matvec=lambda r: r / self.diag,
                                         dtype=np.float64)

    def _matvec(self, u):
        return u + self.A @ (self.A.T @ u)

    def solve(self, r, u0=None):
        if self.direct:
            u = sla.cho_solve(self.chol, r)
        else:
            u, _ = spla.cg(self.K, r, x0=u0, rtol=1e-12, atol=0.0, M=self.M, maxiter=1000)
        return u

    def residual(self, u, r):
        Ku = self.K @ u if self.direct else self._matvec(u)
        return float(np.linalg.norm(Ku - r))


def _budget_status(cfg, start):
    if time.perf_counter() - start > cfg.time_cap:
        return "time_cap"
    return None


def admm_solve(spec, config=None):
    """ADMM on ``min h*(w) + p*(v)  s.t.  A^T u + v = c,  w = u``.

    The primal candidate is the sparse point ``Prox_{sigma p}(x + sigma (c - A^T u))``
    computed in the v-update; the multiplier ``x`` converges to the same limit.
    """
    cfg = config or FirstOrderConfig()
    start = time.perf_counter()
    A, loss, c, part = spec.A, spec.loss, spec.c, spec.part
    m, n = A.shape
    lo, hi = cfg.sigma_bounds
    sigma = cfg.sigma0
    kappa = cfg.kappa

    x = np.zeros(n)
    y = np.zeros(m)
    u = np.zeros(m)
    w = np.zeros(m)
    v = np.zeros(n)
    x_hat = np.zeros(n)
    cap = _CapacitySolver(A, cfg.direct_limit)

    eta_trace, obj_trace, sigmas = [], [], []
    max_u_res = 0.0
    rp_sum = rd_sum = 0.0
    status = "max_iter"
    k = 0
    for k in range(1, cfg.max_iter + 1):
        rhs = A @ (c + x / sigma - v) + (w - y / sigma)
        u = cap.solve(rhs, u)
        if cap.direct:
            max_u_res = max(max_u_res, cap.residual(u, rhs))
        Atu = np.asarray(A.T @ u)

        zw = sigma * u + y
        w = (zw - loss.prox(zw, sigma)) / sigma
        zv = x + sigma * (c - Atu)
        x_hat = prox_regularizer(zv, part, sigma * spec.lam).x
        v_old = v
        v = (zv - x_hat) / sigma

        feas_x = Atu + v - c
        feas_y = w - u
        x = x - kappa * sigma * feas_x
        y = y - kappa * sigma * feas_y

        rp_sum += np.sqrt(float(feas_x @ feas_x) + float(feas_y @ feas_y))
        rd_sum += sigma * float(np.linalg.norm(np.asarray(A @ (v - v_old))))
        if k % cfg.balance_every == 0:
            if rp_sum > 10.0 * rd_sum:
                sigma = min(sigma * cfg.balance_factor, hi)
            elif rd_sum > 10.0 * rp_sum:
                sigma = max(sigma / cfg.balance_factor, lo)
            rp_sum = rd_sum = 0.0
            sigmas.append(sigma)

        if k == 1 or k % cfg.check_every == 0 or k == cfg.max_iter:
            eta_trace.append(kkt_residual(spec, x_hat))
            obj_trace.append(primal_objective(spec, x_hat))
            if eta_trace[-1] <= cfg.tol:
                status = "converged"
                break
            capped = _budget_status(cfg, start)
            if capped:
                status = capped
                break

    extra = {
        "sigma_trace": sigmas,
        "u_solve_residual": max_u_res if cap.direct else None,
        "primal_feasibility": float(np.linalg.norm(Atu + v - c)),
        "coupling_feasibility": float(np.linalg.norm(w - u)),
        "multiplier_gap": float(np.linalg.norm(x - x_hat)),
        "kappa": kappa,
    }
    return SolveReport("admm", x_hat, u, status, k, 0, eta_trace, obj_trace,
                       time.perf_counter() - start, extra)


def apg_solve(spec, config=None, x0=None):
    """FISTA with function-value restart.

    When a step raises the objective, momentum is reset and the step is redone
    from the previous iterate, so the objective sequence never increases.
    """
    cfg = config or FirstOrderConfig()
    start = time.perf_counter()
    A, c, part, lam = spec.A, spec.c, spec.part, spec.lam
    n = A.shape[1]
    if cfg.lipschitz is not None:
        L = float(cfg.lipschitz)
    else:
        L = cfg.lipschitz_safety * spec.loss.curvature * lambda_max_AAt(A, cfg.power_iters)
    if L == 0.0:
        # h(Ax) is constant in x; a unit step is as good as any
        L = 1.0

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    Ax = np.asarray(A @ x)

    def objective(xv, Axv):
        return spec.loss.value(Axv) - float(c @ xv) + lam * regularizer_value(xv, part)

    def step(yv, Ayv):
        g = np.asarray(A.T @ spec.loss.grad(Ayv)) - c
        xn = prox_regularizer(yv - g / L, part, lam / L).x
        return xn, np.asarray(A @ xn)

    F = objective(x, Ax)
    x_prev, Ax_prev = x, Ax
    t = 1.0
    restarts = 0
    eta_trace, obj_trace = [], []
    status = "max_iter"
    k = 0
    for k in range(1, cfg.max_iter + 1):
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        beta = (t - 1.0) / t_next
        yv = x + beta * (x - x_prev)
        Ay = Ax + beta * (Ax - Ax_prev)
        xn, Axn = step(yv, Ay)
        Fn = objective(xn, Axn)
        if Fn > F:
            restarts += 1
            t_next = 1.0
            xn, Axn = step(x, Ax)
            Fn = objective(xn, Axn)
        x_prev, Ax_prev = x, Ax
        x, Ax, F, t = xn, Axn, Fn, t_next

        if k == 1 or k % cfg.check_every == 0 or k == cfg.max_iter:
            eta_trace.append(kkt_residual(spec, x))
            obj_trace.append(F)
            if eta_trace[-1] <= cfg.tol:
                status = "converged"
                break
            capped = _budget_status(cfg, start)
            if capped:
                status = capped
                break

    extra = {"lipschitz": L, "restarts": restarts}
    return SolveReport("apg", x, None, status, k, 0, eta_trace, obj_trace,
                       time.perf_counter() - start, extra)
