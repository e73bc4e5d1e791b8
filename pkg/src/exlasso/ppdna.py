"""Preconditioned proximal point method with dual semismooth Newton subproblems."""
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .groups_prox import prox_regularizer, regularizer_value
from .ssn_dual import SubproblemContext, duality_gap, ssn_solve

log = logging.getLogger(__name__)


@dataclass
class ProblemSpec:
    """``min_x h(Ax) - <c, x> + lam * sum_g ||w_g o x_g||_1^2``."""

    A: object
    loss: object
    lam: float
    part: object
    c: np.ndarray = None

    def __post_init__(self):
        m, n = self.A.shape
        if self.loss.m != m:
            raise ValueError(f"loss has {self.loss.m} observations, A has {m} rows")
        if self.part.n != n:
            raise ValueError(f"partition covers {self.part.n} coordinates, A has {n} columns")
        if not self.lam >= 0:
            raise ValueError("lam must be nonnegative")
        self.c = np.zeros(n) if self.c is None else np.asarray(self.c, dtype=np.float64)
        if self.c.shape != (n,):
            raise ValueError("c has the wrong length")

    @property
    def shape(self):
        return self.A.shape

    def with_lam(self, lam):
        return ProblemSpec(self.A, self.loss, lam, self.part, self.c)


@dataclass
class PpdnaConfig:
    sigma0: float = 1.0
    sigma_growth: float = 3.0
    sigma_max: float = 1e6
    preconditioner: str = None  # "identity" | "ata"; None picks by loss
    tau: float = None  # None: 1 / lambda_max(A A^T)
    eps0: float = 1.0
    delta0: float = 0.5
    rate: float = 0.5
    tol: float = 1e-6
    max_iter: int = 200
    time_cap: float = 3600.0
    ssn_max_iter: int = 100
    power_iters: int = 50

    def __post_init__(self):
        if not (self.sigma0 > 0 and self.sigma_growth >= 1 and self.sigma_max >= self.sigma0):
            raise ValueError("invalid sigma schedule")
        if not 0 < self.rate < 1:
            raise ValueError("rate must be in (0, 1) for summable tolerances")
        if not 0 <= self.delta0 < 1:
            raise ValueError("delta0 must be in [0, 1)")
        if self.preconditioner not in (None, "identity", "ata"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")


@dataclass
class SolveReport:
    algorithm: str
    x: np.ndarray
    u: np.ndarray
    status: str
    outer_iterations: int
    inner_iterations: int
    eta_trace: list
    objective_trace: list
    wall_time: float
    extra: dict = field(default_factory=dict)

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def eta_kkt(self):
        return self.eta_trace[-1] if self.eta_trace else np.inf

    @property
    def objective(self):
        return self.objective_trace[-1] if self.objective_trace else np.nan

    @property
    def iterations_label(self):
        if self.algorithm == "ppdna":
            return f"{self.outer_iterations}({self.inner_iterations})"
        return str(self.outer_iterations)

    def to_dict(self, include_vectors=False):
        out = asdict(self)
        out["iterations"] = self.iterations_label
        out["eta_kkt"] = self.eta_kkt
        out["objective"] = self.objective
        if include_vectors:
            out["x"] = self.x.tolist()
            out["u"] = None if self.u is None else self.u.tolist()
        else:
            out.pop("x")
            out.pop("u")
        return out


def lambda_max_AAt(A, iters=50, tol=0.0):
    """Largest eigenvalue of ``A A^T`` by power iteration (deterministic start)."""
    m, n = A.shape
    v = np.ones(n) / np.sqrt(n)
    lam = 0.0
    for _ in range(iters):
        w = np.asarray(A.T @ (A @ v))
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return 0.0
        v = w / new
        if abs(new - lam) <= tol * new:
            lam = new
            break
        lam = new
    return lam


def kkt_residual(spec, x):
    """``||x - Prox_p(x - A^T grad h(Ax) + c)|| / (1 + ||x|| + ||A^T grad h(Ax) - c||)``."""
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(spec.A.T @ spec.loss.grad(np.asarray(spec.A @ x))) - spec.c
    r = x - prox_regularizer(x - g, spec.part, spec.lam).x
    return float(np.linalg.norm(r) / (1.0 + np.linalg.norm(x) + np.linalg.norm(g)))


def primal_objective(spec, x):
    x = np.asarray(x, dtype=np.float64)
    return (spec.loss.value(np.asarray(spec.A @ x)) - float(spec.c @ x)
            + spec.lam * regularizer_value(x, spec.part))


def _initial_dual(spec, tau):
    if spec.loss.kind == "logistic" and tau == 0:
        return -spec.loss.b / 2.0
    return np.zeros(spec.loss.m)


def ppdna_solve(spec, config=None, x0=None, u0=None):
    """Outer proximal point loop; each subproblem is solved by ``ssn_solve``.

    With the identity preconditioner the inner solve stops once
    ``||grad phi|| <= sqrt(alpha_h / sigma) * min(eps_k, delta_k ||x+ - x||)``.
    With ``M = I + tau A^T A`` it stops once the subproblem duality gap is at most
    ``min(eps_k^2, delta_k^2 ||x+ - x||_M^2) / (2 sigma)``.
    The run ends when the relative KKT residual reaches ``config.tol``.
    """
    cfg = config or PpdnaConfig()
    start = time.perf_counter()
    precond = cfg.preconditioner or ("identity" if spec.loss.kind == "least_squares" else "ata")
    if precond == "identity":
        tau = 0.0
    elif cfg.tau is not None:
        tau = float(cfg.tau)
    else:
        lmax = lambda_max_AAt(spec.A, cfg.power_iters)
        tau = 1.0 / lmax if lmax > 0 else 1.0
    if precond == "ata" and not tau > 0:
        raise ValueError("tau must be positive for the A^T A preconditioner")

    n = spec.A.shape[1]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    u = _initial_dual(spec, tau) if u0 is None else np.array(u0, dtype=np.float64)
    sigma = cfg.sigma0
    alpha_h = spec.loss.alpha_h

    eta_trace, obj_trace, gaps, slacks, sigmas, inner_counts, notes = [], [], [], [], [], [], []
    inner_total = 0
    status = "max_iter"
    k = 0
    for k in range(cfg.max_iter):
        eps_k = cfg.eps0 * cfg.rate ** k
        delta_k = cfg.delta0 * cfg.rate ** k
        ctx = SubproblemContext(spec.A, spec.c, x, sigma, tau, spec.loss, spec.part, spec.lam)

        if tau == 0:
            scale = np.sqrt(alpha_h / sigma)

            def stop(st, x=x, scale=scale, eps_k=eps_k, delta_k=delta_k):
                gn = np.linalg.norm(st.grad)
                return gn <= scale * min(eps_k, delta_k * np.linalg.norm(st.x - x))
        else:
            Ax_prev = ctx.Ax_tilde

            def stop(st, x=x, Ax_prev=Ax_prev, sigma=sigma, eps_k=eps_k, delta_k=delta_k):
                dx, dAx = st.x - x, st.Ax - Ax_prev
                dist2 = float(dx @ dx) + tau * float(dAx @ dAx)
                gap = duality_gap(st)
                return gap <= min(eps_k ** 2, delta_k ** 2 * dist2) / (2.0 * sigma)

        u, prox, stats = ssn_solve(ctx, u, stop, max_iter=cfg.ssn_max_iter)
        if not stats.converged:
            notes.append(f"outer {k}: inner stopped early ({stats.message})")
            log.info(notes[-1])
        if tau > 0:
            gap = duality_gap(stats.state)
            slack = 1e-12 * (1.0 + abs(stats.state.value))
            gaps.append(gap)
            slacks.append(slack)
            if gap < -slack:
                raise RuntimeError(f"negative duality gap {gap:.3e} at outer iteration {k}")
        x = prox.x
        inner_total += stats.iterations
        inner_counts.append(stats.iterations)
        sigmas.append(sigma)
        eta_trace.append(kkt_residual(spec, x))
        obj_trace.append(primal_objective(spec, x))
        if eta_trace[-1] <= cfg.tol:
            status = "converged"
            break
        if time.perf_counter() - start > cfg.time_cap:
            status = "time_cap"
            break
        sigma = min(sigma * cfg.sigma_growth, cfg.sigma_max)

    extra = {"preconditioner": precond, "tau": tau, "sigma_trace": sigmas,
             "inner_trace": inner_counts, "notes": notes}
    if tau > 0:
        extra["gap_trace"] = gaps
        extra["gap_slack_trace"] = slacks
    return SolveReport("ppdna", x, u, status, len(eta_trace), inner_total, eta_trace,
                       obj_trace, time.perf_counter() - start, extra)
