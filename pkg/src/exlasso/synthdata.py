"""Seeded synthetic exclusive lasso instances with block-Toeplitz feature covariance."""
from dataclasses import asdict, dataclass

import numpy as np

from .groups_prox import GroupPartition
from .losses import LossModel
from .ppdna import ProblemSpec


@dataclass(frozen=True)
class SynthConfig:
    m: int
    s: int
    p: int
    nnz_per_group: int = 10
    seed: int = 0
    task: str = "regression"
    lam: float = 1e-1
    within_decay: float = 0.9
    cross_decay: float = 0.3

    def __post_init__(self):
        for name in ("m", "s", "p"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if not 0 <= self.nnz_per_group <= self.p:
            raise ValueError("nnz_per_group must lie in [0, p]")
        if self.task not in ("regression", "classification"):
            raise ValueError(f"unknown task {self.task!r}")

    @property
    def n(self):
        return self.s * self.p

    def to_dict(self):
        return asdict(self)


def covariance(s, p, within_decay=0.9, cross_decay=0.3):
    """``within^|i-j|`` inside a group, ``cross^|i-j|`` across groups (global index distance)."""
    idx = np.arange(s * p)
    dist = np.abs(idx[:, None] - idx[None, :])
    same = (idx[:, None] // p) == (idx[None, :] // p)
    return np.where(same, within_decay ** dist, cross_decay ** dist)


def generate(config):
    """Return ``(ProblemSpec, x_star)``.

    Draw order from one ``default_rng(seed)`` stream: support positions and
    values of ``x_star`` group by group, then the m x n standard normals for A,
    then the noise.
    """
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    x_star = np.zeros(cfg.n)
    for g in range(cfg.s):
        pos = rng.choice(cfg.p, size=cfg.nnz_per_group, replace=False)
        x_star[g * cfg.p + pos] = rng.uniform(0.0, 10.0, size=cfg.nnz_per_group)
    try:
        L = np.linalg.cholesky(covariance(cfg.s, cfg.p, cfg.within_decay, cfg.cross_decay))
    except np.linalg.LinAlgError:
        # the blockwise rule is indefinite for some small groups, e.g. s >= 3 with p <= 4
        raise ValueError(f"covariance is not positive definite for s={cfg.s}, p={cfg.p}") from None
    A = rng.standard_normal((cfg.m, cfg.n)) @ L.T
    noise = rng.standard_normal(cfg.m)
    signal = A @ x_star + noise
    if cfg.task == "regression":
        loss = LossModel("least_squares", signal)
    else:
        loss = LossModel("logistic", np.where(signal >= 0, 1.0, -1.0))
    part = GroupPartition.contiguous_blocks([cfg.p] * cfg.s)
    return ProblemSpec(A, loss, cfg.lam, part), x_star
