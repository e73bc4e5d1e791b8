"""Exclusive lasso models solved by a preconditioned proximal point method with
semismooth Newton subproblems, plus first-order baselines and an index-tracking
backtest."""
from .baselines import FirstOrderConfig, admm_solve, apg_solve
from .groups_prox import (
    GroupPartition,
    hs_jacobian,
    moreau_envelope,
    prox_regularizer,
    prox_sq_l1,
    regularizer_value,
)
from .kernels import BACKEND
from .losses import LossModel, least_squares, logistic
from .ppdna import PpdnaConfig, ProblemSpec, SolveReport, kkt_residual, ppdna_solve
from .synthdata import SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "FirstOrderConfig",
    "GroupPartition",
    "LossModel",
    "PpdnaConfig",
    "ProblemSpec",
    "SolveReport",
    "SynthConfig",
    "admm_solve",
    "apg_solve",
    "generate",
    "hs_jacobian",
    "kkt_residual",
    "least_squares",
    "logistic",
    "moreau_envelope",
    "ppdna_solve",
    "prox_regularizer",
    "prox_sq_l1",
    "regularizer_value",
]
