import numpy as np
import pytest

from exlasso.baselines import FirstOrderConfig, admm_solve, apg_solve
from exlasso.groups_prox import GroupPartition
from exlasso.losses import least_squares, logistic
from exlasso.ppdna import PpdnaConfig, ProblemSpec, kkt_residual, ppdna_solve
from exlasso.synthdata import SynthConfig, generate


def test_admm_zero_matrix_returns_zero_at_once():
    part = GroupPartition.contiguous_blocks([2, 2])
    spec = ProblemSpec(np.zeros((3, 4)), least_squares(np.ones(3)), 0.5, part)
    rep = admm_solve(spec)
    assert rep.converged and rep.outer_iterations == 1
    np.testing.assert_array_equal(rep.x, np.zeros(4))


@pytest.mark.parametrize("task", ["regression", "classification"])
def test_admm_and_apg_agree_with_ppdna(task):
    spec, _ = generate(SynthConfig(50, 5, 10, seed=4, lam=0.1, task=task))
    ref = ppdna_solve(spec, PpdnaConfig(tol=1e-9))
    cfg = FirstOrderConfig(tol=1e-8)
    for rep in (admm_solve(spec, cfg), apg_solve(spec, cfg)):
        assert rep.converged
        assert rep.objective == pytest.approx(ref.objective, rel=1e-6)
        np.testing.assert_array_equal(rep.x != 0, ref.x != 0)


def test_admm_diagnostics():
    spec, _ = generate(SynthConfig(50, 5, 10, seed=1, lam=0.1))
    rep = admm_solve(spec, FirstOrderConfig(tol=1e-8))
    assert rep.converged
    assert rep.extra["u_solve_residual"] <= 1e-10
    assert rep.extra["primal_feasibility"] <= 1e-6
    assert rep.extra["coupling_feasibility"] <= 1e-6
    assert kkt_residual(spec, rep.x) == pytest.approx(rep.eta_kkt)


def test_admm_cg_path_matches_direct():
    spec, _ = generate(SynthConfig(30, 3, 5, nnz_per_group=2, seed=2, lam=0.1))
    a = admm_solve(spec, FirstOrderConfig(tol=1e-8))
    b = admm_solve(spec, FirstOrderConfig(tol=1e-8, direct_limit=0))
    assert b.extra["u_solve_residual"] is None
    assert b.objective == pytest.approx(a.objective, rel=1e-7)


def test_iteration_cap_flags_report():
    spec, _ = generate(SynthConfig(50, 5, 10, seed=0, lam=1e-3))
    for solver in (admm_solve, apg_solve):
        rep = solver(spec, FirstOrderConfig(max_iter=10))
        assert rep.status == "max_iter" and rep.outer_iterations == 10
        assert rep.eta_kkt > 1e-6


def test_apg_objective_never_increases():
    spec, _ = generate(SynthConfig(40, 4, 10, seed=5, lam=1e-2))
    rep = apg_solve(spec, FirstOrderConfig(tol=1e-9, check_every=1, max_iter=3000))
    obj = np.asarray(rep.objective_trace)
    assert np.all(np.diff(obj) <= 1e-12 * (1 + np.abs(obj[1:])))
    assert rep.extra["restarts"] >= 1


def test_apg_zero_lambda_is_accelerated_gradient():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((20, 5))
    b = rng.standard_normal(20)
    spec = ProblemSpec(A, least_squares(b), 0.0, GroupPartition.contiguous_blocks([5]))
    rep = apg_solve(spec, FirstOrderConfig(tol=1e-10))
    np.testing.assert_allclose(rep.x, np.linalg.lstsq(A, b, rcond=None)[0], atol=1e-8)


def test_apg_first_step_is_gradient_step():
    # f(x) = (3x - 2)^2 / 2, L = 9: one step from 0 lands on 2/3
    spec = ProblemSpec(np.array([[3.0]]), least_squares([2.0]), 0.0,
                       GroupPartition.contiguous_blocks([1]))
    rep = apg_solve(spec, FirstOrderConfig(lipschitz=9.0, max_iter=1, tol=1e-300))
    assert rep.x[0] == pytest.approx(2.0 / 3.0, rel=1e-15)


def test_logistic_apg_uses_quarter_curvature():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((10, 4))
    spec = ProblemSpec(A, logistic(rng.choice([-1.0, 1.0], 10)), 0.1,
                       GroupPartition.contiguous_blocks([2, 2]))
    rep = apg_solve(spec, FirstOrderConfig(max_iter=1))
    lmax = np.linalg.eigvalsh(A.T @ A).max()
    assert rep.extra["lipschitz"] == pytest.approx(1.01 * 0.25 * lmax, rel=1e-6)


def test_config_validation():
    with pytest.raises(ValueError):
        FirstOrderConfig(kappa=1.7)
    with pytest.raises(ValueError):
        FirstOrderConfig(max_iter=0)
