import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from exlasso.groups_prox import (
    DimensionError,
    GroupPartition,
    hs_jacobian,
    moreau_envelope,
    prox_regularizer,
    prox_sq_l1,
    prox_sq_l1_nonneg,
    regularizer_value,
)
from oracles import group_objective, prox_enumeration

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


@st.composite
def group_problem(draw, max_size=8):
    n = draw(st.integers(1, max_size))
    a = draw(arrays(np.float64, n, elements=finite))
    w = draw(arrays(np.float64, n, elements=st.floats(0.05, 5.0)))
    rho = draw(st.floats(1e-3, 1e3))
    return a, w, rho


@st.composite
def partitioned(draw, max_groups=4, max_size=5):
    sizes = draw(st.lists(st.integers(1, max_size), min_size=1, max_size=max_groups))
    n = sum(sizes)
    perm = draw(st.permutations(range(n)))
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    groups = [np.array(perm[bounds[i]:bounds[i + 1]]) for i in range(len(sizes))]
    w = draw(arrays(np.float64, n, elements=st.floats(0.1, 3.0)))
    return GroupPartition(groups, w)


def test_counterexample():
    res = prox_sq_l1(np.array([1.0, 0.5]), np.ones(2), 1.0)
    assert res.x[0] == 1.0 / 3.0
    assert res.x[1] == 0.0


def test_zero_input_and_single_coordinate():
    assert np.all(prox_sq_l1(np.zeros(4), np.ones(4), 2.0).x == 0.0)
    # one coordinate: min rho w^2 x^2 + (x - a)^2 / 2
    res = prox_sq_l1(np.array([-3.0]), np.array([2.0]), 0.5)
    assert res.x[0] == pytest.approx(-3.0 / (1.0 + 2.0 * 0.5 * 4.0))


def test_nonneg_variant_rejects_negative():
    with pytest.raises(ValueError):
        prox_sq_l1_nonneg(np.array([1.0, -0.1]), np.ones(2), 1.0)
    x = prox_sq_l1_nonneg(np.array([1.0, 0.5]), np.ones(2), 1.0).x
    np.testing.assert_array_equal(x, prox_sq_l1(np.array([1.0, 0.5]), np.ones(2), 1.0).x)


def test_ties_are_stable():
    a = np.array([1.0, 1.0, 1.0, -1.0])
    x = prox_sq_l1(a, np.ones(4), 0.1).x
    np.testing.assert_allclose(np.abs(x), np.abs(x[0]))
    assert np.all(np.sign(x) == np.sign(a))


@given(group_problem())
def test_matches_enumeration(prob):
    a, w, rho = prob
    x = prox_sq_l1(a, w, rho).x
    ref = prox_enumeration(a, w, rho)
    assert np.max(np.abs(x - ref)) <= 1e-9 * (1.0 + np.max(np.abs(a)))


@given(group_problem())
def test_no_better_point_nearby(prob):
    a, w, rho = prob
    x = prox_sq_l1(a, w, rho).x
    f0 = group_objective(x, a, w, rho)
    rng = np.random.default_rng(0)
    for _ in range(20):
        y = x + 1e-3 * rng.standard_normal(x.size)
        assert group_objective(y, a, w, rho) >= f0 - 1e-9 * (1 + abs(f0))


@given(partitioned(), st.floats(1e-3, 1e2), st.data())
def test_nonexpansive_and_odd(part, rho, data):
    a = data.draw(arrays(np.float64, part.n, elements=finite))
    b = data.draw(arrays(np.float64, part.n, elements=finite))
    pa = prox_regularizer(a, part, rho).x
    pb = prox_regularizer(b, part, rho).x
    assert np.linalg.norm(pa - pb) <= np.linalg.norm(a - b) * (1 + 1e-12) + 1e-12
    # firm nonexpansiveness
    assert float((pa - pb) @ (a - b)) >= float((pa - pb) @ (pa - pb)) - 1e-9
    np.testing.assert_allclose(prox_regularizer(-a, part, rho).x, -pa, atol=1e-12)


@given(partitioned(), st.floats(1e-3, 1e2), st.data())
def test_shrinks_and_keeps_signs(part, rho, data):
    a = data.draw(arrays(np.float64, part.n, elements=finite))
    res = prox_regularizer(a, part, rho)
    assert np.all(np.abs(res.x) <= np.abs(a) + 1e-12)
    assert np.all(res.x * a >= 0)
    assert np.all(res.x[res.active] == 0.0)
    # ranking of |a|/w is kept inside every group
    for g in part.groups:
        r_in = np.abs(a[g]) / part.weights[g]
        r_out = np.abs(res.x[g]) / part.weights[g]
        order = np.argsort(-r_in, kind="stable")
        assert np.all(np.diff(r_out[order]) <= 1e-12)


@given(partitioned(), st.floats(1e-2, 1e2), st.data())
def test_every_group_keeps_its_leader(part, rho, data):
    # the squared l1 penalty is smooth at 0, so a nonzero group never vanishes
    a = data.draw(arrays(np.float64, part.n, elements=st.floats(0.1, 10)))
    x = prox_regularizer(a, part, rho).x
    for g in part.groups:
        assert np.count_nonzero(x[g]) >= 1


def test_groups_are_independent(rng):
    part = GroupPartition([[0, 3, 4], [1, 2], [5]], weights=[1, 2, 1, 0.5, 3, 1])
    a = rng.standard_normal(6)
    x = prox_regularizer(a, part, 0.7).x
    for g in part.groups:
        np.testing.assert_allclose(x[g], prox_sq_l1(a[g], part.weights[g], 0.7).x, atol=0)


def test_zero_parameter_is_identity(rng):
    part = GroupPartition.contiguous_blocks([3, 2])
    a = rng.standard_normal(5)
    res = prox_regularizer(a, part, 0.0)
    np.testing.assert_array_equal(res.x, a)
    assert not res.active.any()
    with pytest.raises(ValueError):
        prox_regularizer(a, part, -1.0)


def test_regularizer_value():
    part = GroupPartition([[0, 1], [2]], weights=[1.0, 2.0, 3.0])
    assert regularizer_value(np.array([1.0, -1.0, 2.0]), part) == pytest.approx(9.0 + 36.0)


def test_partition_validation():
    with pytest.raises(ValueError):
        GroupPartition([[0, 1], [1, 2]])
    with pytest.raises(ValueError):
        GroupPartition([[0, 2]])
    with pytest.raises(ValueError):
        GroupPartition([[0], []])
    with pytest.raises(ValueError):
        GroupPartition([[0, 1]], weights=[1.0, 0.0])
    with pytest.raises(DimensionError):
        GroupPartition([[0, 1]], weights=[1.0])
    part = GroupPartition.from_labels(["b", "a", "b", "c"])
    assert [list(g) for g in part.groups] == [[0, 2], [1], [3]]
    assert part.labels == ["b", "a", "c"]
    with pytest.raises(DimensionError):
        prox_regularizer(np.zeros(3), part, 1.0)


def test_moreau_envelope_value(rng):
    # x = (1/3, 0): rho * (1/3)^2 + ((2/3)^2 + (1/2)^2) / 2
    part = GroupPartition.contiguous_blocks([2])
    val = moreau_envelope(np.array([1.0, 0.5]), part, 1.0)
    assert val == pytest.approx((1.0 / 3.0) ** 2 + 0.5 * ((2.0 / 3.0) ** 2 + 0.25), rel=1e-15)


def _general_position(rng, part, rho):
    """Random point whose prox has every margin above 1e-3."""
    while True:
        a = rng.standard_normal(part.n) * 2.0
        res = prox_regularizer(a, part, rho)
        x = res.x
        ok = True
        for k, g in enumerate(part.groups):
            thr = 2.0 * rho * part.weights[g] * res.alpha_bar[k]
            gap = np.abs(np.abs(a[g]) - thr)
            if gap.min() < 1e-3:
                ok = False
        if ok and np.all((np.abs(x) > 1e-3) | (x == 0)):
            return a, res


def test_jacobian_is_exact_on_linearity_region(rng):
    part = GroupPartition.contiguous_blocks([4, 3, 5], weights=rng.uniform(0.5, 2, 12))
    rho = 0.3
    for _ in range(30):
        a, res = _general_position(rng, part, rho)
        M = hs_jacobian(res, part)
        d = rng.standard_normal(part.n) * 1e-6
        lhs = prox_regularizer(a + d, part, rho).x - res.x - M.apply(d)
        assert np.max(np.abs(lhs)) <= 1e-12
        np.testing.assert_allclose(M.to_dense() @ d, M.apply(d), atol=1e-18)


@given(partitioned(), st.floats(1e-2, 1e2), st.data())
def test_jacobian_symmetric_with_spectrum_in_unit_interval(part, rho, data):
    a = data.draw(arrays(np.float64, part.n, elements=finite))
    M = hs_jacobian(prox_regularizer(a, part, rho), part).to_dense()
    np.testing.assert_allclose(M, M.T, atol=1e-14)
    ev = np.linalg.eigvalsh(M)
    assert ev.min() >= -1e-12 and ev.max() <= 1.0 + 1e-12


def test_jacobian_rejects_other_parameter(rng):
    part = GroupPartition.contiguous_blocks([3])
    res = prox_regularizer(rng.standard_normal(3), part, 1.0)
    with pytest.raises(ValueError):
        hs_jacobian(res, part, 2.0)


def test_threshold_tie_counts_as_active():
    # |a_2| sits exactly at the threshold: the coordinate is zero and active
    res = prox_sq_l1(np.array([1.0, 0.5]), np.ones(2), 1.0)
    thr = 2.0 * 1.0 * res.alpha_bar[0]
    assert thr == pytest.approx(2.0 / 3.0)
    res2 = prox_sq_l1(np.array([1.0, 2.0 / 3.0]), np.ones(2), 1.0)
    assert res2.active[1]
