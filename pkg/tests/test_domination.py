import numpy as np
import pytest

from conftest import random_simplex, random_valid_F
from emerge.core import GridFunction, grid_sample, make_axis, weighted_merge
from emerge.domination import dominate, linear_majorant, min_separable_bound, sup_mean_constrained
from emerge.errors import DomainError, InputError, InvalidMergingFunctionError, PreconditionError
from emerge.oracle import enumerate_binary_mean_laws, grid_lp_sup_mean


def random_phi(rng, axis):
    kind = rng.integers(3)
    if kind == 0:
        return rng.random(axis.size) * 3
    if kind == 1:
        return np.cumsum(rng.random(axis.size))
    return np.sqrt(axis) * rng.random() + rng.random() * (axis > 1.5)


# --- sup_mean_constrained ----------------------------------------------------------


def test_sup_mean_identity():
    axis = np.array([0, 0.5, 1, 1.5, 2])
    res = sup_mean_constrained(axis, axis)
    assert res.value == pytest.approx(1.0)
    assert res.law.mean <= 1 + 1e-12


def test_sup_mean_square_on_three_points():
    axis = np.array([0.0, 1.0, 2.0])
    res = sup_mean_constrained(axis**2, axis)
    assert res.value == pytest.approx(2.0)
    np.testing.assert_allclose(res.law.atoms, [0, 2])
    np.testing.assert_allclose(res.law.probs, [0.5, 0.5])


def test_sup_mean_constant():
    axis = make_axis(4, 5)
    assert sup_mean_constrained(np.full(axis.size, 0.7), axis).value == pytest.approx(0.7)


@pytest.mark.parametrize("seed", range(30))
def test_sup_mean_matches_grid_lp(seed):
    rng = np.random.default_rng(seed)
    axis = make_axis(float(rng.choice([2, 4, 8])), int(rng.integers(3, 9)))
    phi = random_phi(rng, axis)
    res = sup_mean_constrained(phi, axis)
    assert res.value == pytest.approx(grid_lp_sup_mean(phi, axis), abs=1e-9)
    assert res.value == pytest.approx(enumerate_binary_mean_laws(phi, axis), abs=1e-9)
    # the reported law attains the value
    idx = np.searchsorted(axis, res.law.atoms)
    assert phi[idx] @ res.law.probs == pytest.approx(res.value, abs=1e-12)


# --- linear_majorant ---------------------------------------------------------------------


def test_majorant_identity():
    axis = np.array([0, 0.5, 1, 2])
    res = linear_majorant(axis, axis, 1.0)
    assert (res.h_min, res.h_max, res.h) == pytest.approx((1.0, 1.0, 1.0))


def test_majorant_constant_forces_flat():
    axis = np.array([0, 0.5, 1, 2])
    res = linear_majorant(np.ones(4), axis, 1.0)
    assert (res.h_min, res.h_max, res.h) == pytest.approx((0.0, 0.0, 0.0))


def test_majorant_recovers_affine_slope():
    axis = np.array([0, 0.5, 1, 2, 4])
    res = linear_majorant((1 + axis) / 2, axis, 1.0)
    assert (res.h_min, res.h_max, res.h) == pytest.approx((0.5, 0.5, 0.5))


def test_majorant_square_reports_adversary():
    axis = np.array([0.0, 1.0, 2.0])
    with pytest.raises(PreconditionError) as info:
        linear_majorant(axis**2, axis, 1.0)
    law = info.value.witness
    np.testing.assert_allclose(law.atoms, [0, 2])
    np.testing.assert_allclose(law.probs, [0.5, 0.5])
    assert law.probs @ law.atoms**2 == pytest.approx(2.0)


def test_majorant_rejects_negative_r():
    with pytest.raises(DomainError):
        linear_majorant([0, 1, 2], [0, 1, 2], -1.0)


@pytest.mark.parametrize("seed", range(30))
def test_majorant_bound_and_tightness(seed):
    rng = np.random.default_rng(1000 + seed)
    axis = make_axis(float(rng.choice([2, 4, 8])), int(rng.integers(3, 9)))
    g = random_phi(rng, axis)
    r = sup_mean_constrained(g, axis).value
    res = linear_majorant(g, axis, r)
    assert res.h_min <= res.h_max + 1e-9
    assert np.all(g <= res(axis) + 1e-9 * max(1, r))
    if res.h_min > 0:
        assert np.min(np.abs(g - res(axis))[axis > 1]) <= 1e-6


# --- dominate ---------------------------------------------------------------------------


def weighted_F(lam, theta=4, points=5, K=None):
    K = len(lam) - 1 if K is None else K
    return grid_sample(lambda e: weighted_merge(lam, e), theta, points, K=K)


def test_dominate_self_domination_example():
    rep = dominate(weighted_F([0.5, 0.2, 0.3]), 1e-3)
    assert np.abs(rep.weights.entries - [0.5, 0.2, 0.3]).max() <= 0.01
    assert rep.max_violation <= 1e-8


def test_dominate_constant_one():
    F = grid_sample(lambda e: 1.0, 4, 5, K=2)
    rep = dominate(F, 1e-3)
    np.testing.assert_allclose(rep.weights.entries, [0, 0, 1], atol=1e-12)
    assert rep.max_violation <= 1e-8


def test_dominate_rejects_max(max_grid):
    with pytest.raises(InvalidMergingFunctionError) as info:
        dominate(max_grid, 1e-3)
    assert info.value.witness.worst_value == pytest.approx(2.0, abs=1e-8)


def test_dominate_unchecked_still_rejects_max(max_grid):
    with pytest.raises(InvalidMergingFunctionError):
        dominate(max_grid, 1e-3, check=False)


def test_dominate_rejects_nonpositive_epsilon():
    with pytest.raises(DomainError):
        dominate(weighted_F([0.5, 0.2, 0.3]), 0.0)


@pytest.mark.parametrize("seed", range(8))
def test_dominate_random_valid(seed):
    rng = np.random.default_rng(2000 + seed)
    F = random_valid_F(rng)
    rep = dominate(F, 1e-3)
    lam = rep.weights.entries
    assert lam.min() >= 0 and abs(lam.sum() - 1) <= 1e-12
    mesh = np.meshgrid(*F.axes, indexing="ij")
    merged = sum(lam[k] * mesh[k] for k in range(2)) + lam[-1]
    assert (F.values - (1 + 1e-3) * merged).max() <= 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_total_T_nondecreasing_in_theta(seed):
    rng = np.random.default_rng(3000 + seed)
    lams = [random_simplex(rng, 3) for _ in range(2)]
    f = lambda e: min(l[:-1] @ e + l[-1] for l in lams)
    small = make_axis(2, 3)
    big = np.union1d(small, make_axis(6, 4))
    F_small = grid_sample(f, 2, [small, small])
    F_big = grid_sample(f, 6, [big, big])
    v_small, *_ = min_separable_bound(F_small)
    v_big, *_ = min_separable_bound(F_big)
    assert v_big >= v_small - 1e-9
    assert dominate(F_big, 1e-3).total_T >= dominate(F_small, 1e-3).total_T - 1e-9


def test_symmetric_option_gives_equal_weights():
    F = grid_sample(lambda e: min(0.5 * (e[0] + e[1]), 0.5 + 0.25 * (e[0] + e[1])), 4, 5, K=2)
    rep = dominate(F, 1e-3, symmetric=True)
    assert rep.weights.entries[0] == pytest.approx(rep.weights.entries[1], abs=1e-8)
    assert rep.max_violation <= 1e-8


def test_symmetric_option_rejects_asymmetric_F():
    with pytest.raises(InputError):
        dominate(weighted_F([0.5, 0.2, 0.3]), 1e-3, symmetric=True)


def test_report_serializes():
    d = dominate(weighted_F([0.5, 0.2, 0.3]), 1e-3).to_dict()
    assert d["violation_tolerance"] == 1e-8 and len(d["lambda"]) == 3
