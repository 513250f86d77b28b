import numpy as np
import pytest

from conftest import random_instance, random_law, random_simplex
from emerge.core import DiscreteDistribution, grid_sample, make_axis, weighted_merge
from emerge.oracle import (
    SizeError,
    SmallInstance,
    brute_force_mean_of_affine,
    enumerate_binary_mean_laws,
    enumerate_couplings_value,
    grid_lp_sup_mean,
)
from emerge.transport import worst_case_expectation


def test_max_two_by_two(max_grid, half_half):
    res = enumerate_couplings_value(SmallInstance(max_grid, half_half))
    assert res.value == pytest.approx(2.0)
    assert res.exact
    support = {tuple(pt): m for pt, m in res.support}
    assert support == pytest.approx({(2.0, 0.0): 0.5, (0.0, 2.0): 0.5})


@pytest.mark.parametrize("K", [2, 3])
def test_weighted_average_constant_over_couplings(K, rng):
    axis = np.array([0.0, 0.5, 1.0, 2.0])
    lam = random_simplex(rng, K + 1)
    F = grid_sample(lambda e: weighted_merge(lam, e), 2, [axis] * K)
    margs = tuple(DiscreteDistribution([0.0, 2.0], [0.5, 0.5]) for _ in range(K))
    res = enumerate_couplings_value(SmallInstance(F, margs), resolution=2)
    assert res.value == pytest.approx(brute_force_mean_of_affine(lam, margs), abs=1e-12)


def test_single_atom_marginals():
    F = grid_sample(max, 2, [[0, 1, 2], [0, 1, 2]])
    margs = (DiscreteDistribution.point_mass(1.0), DiscreteDistribution.point_mass(2.0))
    assert enumerate_couplings_value(SmallInstance(F, margs)).value == 2.0


def test_size_limits():
    F = grid_sample(lambda e: 1.0, 2, 3, K=4)
    mu = DiscreteDistribution.point_mass(1.0)
    with pytest.raises(SizeError):
        SmallInstance(F, (mu,) * 4)
    F2 = grid_sample(max, 4, [make_axis(4, 6)] * 2)
    mu5 = DiscreteDistribution(F2.axes[0][:5], np.full(5, 0.2))
    with pytest.raises(SizeError):
        SmallInstance(F2, (mu5, mu5))


@pytest.mark.parametrize("seed", range(20))
def test_three_marginal_scan_is_a_lower_bound(seed):
    rng = np.random.default_rng(500 + seed)
    F, _ = random_instance(rng, K=3)
    axis = F.axes[0]
    margs = tuple(
        DiscreteDistribution(np.sort(rng.choice(axis, 2, replace=False)), [0.5, 0.5]) for _ in range(3)
    )
    scan = enumerate_couplings_value(SmallInstance(F, margs), resolution=2)
    lp = worst_case_expectation(F, margs).primal_value
    assert scan.value <= lp + 1e-9
    # half-half marginals: every vertex coupling uses masses in {0, 1/2}, so the scan is exact
    assert scan.value == pytest.approx(lp, abs=1e-8)


def test_binary_mean_laws_examples():
    axis = [0.0, 1.0, 2.0]
    assert enumerate_binary_mean_laws([0.0, 1.0, 4.0], axis) == pytest.approx(2.0)
    assert enumerate_binary_mean_laws(axis, axis) == pytest.approx(1.0)
    assert enumerate_binary_mean_laws([0.3] * 3, axis) == pytest.approx(0.3)


def test_binary_mean_laws_theta_truncation():
    axis = [0.0, 1.0, 2.0, 4.0]
    phi = [0.0, 1.0, 1.0, 4.0]
    assert enumerate_binary_mean_laws(phi, axis) == pytest.approx(1.0 * 0.75 * 0 + 0.25 * 4)
    assert enumerate_binary_mean_laws(phi, axis, theta=2.0) == pytest.approx(1.0)


@pytest.mark.parametrize("seed", range(10))
def test_binary_laws_agree_with_grid_lp(seed):
    rng = np.random.default_rng(seed)
    axis = make_axis(4, 6)
    phi = rng.random(axis.size) * 2
    assert enumerate_binary_mean_laws(phi, axis) == pytest.approx(grid_lp_sup_mean(phi, axis), abs=1e-9)


def test_oracle_is_deterministic(rng):
    F, margs = random_instance(rng, K=2)
    a = enumerate_couplings_value(SmallInstance(F, margs))
    b = enumerate_couplings_value(SmallInstance(F, margs))
    assert a == b
