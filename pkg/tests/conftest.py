import numpy as np
import pytest

from emerge.core import DiscreteDistribution, GridFunction, grid_sample, make_axis


def random_simplex(rng, n):
    return rng.dirichlet(np.ones(n))


def random_valid_F(rng, K=2, theta=4.0, points=5):
    """Minimum or mixture of a few weighted averages; valid by construction."""
    lams = [random_simplex(rng, K + 1) for _ in range(rng.integers(1, 4))]
    if rng.random() < 0.5:
        f = lambda e: min(l[:-1] @ e + l[-1] for l in lams)
    else:
        w = random_simplex(rng, len(lams))
        f = lambda e: sum(wi * (l[:-1] @ e + l[-1]) for wi, l in zip(w, lams))
    return grid_sample(f, theta, points, K=K)


def random_monotone_F(rng, axes, theta=None):
    """Nonnegative table that is nondecreasing along every axis."""
    axes = [np.asarray(a, dtype=float) for a in axes]
    vals = rng.random(tuple(a.size for a in axes))
    for k in range(len(axes)):
        vals = np.cumsum(vals, axis=k)
    vals /= vals.max()
    theta = max(a.max() for a in axes) if theta is None else theta
    return GridFunction(theta, tuple(axes), vals * rng.uniform(0.5, 3.0))


def random_law(rng, axis, n_atoms):
    atoms = np.sort(rng.choice(axis, size=n_atoms, replace=False))
    return DiscreteDistribution(atoms, random_simplex(rng, n_atoms))


def random_instance(rng, K, max_atoms=4):
    axis = np.array([0.0, 0.5, 1.0, 2.0, 3.0])
    F = random_monotone_F(rng, [axis] * K)
    margs = tuple(random_law(rng, axis, rng.integers(1, max_atoms + 1)) for _ in range(K))
    return F, margs


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def max_grid():
    return grid_sample(max, 2, [[0, 1, 2], [0, 1, 2]])


@pytest.fixture
def half_half():
    mu = DiscreteDistribution([0, 2], [0.5, 0.5])
    return (mu, mu)


@pytest.fixture
def axis4():
    return make_axis(4, 5)


# --- acceptance summary -------------------------------------------------------------

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
