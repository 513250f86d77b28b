"""Brute-force reference values for small instances.

Nothing here shares code with the LP paths it is used to check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DiscreteDistribution, GridFunction
from .errors import InputError

MAX_K = 3
MAX_ATOMS = 4
MAX_SCAN = 500_000


class SizeError(InputError):
    """Instance too large for exhaustive enumeration."""


@dataclass(frozen=True)
class SmallInstance:
    F: GridFunction
    marginals: tuple

    def __post_init__(self):
        margs = tuple(self.marginals)
        if self.F.K > MAX_K:
            raise SizeError(f"oracle handles K <= {MAX_K}, got {self.F.K}")
        if len(margs) != self.F.K:
            raise InputError("one marginal per coordinate is required")
        if any(mu.atoms.size > MAX_ATOMS for mu in margs):
            raise SizeError(f"oracle handles at most {MAX_ATOMS} atoms per marginal")
        object.__setattr__(self, "marginals", margs)

    def value_at(self, atoms) -> float:
        idx = []
        for k, x in enumerate(atoms):
            hit = np.flatnonzero(np.isclose(self.F.axes[k], x, rtol=0, atol=1e-12))
            if hit.size == 0:
                raise InputError(f"atom {x} is not on axis {k}")
            idx.append(hit[0])
        return float(self.F.values[tuple(idx)])


@dataclass(frozen=True)
class OracleResult:
    value: float
    support: tuple  # ((x_1, ..., x_K), mass) pairs of the best coupling found
    exact: bool


def _tree_solution(cells, supply, demand):
    """Unique flow on a spanning-tree basis via leaf elimination, or None."""
    m, n = len(supply), len(demand)
    rem = list(supply) + list(demand)
    edges = {e: (i, m + j) for e, (i, j) in enumerate(cells)}
    deg = [0] * (m + n)
    for a, b in edges.values():
        deg[a] += 1
        deg[b] += 1
    flow = {}
    live = dict(edges)
    while live:
        leaf = next((v for v in range(m + n) if deg[v] == 1), None)
        if leaf is None:
            return None
        e = next(e for e, (a, b) in live.items() if leaf in (a, b))
        a, b = live.pop(e)
        other = b if a == leaf else a
        f = rem[leaf]
        if f < -1e-12:
            return None
        flow[e] = f
        rem[leaf] = 0.0
        rem[other] -= f
        deg[a] -= 1
        deg[b] -= 1
    if any(abs(r) > 1e-9 for r in rem) or any(f < -1e-12 for f in flow.values()):
        return None
    return [max(flow[e], 0.0) for e in range(len(cells))]


def _is_spanning_tree(cells, m, n):
    parent = list(range(m + n))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for i, j in cells:
        a, b = find(i), find(m + j)
        if a == b:
            return False
        parent[a] = b
    return True


def _vertices_2d(inst: SmallInstance):
    mu, nu = (m.drop_null_atoms() for m in inst.marginals)
    m, n = mu.atoms.size, nu.atoms.size
    all_cells = [(i, j) for i in range(m) for j in range(n)]
    best = (-np.inf, ())
    for cells in itertools.combinations(all_cells, m + n - 1):
        if not _is_spanning_tree(cells, m, n):
            continue
        flow = _tree_solution(cells, mu.probs, nu.probs)
        if flow is None:
            continue
        val = sum(
            f * inst.value_at((mu.atoms[i], nu.atoms[j])) for f, (i, j) in zip(flow, cells)
        )
        if val > best[0]:
            supp = tuple(
                ((float(mu.atoms[i]), float(nu.atoms[j])), f)
                for f, (i, j) in zip(flow, cells)
                if f > 0
            )
            best = (val, supp)
    return best


def _particles(mu: DiscreteDistribution, N: int):
    """Split a law into ``N`` equal particles by largest remainders."""
    raw = mu.probs * N
    counts = np.floor(raw).astype(int)
    short = N - counts.sum()
    order = np.argsort(-(raw - counts), kind="stable")
    counts[order[:short]] += 1
    exact = bool(np.allclose(counts, raw, atol=1e-9))
    return [float(x) for x, c in zip(mu.atoms, counts) for _ in range(c)], exact


def _scan_3d(inst: SmallInstance, N: int):
    parts, exact = zip(*(_particles(mu, N) for mu in inst.marginals))
    perms = [sorted(set(itertools.permutations(p))) for p in parts[1:]]
    total = np.prod([len(p) for p in perms])
    if total > MAX_SCAN:
        raise SizeError(f"scan of {total} arrangements exceeds {MAX_SCAN}; lower the resolution")
    cache = {}

    def F(pt):
        if pt not in cache:
            cache[pt] = inst.value_at(pt)
        return cache[pt]

    best = (-np.inf, ())
    for arrangement in itertools.product(*perms):
        pts = list(zip(parts[0], *arrangement))
        val = sum(F(pt) for pt in pts) / N
        if val > best[0]:
            best = (val, pts)
    val, pts = best
    masses = {}
    for pt in pts:
        masses[pt] = masses.get(pt, 0.0) + 1.0 / N
    return val, tuple(masses.items()), all(exact)


def enumerate_couplings_value(inst: SmallInstance, resolution: int = 4) -> OracleResult:
    """Largest ``E[F]`` over couplings, by enumeration.

    * ``K = 1``: the only coupling is the marginal itself.
    * ``K = 2``: every basic feasible solution of the transportation polytope
      is built from a spanning-tree basis and evaluated; the maximum over
      vertices is the exact optimum.
    * ``K = 3``: each marginal is split into ``resolution`` equal particles
      and all arrangements of the second and third particle lists against the
      first are scanned.  This is a lower bound, exact when the marginals are
      multiples of ``1/resolution`` and some optimal coupling is too.
    """
    K = inst.F.K
    if K == 1:
        mu = inst.marginals[0]
        val = sum(p * inst.value_at((x,)) for x, p in zip(mu.atoms, mu.probs))
        supp = tuple(((float(x),), float(p)) for x, p in zip(mu.atoms, mu.probs) if p > 0)
        return OracleResult(float(val), supp, True)
    if K == 2:
        val, supp = _vertices_2d(inst)
        return OracleResult(float(val), supp, True)
    if resolution < 1:
        raise InputError("resolution must be a positive integer")
    val, supp, _ = _scan_3d(inst, resolution)
    return OracleResult(float(val), supp, False)


def enumerate_binary_mean_laws(phi, axis, theta: float | None = None) -> float:
    """Largest ``E[phi(X)]`` over binary e-variable laws on ``axis``, by loops.

    Candidates: single atoms ``x <= 1``; pairs ``x < 1 < y`` weighted to mean
    exactly 1; pairs of atoms both ``<= 1`` at a few mixing weights (never
    better than a single atom, kept as a cross-check).
    """
    axis = [float(a) for a in axis]
    phi = [float(v) for v in phi]
    if theta is not None:
        keep = [i for i, a in enumerate(axis) if a <= theta]
        axis, phi = [axis[i] for i in keep], [phi[i] for i in keep]
    best = -np.inf
    for x, fx in zip(axis, phi):
        if x <= 1:
            best = max(best, fx)
    for (x, fx), (y, fy) in itertools.product(zip(axis, phi), repeat=2):
        if x < 1 < y:
            py = (1 - x) / (y - x)
            best = max(best, (1 - py) * fx + py * fy)
        elif x < y <= 1:
            for w in (0.25, 0.5, 0.75):
                best = max(best, w * fx + (1 - w) * fy)
    return best


def grid_lp_sup_mean(phi, axis) -> float:
    """``max E[phi(X)]`` over all laws on ``axis`` with mean <= 1, via HiGHS."""
    from scipy.optimize import linprog

    axis = np.asarray(axis, dtype=float)
    phi = np.asarray(phi, dtype=float)
    res = linprog(
        -phi,
        A_ub=axis[None, :],
        b_ub=[1.0],
        A_eq=np.ones((1, axis.size)),
        b_eq=[1.0],
        bounds=(0, None),
        method="highs",
    )
    return float(-res.fun)


def brute_force_mean_of_affine(lam, marginals: Sequence[DiscreteDistribution]) -> float:
    """``sum_k lam_k mean(mu_k) + lam_K`` written out by hand."""
    lam = np.asarray(getattr(lam, "entries", lam), dtype=float)
    return float(sum(l * mu.mean for l, mu in zip(lam[:-1], marginals)) + lam[-1])
