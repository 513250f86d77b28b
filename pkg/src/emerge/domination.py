"""Extract a weighted average that dominates a valid merging function.

The pipeline has three pieces:

* :func:`sup_mean_constrained` -- the largest mean of ``phi(E)`` over
  e-variable laws on a grid (attained by one- or two-point laws);
* :func:`linear_majorant` -- an affine bound ``r (1 - h + h x)`` over a
  univariate function whose mean-constrained supremum is at most ``r``;
* :func:`dominate` -- a separable dual with the smallest total
  mean-constrained supremum, turned into weights ``lam`` with
  ``F <= (1 + eps) M_lam`` on the grid.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DiscreteDistribution,
    GridFunction,
    LP_TOL,
    Weights,
    extreme_evalue_laws,
)
from .errors import (
    ConsistencyError,
    DomainError,
    InputError,
    InvalidMergingFunctionError,
    PreconditionError,
)
from .lp import solve_lp
from .transport import _outer_sum, certify_valid, worst_case_expectation

MAJORANT_TOL = 1e-9
VIOLATION_TOL = 1e-8


def _univariate(values, axis):
    axis = np.asarray(axis, dtype=float)
    values = np.asarray(values, dtype=float)
    if axis.size == 0:
        raise DomainError("empty grid")
    if values.shape != axis.shape:
        raise InputError(f"{values.size} values for an axis of {axis.size} points")
    if not (np.any(axis == 0.0) and np.any(axis == 1.0)):
        raise DomainError("the grid must contain 0 and 1")
    if not np.all(np.isfinite(values)):
        raise DomainError("function values must be finite")
    return values, axis


@dataclass(frozen=True)
class MeanSup:
    """Value of :func:`sup_mean_constrained` and a law attaining it."""

    value: float
    law: DiscreteDistribution


def sup_mean_constrained(phi, axis) -> MeanSup:
    """Maximise ``E[phi(X)]`` over laws on ``axis`` with ``E[X] <= 1``.

    The feasible set has one moment constraint, so its extreme points carry
    at most two atoms: a single atom ``x <= 1``, or ``x < 1 < y`` mixed to
    mean exactly 1.  All of them are scanned.
    """
    phi, axis = _univariate(phi, axis)
    lo = np.flatnonzero(axis <= 1)
    best_i = lo[np.argmax(phi[lo])]
    best = float(phi[best_i])
    law = DiscreteDistribution.point_mass(float(axis[best_i]))

    xs = np.flatnonzero(axis < 1)
    ys = np.flatnonzero(axis > 1)
    if xs.size and ys.size:
        x, y = axis[xs][:, None], axis[ys][None, :]
        wy = (1.0 - x) / (y - x)
        vals = (1.0 - wy) * phi[xs][:, None] + wy * phi[ys][None, :]
        i, j = np.unravel_index(np.argmax(vals), vals.shape)
        if vals[i, j] > best:
            best = float(vals[i, j])
            law = DiscreteDistribution.two_point(float(axis[xs[i]]), float(axis[ys[j]]))
    return MeanSup(best, law)


@dataclass(frozen=True)
class MajorantResult:
    """Affine majorant ``r (1 - h + h x)`` with its feasible slope interval."""

    r: float
    h_min: float
    h_max: float
    h: float
    theta: float

    def __call__(self, x):
        return self.r * (1.0 - self.h + self.h * np.asarray(x, dtype=float))


def _mean_one_mix(x0: float, y0: float) -> DiscreteDistribution:
    return DiscreteDistribution.two_point(x0, y0)


def linear_majorant(g, axis, r: float, *, tol: float = MAJORANT_TOL) -> MajorantResult:
    """Find ``h in [0, 1]`` with ``g(x) <= r (1 - h + h x)`` on the grid.

    Points below 1 bound the slope from above, points above 1 bound it from
    below::

        h_max = min_{x < 1} (1 - g(x)/r) / (1 - x)     (capped at 1)
        h_min = max_{y > 1} (g(y)/r - 1) / (y - 1)     (floored at 0)

    The smallest feasible slope ``h_min`` is returned.  An empty interval
    means some binary e-variable pushes ``E[g]`` above ``r``; that law is
    attached to the raised :class:`PreconditionError`.
    """
    g, axis = _univariate(g, axis)
    theta = float(axis.max())
    if r < 0:
        raise DomainError(f"r must be >= 0, got {r}")
    if r <= tol:
        if np.abs(g).max() > tol:
            sup = sup_mean_constrained(g, axis)
            raise PreconditionError(
                f"r = {r} but g is not identically 0 (mean-constrained sup {sup.value})",
                witness=sup.law,
            )
        return MajorantResult(float(r), 0.0, 1.0, 0.0, theta)

    gr = g / r
    at_one = float(gr[axis == 1.0][0])
    if at_one > 1 + tol:
        raise PreconditionError(
            f"g(1) = {at_one * r} exceeds r = {r}",
            witness=DiscreteDistribution.point_mass(1.0),
        )
    xs = np.flatnonzero(axis < 1)
    ys = np.flatnonzero(axis > 1)
    upper = (1.0 - gr[xs]) / (1.0 - axis[xs])
    i_up = int(np.argmin(upper))
    b = float(upper[i_up])
    if ys.size:
        lower = (gr[ys] - 1.0) / (axis[ys] - 1.0)
        i_lo = int(np.argmax(lower))
        a = float(lower[i_lo])
    else:
        a = -np.inf
    h_max = min(b, 1.0)
    h_min = max(a, 0.0)
    if h_min > h_max + tol:
        x0 = float(axis[xs[i_up]])
        if a > b:
            law = _mean_one_mix(x0, float(axis[ys[i_lo]]))
        elif a > 1:
            law = _mean_one_mix(0.0, float(axis[ys[i_lo]]))
        else:
            law = DiscreteDistribution.point_mass(x0)
        mean_g = float(np.interp(law.atoms, axis, g) @ law.probs)
        raise PreconditionError(
            f"no feasible slope: h_min = {h_min:.6g} > h_max = {h_max:.6g}; "
            f"a binary e-variable gives E[g] = {mean_g:.6g} > r = {r}",
            witness=law,
        )
    h = min(h_min, h_max)
    res = MajorantResult(float(r), float(h_min), float(h_max), float(h), theta)
    excess = float((g - res(axis)).max())
    if excess > tol * max(1.0, r):
        raise ConsistencyError(f"majorant misses g by {excess:.3g}")
    return res


# ---------------------------------------------------------------------------
# Domination pipeline
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DominationReport:
    """Weights ``lam`` with ``F <= (1 + epsilon) M_lam`` on the grid of ``F``."""

    weights: Weights
    epsilon: float
    theta: float
    max_violation: float
    per_k: tuple
    total_T: float
    phi: tuple = field(repr=False, default=())

    def to_dict(self) -> dict:
        return {
            "lambda": self.weights.entries.tolist(),
            "epsilon": self.epsilon,
            "theta": self.theta,
            "max_violation": self.max_violation,
            "violation_tolerance": VIOLATION_TOL,
            "total_T": self.total_T,
            "per_k": [{"T": T, "h": h} for T, h in self.per_k],
        }


def _law_constraints(axis):
    return [(mu, np.searchsorted(axis, mu.atoms)) for mu in extreme_evalue_laws(axis)]


def _is_symmetric(F: GridFunction, tol=1e-12) -> bool:
    if any(a.shape != F.axes[0].shape or np.any(a != F.axes[0]) for a in F.axes):
        return False
    for perm in itertools.permutations(range(F.K)):
        if np.abs(F.values - F.values.transpose(perm)).max() > tol:
            return False
    return True


def min_separable_bound(F: GridFunction, *, method: str = "simplex"):
    """Minimise ``sum_k T_{phi_k}`` over nonnegative ``phi`` with ``sum_k phi_k >= F``.

    ``T_{phi_k}`` enters through its epigraph: one constraint per extreme
    e-variable law on axis ``k``.  The optimal value equals the largest
    worst-case expectation of ``F`` over all e-variable laws on the grid, so
    a value above 1 means ``F`` is invalid; the dual weights on the epigraph
    rows then assemble the offending marginals.

    Returns ``(value, phi, marginals)``.
    """
    K = F.K
    sizes = [a.size for a in F.axes]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    n = offs[-1] + K

    rows, rhs = [], []
    for idx in itertools.product(*(range(s) for s in sizes)):
        row = np.zeros(n)
        for k, i in enumerate(idx):
            row[offs[k] + i] -= 1.0
        rows.append(row)
        rhs.append(-F.values[idx])
    law_rows = []
    for k, axis in enumerate(F.axes):
        for mu, pos in _law_constraints(axis):
            row = np.zeros(n)
            row[offs[k] + pos] = mu.probs
            row[offs[-1] + k] = -1.0
            rows.append(row)
            rhs.append(0.0)
            law_rows.append((k, mu))
    c = np.zeros(n)
    c[offs[-1] :] = 1.0
    res = solve_lp(c, np.array(rows), np.array(rhs), method=method)

    phi = [res.x[offs[k] : offs[k + 1]].copy() for k in range(K)]
    deficit = float((F.values - _outer_sum(phi)).max())
    if deficit > 0:
        phi[0] += deficit

    # dual weights of the epigraph rows mix into one law per coordinate
    w = -res.duals_ub[len(rhs) - len(law_rows) :]
    marginals = []
    for k, axis in enumerate(F.axes):
        probs = np.zeros(axis.size)
        for wi, (kk, mu) in zip(w, law_rows):
            if kk == k and wi > 0:
                probs[np.searchsorted(axis, mu.atoms)] += wi * mu.probs
        if probs.sum() <= 0:
            probs[axis == 1.0] = 1.0
        marginals.append(DiscreteDistribution(axis, probs / probs.sum()))
    return float(res.value), phi, tuple(marginals)


def dominate(
    F: GridFunction,
    epsilon: float,
    *,
    check: bool = True,
    symmetric: bool = False,
    tol: float = LP_TOL,
    method: str = "simplex",
) -> DominationReport:
    """Find ``lam`` in the simplex with ``F <= (1 + epsilon) M_lam`` on the grid.

    Parameters
    ----------
    F : GridFunction
        Candidate merging function.
    epsilon : float
        Multiplicative slack, > 0.
    check : bool
        Screen ``F`` first (cap check plus worst-case LPs over mean-one
        two-point marginals).
    symmetric : bool
        For symmetric ``F`` on identical axes, average the dual components so
        that all input weights come out equal.

    Raises
    ------
    InvalidMergingFunctionError
        When ``F`` is not valid at grid scale; ``witness`` holds the
        marginals (and certificate) exhibiting an expectation above 1.
    ConsistencyError
        If the assembled weights fail the final grid scan.
    """
    if not epsilon > 0:
        raise DomainError(f"epsilon must be > 0, got {epsilon}")
    if check:
        report = certify_valid(F, tol=tol, method=method)
        if report.verdict == "invalid":
            raise InvalidMergingFunctionError(
                f"F is not an e-merging function: expectation {report.worst_value:.6g} > 1",
                witness=report,
            )

    value, phi, margs = min_separable_bound(F, method=method)
    if value > 1 + epsilon:
        cert = worst_case_expectation(F, margs, method=method)
        raise InvalidMergingFunctionError(
            f"smallest separable bound is {value:.6g} > 1 + epsilon; "
            f"worst-case expectation {cert.primal_value:.6g} under the attached marginals",
            witness=cert,
        )
    if symmetric:
        if not _is_symmetric(F):
            raise InputError("symmetric=True needs a symmetric F on identical axes")
        avg = sum(phi) / F.K
        phi = [avg.copy() for _ in range(F.K)]

    per_k, lam = [], np.zeros(F.K + 1)
    for k, (p, axis) in enumerate(zip(phi, F.axes)):
        T = sup_mean_constrained(p, axis).value
        maj = linear_majorant(p, axis, T)
        per_k.append((T, maj.h))
        lam[k] = T * maj.h / (1 + epsilon)
    total_T = float(sum(T for T, _ in per_k))
    if total_T > 1 + epsilon + tol:
        raise ConsistencyError(f"sum of T = {total_T} exceeds 1 + epsilon")

    lam[:-1] = np.maximum(lam[:-1], 0.0)
    head = lam[:-1].sum()
    if head > 1:
        lam[:-1] /= head
    lam[-1] = max(0.0, 1.0 - lam[:-1].sum())
    weights = Weights(lam)

    mesh = np.meshgrid(*F.axes, indexing="ij")
    merged = sum(lam[k] * mesh[k] for k in range(F.K)) + lam[-1]
    violation = float((F.values - (1 + epsilon) * merged).max())
    if violation > VIOLATION_TOL:
        raise ConsistencyError(f"F exceeds (1 + epsilon) M_lam by {violation:.3g}")
    return DominationReport(
        weights, float(epsilon), F.theta, violation, tuple(per_k), total_T, tuple(phi)
    )
