"""Domain types and the weighted-average merging rule.

Everything here is a pure function of its inputs.  Arrays held by the
dataclasses are made read-only at construction so values can be shared
freely.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import AlignmentError, DomainError, InputError, MonotonicityError

# Tolerances: arithmetic identities, coupling consistency, LP-derived values.
ARITH_TOL = 1e-12
COUPLING_TOL = 1e-10
LP_TOL = 1e-6
MONOTONE_TOL = 1e-9


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Weights:
    """A point of the simplex with ``K + 1`` entries.

    The first ``K`` entries weight the e-values, the last one weights the
    constant 1.
    """

    entries: np.ndarray

    def __post_init__(self):
        w = _frozen(self.entries)
        if w.ndim != 1 or w.size < 1:
            raise InputError("weights must be a non-empty vector")
        if not np.all(np.isfinite(w)):
            raise DomainError("weights must be finite")
        if np.any(w < 0) or np.any(w > 1):
            raise DomainError(f"weights must lie in [0, 1], got {w.tolist()}")
        if abs(w.sum() - 1.0) > ARITH_TOL:
            raise DomainError(f"weights must sum to 1, got sum {w.sum()!r}")
        object.__setattr__(self, "entries", w)

    @property
    def K(self) -> int:
        return self.entries.size - 1

    @classmethod
    def uniform(cls, K: int, constant: float = 0.0) -> "Weights":
        """Equal weight on the ``K`` inputs, ``constant`` on the 1."""
        w = np.full(K + 1, (1.0 - constant) / K)
        w[-1] = constant
        return cls(w)

    def to_dict(self) -> dict:
        return {"entries": self.entries.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Weights":
        return cls(d["entries"])


@dataclass(frozen=True)
class EValueVector:
    """``K`` nonnegative finite e-values."""

    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 1:
            raise InputError("e-values must form a vector")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise DomainError(f"e-values must be finite and >= 0, got {v.tolist()}")
        object.__setattr__(self, "values", v)

    @property
    def K(self) -> int:
        return self.values.size


def as_evalues(e) -> np.ndarray:
    if isinstance(e, EValueVector):
        return e.values
    return EValueVector(e).values


def as_weights(lam) -> Weights:
    return lam if isinstance(lam, Weights) else Weights(lam)


def make_axis(theta: float, points: int = 5, extra: Sequence[float] = ()) -> np.ndarray:
    """Evenly spaced axis on ``[0, theta]`` that always contains 0, 1 and theta."""
    if theta < 1:
        raise DomainError(f"theta must be >= 1, got {theta}")
    if points < 2:
        raise DomainError("an axis needs at least 2 points")
    pts = np.concatenate([np.linspace(0.0, theta, points), [0.0, 1.0, theta], extra])
    pts = pts[(pts >= 0) & (pts <= theta)]
    return np.unique(pts)


def _check_axis(axis, theta: float, k: int) -> np.ndarray:
    a = _frozen(axis)
    if a.ndim != 1 or a.size == 0:
        raise InputError(f"axis {k} must be a non-empty vector")
    if np.any(np.diff(a) <= 0):
        raise InputError(f"axis {k} must be strictly increasing")
    if a[0] < 0 or a[-1] > theta:
        raise DomainError(f"axis {k} must lie in [0, theta={theta}]")
    for required in (0.0, 1.0, theta):
        if not np.any(a == required):
            raise InputError(f"axis {k} must contain {required}")
    return a


@dataclass(frozen=True)
class GridFunction:
    """A candidate merging function tabulated on a product grid in ``[0, theta]^K``."""

    theta: float
    axes: tuple
    values: np.ndarray

    def __post_init__(self):
        theta = float(self.theta)
        if not np.isfinite(theta) or theta < 1:
            raise DomainError(f"theta must be a finite real >= 1, got {self.theta}")
        axes = tuple(_check_axis(a, theta, k) for k, a in enumerate(self.axes))
        if not axes:
            raise InputError("a grid function needs at least one axis")
        vals = _frozen(self.values)
        shape = tuple(a.size for a in axes)
        if vals.shape != shape:
            raise InputError(f"values have shape {vals.shape}, grid has shape {shape}")
        if not np.all(np.isfinite(vals)):
            raise DomainError("grid values must be finite")
        if np.any(vals < 0):
            idx = tuple(int(i) for i in np.argwhere(vals < 0)[0])
            raise DomainError(f"negative value {vals[idx]} at grid index {idx}")
        _check_monotone(vals, axes)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", vals)

    @property
    def K(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def index_of(self, point) -> tuple:
        """Grid index of ``point``; raises :class:`AlignmentError` off-grid."""
        point = np.asarray(point, dtype=float)
        if point.shape != (self.K,):
            raise InputError(f"expected a point with {self.K} coordinates")
        idx = []
        for k, (x, axis) in enumerate(zip(point, self.axes)):
            hit = np.flatnonzero(np.abs(axis - x) <= ARITH_TOL * max(1.0, abs(x)))
            if hit.size == 0:
                raise AlignmentError(f"coordinate {k} value {x} is not on the grid axis")
            idx.append(int(hit[0]))
        return tuple(idx)

    def __call__(self, point) -> float:
        return float(self.values[self.index_of(point)])

    def nodes(self) -> np.ndarray:
        """All grid nodes as an array of shape ``(prod(shape), K)`` in C order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "axes": [a.tolist() for a in self.axes],
            "values": self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridFunction":
        return cls(d["theta"], tuple(d["axes"]), d["values"])


def _check_monotone(vals: np.ndarray, axes) -> None:
    for k in range(vals.ndim):
        step = np.diff(vals, axis=k)
        if step.size and step.min() < -MONOTONE_TOL:
            j = tuple(int(i) for i in np.unravel_index(np.argmin(step), step.shape))
            upper = list(j)
            upper[k] += 1
            lo = tuple(float(axes[m][j[m]]) for m in range(vals.ndim))
            hi = tuple(float(axes[m][upper[m]]) for m in range(vals.ndim))
            drop = float(-step[j])
            raise MonotonicityError(
                f"function decreases by {drop:.3g} from {lo} to {hi} along axis {k}",
                lower=lo,
                upper=hi,
                drop=drop,
            )


@dataclass(frozen=True)
class DiscreteDistribution:
    """A law on finitely many atoms in ``[0, theta]``."""

    atoms: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        a, p = _frozen(self.atoms), _frozen(self.probs)
        if a.ndim != 1 or a.shape != p.shape or a.size == 0:
            raise InputError("atoms and probs must be vectors of equal, positive length")
        if np.any(np.diff(a) <= 0):
            raise InputError("atoms must be strictly increasing")
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise DomainError("atoms must be finite and >= 0")
        if np.any(p < 0):
            raise DomainError("probabilities must be >= 0")
        if abs(p.sum() - 1.0) > ARITH_TOL:
            raise DomainError(f"probabilities must sum to 1, got {p.sum()!r}")
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "probs", p)

    @property
    def mean(self) -> float:
        return float(self.atoms @ self.probs)

    def is_evalue_law(self, tol: float = ARITH_TOL) -> bool:
        return self.mean <= 1 + tol

    def drop_null_atoms(self) -> "DiscreteDistribution":
        keep = self.probs > 0
        return DiscreteDistribution(self.atoms[keep], self.probs[keep])

    @classmethod
    def point_mass(cls, x: float) -> "DiscreteDistribution":
        return cls([x], [1.0])

    @classmethod
    def two_point(cls, x: float, y: float, mean: float = 1.0) -> "DiscreteDistribution":
        """Two atoms ``x < y`` mixed to the given mean."""
        if not x < mean < y:
            raise DomainError(f"need x < mean < y, got {x}, {mean}, {y}")
        py = (mean - x) / (y - x)
        return cls([x, y], [1.0 - py, py])

    def to_dict(self) -> dict:
        return {"atoms": self.atoms.tolist(), "probs": self.probs.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DiscreteDistribution":
        return cls(d["atoms"], d["probs"])


@dataclass(frozen=True)
class Coupling:
    """Joint mass on K-tuples of atom indices with prescribed marginals."""

    marginals: tuple
    support: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        margs = tuple(self.marginals)
        sup = _frozen(self.support, dtype=int)
        mass = _frozen(self.mass)
        K = len(margs)
        if sup.ndim != 2 or sup.shape[1] != K or sup.shape[0] != mass.size:
            raise InputError("support must have shape (n, K) matching mass")
        if np.any(mass < -COUPLING_TOL):
            raise DomainError("coupling mass must be nonnegative")
        if abs(mass.sum() - 1.0) > COUPLING_TOL:
            raise DomainError(f"coupling mass sums to {mass.sum()!r}, not 1")
        for k, mu in enumerate(margs):
            if np.any(sup[:, k] < 0) or np.any(sup[:, k] >= mu.atoms.size):
                raise InputError(f"support index out of range for marginal {k}")
            proj = np.bincount(sup[:, k], weights=mass, minlength=mu.atoms.size)
            err = np.abs(proj - mu.probs).max()
            if err > COUPLING_TOL:
                raise DomainError(f"projection {k} misses its marginal by {err:.3g}")
        object.__setattr__(self, "marginals", margs)
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "mass", mass)

    @property
    def K(self) -> int:
        return len(self.marginals)

    def points(self) -> np.ndarray:
        """Support points as real coordinates, shape ``(n, K)``."""
        return np.stack(
            [mu.atoms[self.support[:, k]] for k, mu in enumerate(self.marginals)], axis=1
        )

    def expectation(self, f: Callable) -> float:
        """``E[f(X)]`` under the coupling; ``f`` takes a length-K vector."""
        pts = self.points()
        return float(sum(m * f(x) for m, x in zip(self.mass, pts)))

    def to_dict(self) -> dict:
        return {
            "marginals": [mu.to_dict() for mu in self.marginals],
            "support": self.support.tolist(),
            "points": self.points().tolist(),
            "mass": self.mass.tolist(),
        }


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def weighted_merge(lam, e) -> float:
    """Weighted average of the e-values and the constant 1.

    Returns ``sum_k lam[k] * e[k] + lam[K]``.
    """
    w = as_weights(lam).entries
    e = as_evalues(e)
    if w.size != e.size + 1:
        raise InputError(f"weights have {w.size} entries, expected K + 1 = {e.size + 1}")
    return float(w[:-1] @ e + w[-1])


def grid_sample(
    f: Callable, theta: float, resolution, K: int | None = None
) -> GridFunction:
    """Tabulate ``f`` on a product grid.

    Parameters
    ----------
    f : callable
        Takes a length-K float array, returns a nonnegative real.
    theta : float
        Domain cap, at least 1.
    resolution : int or sequence of axes
        Points per axis (passed to :func:`make_axis`) or explicit axes.
    K : int, optional
        Arity; required when ``resolution`` is an int.

    Raises
    ------
    MonotonicityError
        With the witnessing pair of grid points if ``f`` decreases anywhere.
    DomainError
        If ``f`` is negative or non-finite at a node.
    """
    if isinstance(resolution, (int, np.integer)):
        if K is None:
            raise InputError("K is required when resolution is a point count")
        axes = [make_axis(theta, int(resolution))] * K
    else:
        axes = [np.asarray(a, dtype=float) for a in resolution]
        if K is not None and len(axes) != K:
            raise InputError(f"got {len(axes)} axes for K={K}")
    shape = tuple(len(a) for a in axes)
    vals = np.empty(shape)
    for idx in itertools.product(*(range(n) for n in shape)):
        x = np.array([axes[k][i] for k, i in enumerate(idx)])
        v = float(f(x))
        if not np.isfinite(v) or v < 0:
            raise DomainError(f"f({x.tolist()}) = {v} is not a nonnegative real")
        vals[idx] = v
    return GridFunction(theta, tuple(axes), vals)


@dataclass(frozen=True)
class UpperCheck:
    """Outcome of :func:`structural_upper_check`."""

    passed: bool
    point: tuple | None = None
    value: float | None = None
    bound: float | None = None

    @property
    def gap(self) -> float:
        return 0.0 if self.passed else self.value - self.bound


def structural_upper_check(F: GridFunction, tol: float = ARITH_TOL) -> UpperCheck:
    """Check ``F(e) <= max(1, max(e))`` at every node.

    Every e-merging function obeys this cap, so a failure certifies
    invalidity.  The first violating node (C order) is returned.
    """
    mesh = np.meshgrid(*F.axes, indexing="ij")
    cap = np.maximum(1.0, np.maximum.reduce(mesh)) if F.K > 1 else np.maximum(1.0, mesh[0])
    bad = np.argwhere(F.values > cap + tol)
    if bad.size == 0:
        return UpperCheck(True)
    idx = tuple(int(i) for i in bad[0])
    point = tuple(float(F.axes[k][i]) for k, i in enumerate(idx))
    return UpperCheck(False, point, float(F.values[idx]), float(cap[idx]))


def test_to_evalue(tau: float, alpha: float) -> float:
    """Convert a level-``alpha`` test outcome ``tau`` to an e-value ``tau/alpha``."""
    if not 0 < alpha <= 1:
        raise DomainError(f"alpha must lie in (0, 1], got {alpha}")
    if not 0 <= tau <= 1:
        raise DomainError(f"tau must lie in [0, 1], got {tau}")
    return tau / alpha


# keep pytest from collecting the converter as a test
test_to_evalue.__test__ = False


def extreme_evalue_laws(axis, mean_one_only: bool = False) -> list:
    """Extreme points of the e-variable laws supported on ``axis``.

    These are point masses at atoms ``x <= 1`` and two-point laws on
    ``x < 1 < y`` mixed to mean exactly 1.  With ``mean_one_only`` the only
    point mass kept is the one at 1.
    """
    axis = np.asarray(axis, dtype=float)
    laws = []
    for x in axis[axis <= 1]:
        if not mean_one_only or x == 1.0:
            laws.append(DiscreteDistribution.point_mass(float(x)))
    for x in axis[axis < 1]:
        for y in axis[axis > 1]:
            laws.append(DiscreteDistribution.two_point(float(x), float(y)))
    return laws
