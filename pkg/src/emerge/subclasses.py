"""Merging rules that are valid only on restricted classes of e-value vectors.

Every rule accepts a single vector of shape ``(K,)`` (returning a float) or a
batch of shape ``(n, K)`` (returning an array), so the same callables feed
both point evaluation and the Monte Carlo harness.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import Weights, as_weights
from .errors import DomainError, InputError
from .montecarlo import Estimate, Sampler, replicate

DEFAULT_CAP = 1e6
CALIBRATOR_TOL = 1e-3
SE_BAND = 3.0


def _rows(e):
    arr = np.asarray(e, dtype=float)
    if arr.ndim not in (1, 2):
        raise InputError("e-values must be a vector or an (n, K) batch")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError("e-values must be finite and >= 0")
    return np.atleast_2d(arr), arr.ndim == 1


def _out(vals, single):
    return float(vals[0]) if single else vals


def weighted_average(lam, e):
    """Batch version of the weighted average ``lam . (e, 1)``."""
    w = as_weights(lam).entries
    X, single = _rows(e)
    if X.shape[1] != w.size - 1:
        raise InputError(f"weights have {w.size} entries, expected K + 1 = {X.shape[1] + 1}")
    return _out(X @ w[:-1] + w[-1], single)


# ---------------------------------------------------------------------------
# Fixed marginals: calibrated averages
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Calibrator:
    """Decreasing ``f`` on ``[0, 1]`` mapping p-values to e-values.

    Stored on a grid with ``values[0]`` equal to the cap that stands in for
    ``f(0) = inf``.  If ``func`` is given it is used for evaluation (clipped
    at the cap); otherwise the grid is interpolated linearly.
    """

    grid: np.ndarray
    values: np.ndarray
    cap: float | None = DEFAULT_CAP
    func: Callable | None = None

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape or g[0] != 0.0 or g[-1] != 1.0:
            raise InputError("calibrator grid must run from 0 to 1 and match its values")
        if np.any(np.diff(g) <= 0):
            raise InputError("calibrator grid must be strictly increasing")
        if np.any(np.diff(v) > 1e-12):
            raise DomainError("calibrator must be nonincreasing")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise DomainError("calibrator values must be finite and >= 0 (cap f(0))")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)
        if self.integral > 1 + CALIBRATOR_TOL:
            raise DomainError(f"calibrator integrates to {self.integral:.6f} > 1")

    @property
    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.grid))

    @classmethod
    def from_function(cls, f: Callable, cap: float | None = DEFAULT_CAP, n: int = 4001):
        grid = np.concatenate([[0.0], np.geomspace(1e-12, 1.0, n - 1)])
        vals = np.asarray(f(grid[1:]), dtype=float)
        head = cap if cap is not None else vals[0]
        vals = np.concatenate([[head], vals if cap is None else np.minimum(vals, cap)])
        return cls(grid, vals, cap, f)

    @classmethod
    def constant(cls) -> "Calibrator":
        """``f = 1``: the trivial calibrator."""
        return cls(np.array([0.0, 1.0]), np.array([1.0, 1.0]), cap=1.0)

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        if np.any((p < 0) | (p > 1)):
            raise DomainError("p-values must lie in [0, 1]")
        if self.cap is None and np.any(p == 0):
            raise DomainError("calibrator evaluated at 0 without a cap")
        if self.func is None:
            return np.interp(p, self.grid, self.values)
        safe = np.where(p > 0, p, 1.0)
        out = np.asarray(self.func(safe), dtype=float)
        out = np.where(p > 0, out, self.cap if self.cap is not None else np.inf)
        return np.minimum(out, self.cap) if self.cap is not None else out


@dataclass(frozen=True)
class MarginalModel:
    """Survival function ``g(x) = P(E > x)`` of one input on ``[0, theta]``."""

    grid: np.ndarray
    survival: np.ndarray
    func: Callable | None = None

    def __post_init__(self):
        x = np.asarray(self.grid, dtype=float)
        s = np.asarray(self.survival, dtype=float)
        if x.ndim != 1 or x.shape != s.shape or x[0] != 0.0:
            raise InputError("survival grid must start at 0 and match its values")
        if abs(s[0] - 1.0) > 1e-12:
            raise DomainError("survival must equal 1 at 0")
        if np.any(np.diff(s) > 1e-12) or s[-1] < 0:
            raise DomainError("survival must be nonincreasing and nonnegative")
        object.__setattr__(self, "grid", x)
        object.__setattr__(self, "survival", s)
        if self.mean > 1 + CALIBRATOR_TOL:
            raise DomainError(f"marginal has mean {self.mean:.6f} > 1")

    @property
    def theta(self) -> float:
        return float(self.grid[-1])

    @property
    def mean(self) -> float:
        # E[X] = integral of the survival function for X >= 0
        return float(np.trapezoid(self.survival, self.grid))

    @classmethod
    def from_function(cls, g: Callable, theta: float, n: int = 4001):
        x = np.linspace(0.0, theta, n)
        return cls(x, np.asarray(g(x), dtype=float), g)

    @classmethod
    def exponential(cls, theta: float = 50.0, n: int = 4001):
        """Unit-mean exponential survival ``exp(-x)``."""
        return cls.from_function(lambda x: np.exp(-x), theta, n)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0) or np.any(x > self.theta):
            raise DomainError(f"inputs must lie in [0, {self.theta}]")
        if self.func is not None:
            return np.asarray(self.func(x), dtype=float)
        return np.interp(x, self.grid, self.survival)


def calibrated_merge(
    lam, calibrators: Sequence[Calibrator], survivals: Sequence[MarginalModel], e
):
    """Weighted average of ``f_k(g_k(e_k))``.

    Valid for inputs with the given continuous marginals: ``g_k(E_k)`` is
    uniform, so each ``f_k(g_k(E_k))`` is an e-variable.
    """
    X, single = _rows(e)
    K = X.shape[1]
    if len(calibrators) != K or len(survivals) != K:
        raise InputError(f"need {K} calibrators and {K} survival functions")
    Z = np.column_stack([f(g(X[:, k])) for k, (f, g) in enumerate(zip(calibrators, survivals))])
    return _out(weighted_average(lam, Z), single)


# ---------------------------------------------------------------------------
# Second-moment bounds, identical and exchangeable inputs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SecondMomentBound:
    """Upper bounds ``sigma[i, j]`` on ``E[E_i E_j]``."""

    sigma: np.ndarray

    def __post_init__(self):
        s = np.array(self.sigma, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise InputError("sigma must be a square matrix")
        if not np.all(np.isfinite(s)) or np.any(s < 0):
            raise DomainError("sigma entries must be finite and >= 0")
        if not np.allclose(s, s.T, rtol=0, atol=1e-12):
            raise DomainError("sigma must be symmetric")
        s.setflags(write=False)
        object.__setattr__(self, "sigma", s)


def product_merge(i: int, j: int, sigma: SecondMomentBound, e):
    """``e_i e_j / sigma_ij``; an e-value whenever ``E[E_i E_j] <= sigma_ij``."""
    s = sigma.sigma[i, j]
    if s <= 0:
        raise DomainError(f"sigma[{i}, {j}] must be > 0")
    X, single = _rows(e)
    return _out(X[:, i] * X[:, j] / s, single)


def mixture_merge(weights, components: Sequence[Callable], e):
    """Convex combination of merging rules (each taking ``e`` or a batch)."""
    w = np.asarray(weights, dtype=float)
    if w.size != len(components) or np.any(w < 0) or abs(w.sum() - 1) > 1e-12:
        raise DomainError("mixture weights must be a probability vector, one per component")
    X, single = _rows(e)
    vals = sum(wi * np.asarray(c(X), dtype=float) for wi, c in zip(w, components))
    return _out(vals, single)


def identical_merge(lam: float, e):
    """``lam + (1 - lam) max(e)``; valid when all inputs are one e-variable."""
    if not 0 <= lam <= 1:
        raise DomainError(f"lambda must lie in [0, 1], got {lam}")
    X, single = _rows(e)
    return _out(lam + (1 - lam) * X.max(axis=1), single)


def is_identical(e) -> bool | np.ndarray:
    """Whether every coordinate of the input vector is the same value."""
    X, single = _rows(e)
    same = np.all(X == X[:, :1], axis=1)
    return bool(same[0]) if single else same


def running_max_average(e):
    """``max_k (e_1 + ... + e_k) / k``."""
    X, single = _rows(e)
    avg = np.cumsum(X, axis=1) / np.arange(1, X.shape[1] + 1)
    return _out(avg.max(axis=1), single)


def exchangeable_merge(beta: float, e):
    """``beta`` if some running average reaches ``beta``, else 0.

    Valid for exchangeable inputs: the probability that any running average
    reaches ``beta`` is at most ``1/beta``.
    """
    if not beta > 1:
        raise DomainError(f"beta must be > 1, got {beta}")
    X, single = _rows(e)
    avg = np.cumsum(X, axis=1) / np.arange(1, X.shape[1] + 1)
    return _out(np.where(avg.max(axis=1) >= beta, beta, 0.0), single)


# ---------------------------------------------------------------------------
# Monte Carlo checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulationReport:
    """One Monte Carlo verdict, with the band it was judged against."""

    rule: str
    sampler: dict
    estimate: Estimate
    bound: float
    verdict: str
    extra: dict

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "sampler": self.sampler,
            "reps": self.estimate.reps,
            "seed": self.estimate.seed,
            "estimate": self.estimate.mean,
            "se": self.estimate.se,
            "bound": self.bound,
            "tolerance": f"{SE_BAND:g} s.e.",
            "verdict": self.verdict,
            **self.extra,
        }


def check_validity(
    rule: Callable, sampler: Sampler, reps: int = 10**6, seed: int = 0, *, name: str = "rule"
) -> SimulationReport:
    """Estimate ``E[rule(E)]``; ``"valid"`` iff the estimate is at most ``1 + 3 se``."""
    est = replicate(rule, sampler, reps, seed)
    verdict = "valid" if est.mean <= 1 + SE_BAND * est.se else "invalid"
    return SimulationReport(name, sampler.describe(), est, 1.0, verdict, {})


def exchangeable_tail_check(
    beta: float, sampler: Sampler, reps: int = 10**6, seed: int = 0
) -> SimulationReport:
    """Estimate ``P(max_k running average >= beta)`` against the bound ``1/beta``."""
    if not beta > 1:
        raise DomainError(f"beta must be > 1, got {beta}")
    est = replicate(lambda X: running_max_average(X) >= beta, sampler, reps, seed)
    ok = est.mean <= 1.0 / beta + SE_BAND * est.se
    return SimulationReport(
        f"exchangeable(beta={beta:g})",
        sampler.describe(),
        est,
        1.0 / beta,
        "valid" if ok else "invalid",
        {
            "beta": beta,
            "expected_merged_value": beta * est.mean,
            "expected_merged_value_se": beta * est.se,
            "subclass_member": sampler.exchangeable,
            "admissibility": "unknown (open question)",
        },
    )


def full_support_admissibility_check(
    rule: Callable,
    sampler: Sampler,
    improvement: Callable,
    reps: int = 10**6,
    seed: int = 0,
) -> SimulationReport:
    """Test whether ``improvement >= rule`` survives on full-support inputs.

    On inputs with mean-one coordinates and full support, a weighted average
    has expectation exactly 1, so any pointwise improvement that differs on a
    set of positive probability has expectation above 1.

    Verdicts: ``"inadmissible improvement rejected"`` when the estimate of
    ``E[improvement]`` exceeds ``1 + 3 se``; ``"no improvement"`` when the two
    rules agree on every draw; ``"inconclusive"`` otherwise, or whenever the
    sampler lacks full support.
    """
    est = replicate(improvement, sampler, reps, seed)
    gap = replicate(lambda X: np.asarray(improvement(X)) - np.asarray(rule(X)), sampler, reps, seed)
    if not sampler.full_support:
        verdict = "inconclusive"
    elif est.mean > 1 + SE_BAND * est.se:
        verdict = "inadmissible improvement rejected"
    elif gap.mean == 0 and gap.se == 0:
        verdict = "no improvement"
    else:
        verdict = "inconclusive"
    return SimulationReport(
        "improvement",
        sampler.describe(),
        est,
        1.0,
        verdict,
        {"mean_gain": gap.mean, "mean_gain_se": gap.se},
    )


@dataclass(frozen=True)
class Comparison:
    verdict: str
    above: np.ndarray | None  # a point where rule_a > rule_b
    below: np.ndarray | None  # a point where rule_a < rule_b

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "above": None if self.above is None else self.above.tolist(),
            "below": None if self.below is None else self.below.tolist(),
        }


def compare_rules(rule_a: Callable, rule_b: Callable, points) -> Comparison:
    """Scan ``points`` (shape ``(n, K)``) for strict inequalities both ways."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    a, b = np.asarray(rule_a(P), dtype=float), np.asarray(rule_b(P), dtype=float)
    up = np.flatnonzero(a > b + 1e-12)
    down = np.flatnonzero(a < b - 1e-12)
    above = P[up[0]] if up.size else None
    below = P[down[0]] if down.size else None
    if up.size and down.size:
        verdict = "incomparable"
    elif up.size:
        verdict = "first dominates"
    elif down.size:
        verdict = "second dominates"
    else:
        verdict = "equal"
    return Comparison(verdict, above, below)


def product_points(axis, K: int) -> np.ndarray:
    """All points of ``axis^K`` as rows."""
    mesh = np.meshgrid(*([np.asarray(axis, dtype=float)] * K), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def uniform_weights(K: int) -> Weights:
    """``1/(K+1)`` on each input and on the constant."""
    return Weights(np.full(K + 1, 1.0 / (K + 1)))
