"""Worst-case expectations over dependence structures.

For fixed discrete marginals, the largest expectation of ``F(E_1, ..., E_K)``
over all couplings is a finite LP (multi-marginal transport with a
maximisation objective).  Its dual is a tuple of univariate functions whose
sum dominates ``F``; expectations of such separable bounds do not depend on
the coupling, which is what makes them certificates.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    ARITH_TOL,
    LP_TOL,
    Coupling,
    DiscreteDistribution,
    GridFunction,
    as_evalues,
    extreme_evalue_laws,
    structural_upper_check,
)
from .errors import AlignmentError, FeasibilityError, InputError, PreconditionError, SolverError
from .lp import solve_lp

DOMINATION_TOL = 1e-9
WEAK_DUALITY_TOL = 1e-8


def _outer_sum(phis: Sequence[np.ndarray]) -> np.ndarray:
    total = np.zeros(tuple(p.size for p in phis))
    for k, p in enumerate(phis):
        shape = [1] * len(phis)
        shape[k] = p.size
        total = total + p.reshape(shape)
    return total


@dataclass(frozen=True)
class SeparableDual:
    """Univariate functions ``phi_k`` on the axes of ``F`` with ``sum_k phi_k >= F``.

    ``normalized`` marks a dual whose components all lie in ``[0, 1]``; it is
    only meaningful for an ``F`` bounded by 1.
    """

    F: GridFunction
    phi: tuple
    normalized: bool = False

    def __post_init__(self):
        phi = []
        for k, (p, axis) in enumerate(zip(self.phi, self.F.axes)):
            arr = np.array(p, dtype=float)
            if arr.shape != axis.shape:
                raise InputError(f"phi[{k}] has {arr.size} values, axis has {axis.size}")
            if not np.all(np.isfinite(arr)):
                raise InputError(f"phi[{k}] must be finite")
            arr.setflags(write=False)
            phi.append(arr)
        if len(phi) != self.F.K:
            raise InputError(f"need {self.F.K} dual functions, got {len(phi)}")
        deficit = self.deficit_of(phi)
        if deficit > DOMINATION_TOL:
            raise FeasibilityError(f"dual misses F by {deficit:.3g} at some grid node")
        if self.normalized and any(p.min() < -ARITH_TOL or p.max() > 1 + ARITH_TOL for p in phi):
            raise FeasibilityError("normalized dual components must lie in [0, 1]")
        object.__setattr__(self, "phi", tuple(phi))

    def deficit_of(self, phi) -> float:
        return float((self.F.values - _outer_sum(phi)).max())

    @property
    def deficit(self) -> float:
        """``max(F - sum_k phi_k)`` over the grid (nonpositive when feasible)."""
        return self.deficit_of(self.phi)

    def integral(self, marginals: Sequence[DiscreteDistribution]) -> float:
        """``sum_k E_{mu_k}[phi_k]``; the same for every coupling of the marginals."""
        total = 0.0
        for k, mu in enumerate(marginals):
            idx = _align(mu.atoms, self.F.axes[k], k)
            total += float(self.phi[k][idx] @ mu.probs)
        return total

    def to_dict(self) -> dict:
        return {
            "axes": [a.tolist() for a in self.F.axes],
            "phi": [p.tolist() for p in self.phi],
            "normalized": self.normalized,
        }


@dataclass(frozen=True)
class TransportCertificate:
    """Primal coupling and separable dual for one worst-case expectation."""

    primal_value: float
    dual_value: float
    coupling: Coupling
    dual: SeparableDual

    def __post_init__(self):
        if self.gap < -WEAK_DUALITY_TOL:
            raise SolverError(
                f"weak duality violated: dual {self.dual_value} < primal {self.primal_value}",
                bounds=(self.primal_value, self.dual_value),
            )

    @property
    def gap(self) -> float:
        return self.dual_value - self.primal_value

    def verdict(self, tol: float = LP_TOL) -> str:
        return validity_verdict(self.primal_value, tol)

    def to_dict(self, tol: float = LP_TOL) -> dict:
        return {
            "primal_value": self.primal_value,
            "dual_value": self.dual_value,
            "gap": self.gap,
            "coupling": self.coupling.to_dict(),
            "dual": self.dual.to_dict(),
            "verdict": self.verdict(tol),
            "verdict_tolerance": tol,
        }


def validity_verdict(value: float, tol: float = LP_TOL) -> str:
    """``"invalid"`` above ``1 + tol``, ``"boundary"`` within ``tol`` of 1, else ``"valid"``."""
    if value > 1 + tol:
        return "invalid"
    if value >= 1 - tol:
        return "boundary"
    return "valid"


def _align(atoms, axis, k) -> np.ndarray:
    idx = np.searchsorted(axis, atoms)
    idx = np.clip(idx, 0, axis.size - 1)
    left = np.clip(idx - 1, 0, axis.size - 1)
    pick = np.where(np.abs(axis[left] - atoms) < np.abs(axis[idx] - atoms), left, idx)
    miss = np.abs(axis[pick] - atoms) > ARITH_TOL * np.maximum(1.0, np.abs(atoms))
    if np.any(miss):
        bad = atoms[np.argmax(miss)]
        raise AlignmentError(f"marginal {k} atom {bad} is not on grid axis {k}")
    return pick


def _extend_dual(F: GridFunction, supports, phi_support) -> list:
    """Extend duals known on the marginal supports to whole axes, keeping domination.

    Axes are filled one at a time.  When filling axis ``k`` the earlier axes
    are already complete and the later ones are still restricted to their
    supports; every grid node is then covered by the step of its last
    off-support coordinate.
    """
    K = F.K
    phi = []
    for k in range(K):
        full = np.full(F.axes[k].size, np.nan)
        full[supports[k]] = phi_support[k]
        phi.append(full)
    for k in range(K):
        off = np.flatnonzero(np.isnan(phi[k]))
        if off.size == 0:
            continue
        sets = [np.arange(F.axes[j].size) if j < k else supports[j] for j in range(K)]
        sets[k] = off
        sub = F.values[np.ix_(*sets)]
        others = [phi[j][sets[j]] if j != k else np.zeros(off.size) for j in range(K)]
        need = sub - _outer_sum(others)
        axes_other = tuple(j for j in range(K) if j != k)
        phi[k][off] = need.max(axis=axes_other) if axes_other else need
    return phi


def worst_case_expectation(
    F: GridFunction,
    marginals: Sequence[DiscreteDistribution],
    *,
    method: str = "simplex",
    gap_tol: float = LP_TOL,
) -> TransportCertificate:
    """Largest ``E[F(E_1, ..., E_K)]`` over all couplings of the marginals.

    The LP is materialised densely: one variable per K-tuple of support atoms
    and one equality per (marginal, atom).  Atoms with zero probability are
    dropped before solving.

    Returns
    -------
    TransportCertificate
        Optimal coupling, a separable dual extended to the whole grid, and
        the duality gap.

    Raises
    ------
    AlignmentError
        If a marginal atom is not a node of the corresponding axis.
    SolverError
        If the LP fails or the gap exceeds ``gap_tol``.
    """
    marginals = tuple(marginals)
    K = F.K
    if len(marginals) != K:
        raise InputError(f"F has arity {K} but {len(marginals)} marginals were given")
    supports, probs, keep_idx = [], [], []
    for k, mu in enumerate(marginals):
        nz = np.flatnonzero(mu.probs > 0)
        keep_idx.append(nz)
        supports.append(_align(mu.atoms[nz], F.axes[k], k))
        probs.append(mu.probs[nz])
    sizes = [s.size for s in supports]
    cells = np.array(list(itertools.product(*(range(n) for n in sizes))), dtype=int)
    grid_idx = tuple(supports[k][cells[:, k]] for k in range(K))
    obj = F.values[grid_idx]

    rows = []
    for k in range(K):
        block = np.zeros((sizes[k], cells.shape[0]))
        block[cells[:, k], np.arange(cells.shape[0])] = 1.0
        rows.append(block)
    A_eq = np.vstack(rows)
    b_eq = np.concatenate(probs)

    res = solve_lp(obj, A_eq=A_eq, b_eq=b_eq, maximize=True, method=method)
    mass = res.x
    on = mass > 0
    support = np.stack([keep_idx[k][cells[on, k]] for k in range(K)], axis=1)
    coupling = Coupling(marginals, support, mass[on])
    primal = float(obj @ mass)

    split = np.cumsum(sizes)[:-1]
    phi_support = np.split(res.duals_eq, split)
    phi = _extend_dual(F, supports, phi_support)
    deficit = float((F.values - _outer_sum(phi)).max())
    if deficit > 0:
        phi[0] = phi[0] + deficit
    dual = SeparableDual(F, tuple(phi))
    dual_value = dual.integral(marginals)
    if abs(dual_value - primal) > gap_tol:
        raise SolverError(
            f"duality gap {dual_value - primal:.3g} exceeds {gap_tol}",
            bounds=(primal, dual_value),
        )
    return TransportCertificate(primal, dual_value, coupling, dual)


# ---------------------------------------------------------------------------
# Two-point adversary
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BinaryAdversary:
    """All inputs jump to ``e`` together with probability ``1/max(e)``, else 0."""

    marginals: tuple
    coupling: Coupling
    expectation: float

    @property
    def violates(self) -> bool:
        return self.expectation > 1 + ARITH_TOL


def binary_adversary(F, e) -> BinaryAdversary:
    """Joint law putting mass ``1/max(e)`` on ``e`` and the rest on ``0``.

    Each coordinate is an e-variable (mean ``e_k / max(e) <= 1``), and the
    expectation of ``F`` under this law is ``F(e)/max(e) + F(0)(1 - 1/max(e))``,
    which exceeds 1 whenever ``F(e) > max(e)``.

    ``F`` may be a :class:`GridFunction` (``e`` must be a grid node) or any
    callable on length-K arrays.
    """
    e = as_evalues(e)
    top = float(e.max()) if e.size else 0.0
    if top <= 1:
        raise PreconditionError(f"the adversary needs max(e) > 1, got {top}")
    if isinstance(F, GridFunction):
        if F.K != e.size:
            raise InputError(f"F has arity {F.K}, e has {e.size} entries")
        F.index_of(e)
    p = 1.0 / top
    marginals, hi, lo = [], [], []
    for ek in e:
        if ek > 0:
            marginals.append(DiscreteDistribution([0.0, float(ek)], [1.0 - p, p]))
            hi.append(1)
        else:
            marginals.append(DiscreteDistribution.point_mass(0.0))
            hi.append(0)
        lo.append(0)
    coupling = Coupling(tuple(marginals), [hi, lo], [p, 1.0 - p])
    zero = np.zeros(e.size)
    expectation = float(F(e)) * p + float(F(zero)) * (1.0 - p)
    return BinaryAdversary(tuple(marginals), coupling, expectation)


# ---------------------------------------------------------------------------
# Dual normalisation
# ---------------------------------------------------------------------------


def rescale(F: GridFunction, phi: SeparableDual | None = None):
    """Divide ``F`` (and optionally a dual) by ``B = max F`` so that ``F <= 1``.

    Returns ``(F / B, phi / B, B)``; ``B = 1`` when ``F`` is identically 0.
    """
    B = float(F.values.max()) or 1.0
    Fs = GridFunction(F.theta, F.axes, F.values / B)
    if phi is None:
        return Fs, None, B
    return Fs, SeparableDual(Fs, tuple(p / B for p in phi.phi)), B


def shift_dual(phi: SeparableDual) -> SeparableDual:
    """Make every component nonnegative without changing any marginal integral.

    Component ``k`` becomes ``phi_k - c_k + sum_m c_m / K`` with ``c_k`` its
    minimum; the shifts cancel in ``sum_k phi_k`` and hence in every integral.
    """
    c = np.array([p.min() for p in phi.phi])
    avg = c.sum() / len(c)
    out = tuple(p - ck + avg for p, ck in zip(phi.phi, c))
    return SeparableDual(phi.F, out)


def normalize_dual(phi: SeparableDual, F: GridFunction | None = None) -> SeparableDual:
    """Shift the dual to be nonnegative, then truncate each component at 1.

    Requires ``0 <= F <= 1`` (use :func:`rescale` first).  Truncation keeps
    domination: wherever a component is cut to 1, that term alone already
    covers ``F``.
    """
    F = phi.F if F is None else F
    if F is not phi.F:
        phi = SeparableDual(F, phi.phi)
    if F.values.max() > 1 + ARITH_TOL:
        raise InputError(f"F must be bounded by 1 (max {F.values.max()}); rescale first")
    shifted = shift_dual(phi)
    if any(p.min() < -DOMINATION_TOL for p in shifted.phi):
        raise FeasibilityError("shifted dual is negative; dual does not dominate a nonnegative F")
    clipped = tuple(np.clip(p, 0.0, 1.0) for p in shifted.phi)
    return SeparableDual(F, clipped, normalized=True)


# ---------------------------------------------------------------------------
# Validity screening over an adversarial family
# ---------------------------------------------------------------------------


def adversarial_family(F: GridFunction) -> list:
    """Marginal tuples built from mean-one two-point laws and the point mass at 1."""
    per_axis = [extreme_evalue_laws(axis, mean_one_only=True) for axis in F.axes]
    return [tuple(t) for t in itertools.product(*per_axis)]


@dataclass(frozen=True)
class ValidityReport:
    verdict: str
    worst_value: float
    worst_marginals: tuple | None
    certificates: tuple
    upper_check_passed: bool
    tolerance: float

    def to_dict(self) -> dict:
        worst = None
        if self.worst_marginals is not None:
            worst = [mu.to_dict() for mu in self.worst_marginals]
        return {
            "verdict": self.verdict,
            "worst_value": self.worst_value,
            "worst_marginals": worst,
            "n_marginal_tuples": len(self.certificates),
            "upper_check_passed": self.upper_check_passed,
            "verdict_tolerance": self.tolerance,
        }


def certify_valid(
    F: GridFunction,
    family: Sequence[Sequence[DiscreteDistribution]] | None = None,
    *,
    tol: float = LP_TOL,
    method: str = "simplex",
) -> ValidityReport:
    """Screen ``F`` for validity: the cap check, then worst-case LPs over ``family``.

    Passing only shows that no tuple in ``family`` breaks ``F``; failing is a
    certificate of invalidity.
    """
    upper = structural_upper_check(F)
    family = adversarial_family(F) if family is None else [tuple(m) for m in family]
    certs, worst, worst_m = [], -np.inf, None
    for margs in family:
        cert = worst_case_expectation(F, margs, method=method)
        certs.append(cert)
        if cert.primal_value > worst:
            worst, worst_m = cert.primal_value, tuple(margs)
    if not upper.passed and worst <= 1 + tol:
        # the cap violation carries its own certificate
        if max(upper.point) > 1:
            adv = binary_adversary(F, upper.point)
            worst, worst_m = adv.expectation, adv.marginals
        else:
            worst = upper.value
            worst_m = tuple(DiscreteDistribution.point_mass(x) for x in upper.point)
    verdict = validity_verdict(worst, tol)
    return ValidityReport(verdict, float(worst), worst_m, tuple(certs), upper.passed, tol)
