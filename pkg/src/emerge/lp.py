"""Dense two-phase primal simplex with Bland's rule.

Solves ``min c @ x  s.t.  A_ub @ x <= b_ub,  A_eq @ x = b_eq,  x >= 0``
and reads the dual from the final basis.  Problems here are small (a few
thousand columns at most), so a dense tableau is fine and Bland's rule
rules out cycling on the heavily degenerate transport polytopes.

Duals follow the sensitivity convention: ``duals_eq[i]`` is the derivative
of the optimal value with respect to ``b_eq[i]`` (same as
``scipy.optimize.linprog`` marginals).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, SolverError

PIVOT_TOL = 1e-11


@dataclass(frozen=True)
class LPResult:
    x: np.ndarray
    value: float
    duals_ub: np.ndarray
    duals_eq: np.ndarray
    iterations: int
    method: str


def _pivot(T, r, j):
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run(T, basis, allowed, tol, max_iter, it):
    """Bland's-rule iterations on tableau ``T`` (objective in the last row)."""
    m = T.shape[0] - 1
    while True:
        rc = T[-1, :-1]
        cand = np.flatnonzero((rc < -tol) & allowed)
        if cand.size == 0:
            return it, "optimal"
        if it >= max_iter:
            return it, "iteration_limit"
        j = cand[0]
        col = T[:m, j]
        pos = np.flatnonzero(col > PIVOT_TOL)
        if pos.size == 0:
            return it, "unbounded"
        ratios = T[pos, -1] / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
        r = ties[np.argmin([basis[i] for i in ties])]
        _pivot(T, r, j)
        basis[r] = j
        it += 1


def _simplex(c, A, b, tol, max_iter, slack_rows):
    """Equality-form simplex on ``A x = b, x >= 0`` with ``b >= 0``.

    ``slack_rows[i]`` is the column index of an identity column usable as the
    initial basic variable for row ``i`` (or -1, meaning an artificial).
    """
    m, n = A.shape
    art_rows = [i for i in range(m) if slack_rows[i] < 0]
    n_art = len(art_rows)
    T = np.zeros((m + 1, n + n_art + 1))
    T[:m, :n] = A
    T[:m, -1] = b
    basis = list(slack_rows)
    for a, i in enumerate(art_rows):
        T[i, n + a] = 1.0
        basis[i] = n + a
    it = 0

    if n_art:
        # phase 1: minimise the sum of artificials
        T[-1, n : n + n_art] = 1.0
        for i in art_rows:
            T[-1] -= T[i]
        allowed = np.ones(n + n_art, dtype=bool)
        it, status = _run(T, basis, allowed, tol, max_iter, it)
        if status == "iteration_limit":
            raise SolverError("phase 1 hit the iteration limit", (None, None), status)
        infeas = -T[-1, -1]
        if infeas > 1e-8 * max(1.0, np.abs(b).max()):
            raise SolverError(f"LP is infeasible (phase-1 residual {infeas:.3g})", status="infeasible")
        # drive artificials out of the basis; rows where that fails are redundant
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= n:
                row = T[i, :n]
                nz = np.flatnonzero(np.abs(row) > 1e-9)
                if nz.size:
                    _pivot(T, i, nz[0])
                    basis[i] = nz[0]
                else:
                    keep[i] = False
        T = np.vstack([T[:m][keep], T[-1:]])
        basis = [bj for bj, kp in zip(basis, keep) if kp]
        T = np.delete(T, np.s_[n : n + n_art], axis=1)
    else:
        keep = np.ones(m, dtype=bool)

    # phase 2
    mk = T.shape[0] - 1
    T[-1, :] = 0.0
    T[-1, :n] = c
    for i in range(mk):
        if c[basis[i]] != 0.0:
            T[-1] -= c[basis[i]] * T[i]
    allowed = np.ones(n, dtype=bool)
    it, status = _run(T, basis, allowed, tol, max_iter, it)
    if status == "unbounded":
        raise SolverError("LP is unbounded", status=status)
    if status == "iteration_limit":
        x = np.zeros(n)
        x[basis] = T[:mk, -1]
        raise SolverError(
            "phase 2 hit the iteration limit", (None, float(c @ x)), status
        )
    return basis, keep, T, it


def solve_lp(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    *,
    maximize: bool = False,
    tol: float = 1e-9,
    max_iter: int = 100_000,
    method: str = "simplex",
) -> LPResult:
    """Solve a small dense LP over nonnegative variables.

    Parameters
    ----------
    c : array_like, shape (n,)
        Objective coefficients.
    A_ub, b_ub, A_eq, b_eq : array_like, optional
        Inequality (``<=``) and equality constraints.
    maximize : bool
        Maximise instead of minimise.
    tol : float
        Optimality tolerance on reduced costs.
    method : {"simplex", "highs"}
        ``"highs"`` delegates to :func:`scipy.optimize.linprog` and exists for
        cross-checking.

    Returns
    -------
    LPResult
        Optimal ``x``, objective value and sensitivity duals.

    Raises
    ------
    SolverError
        On infeasibility, unboundedness or exhausted iteration budget.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, float)
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, float)
    if A_ub.shape != (b_ub.size, n) or A_eq.shape != (b_eq.size, n):
        raise InputError("constraint shapes do not match the objective")
    sign = -1.0 if maximize else 1.0
    cmin = sign * c

    if method == "highs":
        return _solve_highs(cmin, A_ub, b_ub, A_eq, b_eq, sign)
    if method != "simplex":
        raise InputError(f"unknown LP method {method!r}")

    m_ub, m_eq = b_ub.size, b_eq.size
    m = m_ub + m_eq
    # equality form with slacks for the inequality rows
    A = np.zeros((m, n + m_ub))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    flip = np.where(b < 0, -1.0, 1.0)
    A *= flip[:, None]
    b = b * flip
    slack_rows = [n + i if (i < m_ub and flip[i] > 0) else -1 for i in range(m)]
    c_full = np.concatenate([cmin, np.zeros(m_ub)])

    basis, keep, T, it = _simplex(c_full, A, b, tol, max_iter, slack_rows)

    # recompute the basic solution and duals from the original data
    B = A[keep][:, basis]
    xB = T[:-1, -1].copy()
    y = np.zeros(int(keep.sum()))
    try:
        if not basis:
            raise np.linalg.LinAlgError
        xB_ref = np.linalg.solve(B, b[keep])
        if xB_ref.min() >= -1e-9:
            xB = np.maximum(xB_ref, 0.0)
        y = np.linalg.solve(B.T, c_full[basis])
    except np.linalg.LinAlgError:
        if basis:
            y = np.linalg.lstsq(B.T, c_full[basis], rcond=None)[0]
    x_full = np.zeros(n + m_ub)
    x_full[basis] = np.maximum(xB, 0.0)
    duals = np.zeros(m)
    duals[keep] = y
    duals *= flip
    x = x_full[:n]
    return LPResult(
        x=x,
        value=float(c @ x),
        duals_ub=sign * duals[:m_ub],
        duals_eq=sign * duals[m_ub:],
        iterations=it,
        method="simplex",
    )


def _solve_highs(cmin, A_ub, b_ub, A_eq, b_eq, sign):
    from scipy.optimize import linprog

    res = linprog(
        cmin,
        A_ub=A_ub if b_ub.size else None,
        b_ub=b_ub if b_ub.size else None,
        A_eq=A_eq if b_eq.size else None,
        b_eq=b_eq if b_eq.size else None,
        bounds=(0, None),
        method="highs",
        options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10},
    )
    if res.status != 0:
        raise SolverError(f"HiGHS failed: {res.message}", status=res.status)
    x = res.x
    return LPResult(
        x=x,
        value=float(sign * cmin @ x),
        duals_ub=sign * (res.ineqlin.marginals if b_ub.size else np.zeros(0)),
        duals_eq=sign * (res.eqlin.marginals if b_eq.size else np.zeros(0)),
        iterations=int(res.nit),
        method="highs",
    )
