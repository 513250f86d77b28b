"""Scenario documents: parsing and execution.

A scenario is a JSON object with a ``kind`` and a kind-specific parameter
block.  :func:`execute` turns it into a report dictionary; the CLI only adds
file handling and exit codes on top.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any, Callable

import numpy as np

from . import __version__
from .core import LP_TOL, DiscreteDistribution, GridFunction, grid_sample, make_axis
from .domination import VIOLATION_TOL, dominate
from .errors import InputError
from .montecarlo import make_sampler
from .oracle import SmallInstance, enumerate_couplings_value
from .subclasses import (
    SE_BAND,
    SecondMomentBound,
    check_validity,
    exchangeable_merge,
    exchangeable_tail_check,
    full_support_admissibility_check,
    identical_merge,
    is_identical,
    product_merge,
    weighted_average,
)
from .transport import certify_valid, normalize_dual, rescale, worst_case_expectation

KINDS = ("merge", "validity", "dominate", "duality", "simulate", "oracle-check")
ORACLE_TOL = 1e-8


class ScenarioError(InputError):
    """Malformed scenario; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _get(block: dict, key: str, path: str, kind=None, default=Any):
    if not isinstance(block, dict):
        raise ScenarioError(path, "expected an object")
    if key not in block:
        if default is Any:
            raise ScenarioError(f"{path}.{key}", "missing")
        return default
    val = block[key]
    if kind is not None and not isinstance(val, kind):
        raise ScenarioError(f"{path}.{key}", f"expected {getattr(kind, '__name__', kind)}")
    return val


def scenario_hash(scenario: dict) -> str:
    blob = json.dumps(scenario, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# Rules
# ---------------------------------------------------------------------------


def _weighted(p, path):
    lam = _get(p, "lambda", path, list)
    return lambda e: weighted_average(lam, e)


def _min_weighted(p, path):
    lams = _get(p, "lambdas", path, list)
    return lambda e: np.minimum.reduce([np.asarray(weighted_average(l, e)) for l in lams])


def _mixture_weighted(p, path):
    lams = _get(p, "lambdas", path, list)
    w = np.asarray(_get(p, "weights", path, list), dtype=float)
    return lambda e: sum(wi * np.asarray(weighted_average(l, e)) for wi, l in zip(w, lams))


def _product(p, path):
    i, j = int(_get(p, "i", path, default=0)), int(_get(p, "j", path, default=1))
    s = float(_get(p, "sigma", path, default=1.0))
    sigma = SecondMomentBound(np.full((max(i, j) + 1,) * 2, s))
    return lambda e: product_merge(i, j, sigma, e)


def _max(p, path):
    return lambda e: np.asarray(e, dtype=float).max(axis=-1)


def _constant(p, path):
    c = float(_get(p, "value", path, default=1.0))
    return lambda e: np.full(np.asarray(e).shape[:-1], c) if np.ndim(e) > 1 else c


RULES: dict[str, Callable] = {
    "weighted": _weighted,
    "min_weighted": _min_weighted,
    "mixture_weighted": _mixture_weighted,
    "product": _product,
    "max": _max,
    "constant": _constant,
    "identical": lambda p, path: (
        lambda e: identical_merge(float(_get(p, "lambda", path)), e)
    ),
    "exchangeable": lambda p, path: (
        lambda e: exchangeable_merge(float(_get(p, "beta", path)), e)
    ),
}


def make_rule(spec: dict, path: str = "rule") -> Callable:
    rid = _get(spec, "id", path, str)
    if rid not in RULES:
        raise ScenarioError(f"{path}.id", f"unknown rule {rid!r}; known: {sorted(RULES)}")
    return RULES[rid](spec, path)


def make_grid_function(sc: dict, theta: float | None = None) -> GridFunction:
    fspec = _get(sc, "function", "scenario", dict)
    gspec = _get(sc, "grid", "scenario", dict)
    if "values" in fspec:
        th = float(_get(gspec, "theta", "grid"))
        axes = _get(gspec, "axes", "grid", list)
        return GridFunction(th, tuple(axes), fspec["values"])
    rule = make_rule(fspec, "function")
    th = float(_get(gspec, "theta", "grid")) if theta is None else float(theta)
    if "axes" in gspec:
        if theta is not None:
            raise ScenarioError("grid.axes", "explicit axes cannot be rescaled; use grid.points")
        axes = _get(gspec, "axes", "grid", list)
        return grid_sample(rule, th, axes)
    K = int(_get(gspec, "K", "grid"))
    points = int(_get(gspec, "points", "grid", default=5))
    return grid_sample(rule, th, [make_axis(th, points)] * K)


def make_marginals(sc: dict, key: str = "marginals") -> tuple:
    raw = _get(sc, key, "scenario", list)
    out = []
    for k, m in enumerate(raw):
        path = f"{key}[{k}]"
        try:
            out.append(DiscreteDistribution(_get(m, "atoms", path), _get(m, "probs", path)))
        except InputError as exc:
            raise ScenarioError(path, str(exc)) from None
    return tuple(out)


# ---------------------------------------------------------------------------
# Kinds
# ---------------------------------------------------------------------------


def _run_merge(sc, opts):
    rule = make_rule(_get(sc, "rule", "scenario", dict))
    inputs = np.asarray(_get(sc, "inputs", "scenario", list), dtype=float)
    if inputs.ndim != 2:
        raise ScenarioError("scenario.inputs", "expected a list of e-value vectors")
    vals = np.atleast_1d(rule(inputs))
    rows = [{"e": list(map(float, e)), "value": float(v)} for e, v in zip(inputs, vals)]
    result = {"rows": rows}
    if _get(sc["rule"], "id", "rule") == "identical":
        result["outside_subclass"] = [not bool(s) for s in np.atleast_1d(is_identical(inputs))]
    table = [["e", "value"]] + [[" ".join(map(repr, r["e"])), r["value"]] for r in rows]
    return result, "completed", table


def _run_validity(sc, opts):
    F = make_grid_function(sc)
    tol = opts["tol"]
    if "marginals" in sc:
        cert = worst_case_expectation(F, make_marginals(sc))
        result = cert.to_dict(tol)
        verdict = result["verdict"]
    else:
        rep = certify_valid(F, tol=tol)
        result = rep.to_dict()
        verdict = rep.verdict
    return result, verdict, None


def _run_duality(sc, opts):
    F = make_grid_function(sc)
    margs = make_marginals(sc)
    cert = worst_case_expectation(F, margs)
    result = cert.to_dict(opts["tol"])
    Fs, phis, B = rescale(F, cert.dual)
    norm = normalize_dual(phis)
    result["normalized_dual"] = {
        "scale": B,
        "phi": [p.tolist() for p in norm.phi],
        "integral_scaled": norm.integral(margs),
    }
    table = [["k", "x", "phi"]] + [
        [k, float(x), float(v)]
        for k, (axis, p) in enumerate(zip(F.axes, cert.dual.phi))
        for x, v in zip(axis, p)
    ]
    return result, result["verdict"], table


def _run_dominate(sc, opts, theta=None, epsilon=None):
    F = make_grid_function(sc, theta)
    eps = float(_get(sc, "epsilon", "scenario", default=1e-3)) if epsilon is None else epsilon
    sym = bool(_get(sc, "symmetric", "scenario", default=False))
    rep = dominate(F, eps, symmetric=sym, tol=opts["tol"])
    result = rep.to_dict()
    lam = rep.weights.entries
    table = [["coordinate", "lambda", "T", "h"]]
    for k, (T, h) in enumerate(rep.per_k):
        table.append([k + 1, float(lam[k]), T, h])
    table.append(["constant", float(lam[-1]), "", ""])
    return result, "completed", table


def _improvement(spec, base, path):
    kind = _get(spec, "id", path, str)
    if kind != "indicator_bonus":
        raise ScenarioError(f"{path}.id", f"unknown improvement {kind!r}")
    coef = float(_get(spec, "coef", path))
    k = int(_get(spec, "coordinate", path, default=0))
    thr = float(_get(spec, "threshold", path))
    return lambda X: np.asarray(base(X)) + coef * (np.atleast_2d(X)[:, k] > thr)


def _run_simulate(sc, opts):
    rspec = _get(sc, "rule", "scenario", dict)
    rule = make_rule(rspec)
    sampler = make_sampler(_get(sc, "sampler", "scenario", dict))
    reps = int(opts["reps"] or _get(sc, "reps", "scenario", default=10**6))
    seed = int(opts["seed"] if opts["seed"] is not None else _get(sc, "seed", "scenario", default=0))
    rid = rspec["id"]
    if "improvement" in sc:
        imp = _improvement(sc["improvement"], rule, "improvement")
        rep = full_support_admissibility_check(rule, sampler, imp, reps, seed)
        result = rep.to_dict()
    else:
        rep = check_validity(rule, sampler, reps, seed, name=rid)
        result = rep.to_dict()
        if rid == "exchangeable":
            tail = exchangeable_tail_check(float(rspec["beta"]), sampler, reps, seed)
            result["tail_probability"] = tail.to_dict()
            result["admissibility"] = "unknown (open question)"
        if rid == "identical":
            result["subclass_member"] = sampler.identical
        if rid == "exchangeable":
            result["subclass_member"] = sampler.exchangeable
    table = [
        ["reps", "seed", "estimate", "se", "verdict"],
        [result["reps"], result["seed"], result["estimate"], result["se"], result["verdict"]],
    ]
    return result, result["verdict"], table


def _run_oracle_check(sc, opts):
    F = make_grid_function(sc)
    margs = make_marginals(sc)
    res = int(_get(sc, "resolution", "scenario", default=4))
    orc = enumerate_couplings_value(SmallInstance(F, margs), res)
    cert = worst_case_expectation(F, margs)
    diff = abs(orc.value - cert.primal_value)
    agree = diff <= ORACLE_TOL if orc.exact else orc.value <= cert.primal_value + ORACLE_TOL
    result = {
        "oracle_value": orc.value,
        "oracle_exact": orc.exact,
        "lp_value": cert.primal_value,
        "abs_difference": diff,
        "agreement_tolerance": ORACLE_TOL,
        "agree": bool(agree),
    }
    table = [["oracle", "lp", "diff", "agree"], [orc.value, cert.primal_value, diff, agree]]
    return result, "agree" if agree else "disagree", table


RUNNERS = {
    "merge": _run_merge,
    "validity": _run_validity,
    "duality": _run_duality,
    "dominate": _run_dominate,
    "simulate": _run_simulate,
    "oracle-check": _run_oracle_check,
}


def execute(sc: dict, *, tol: float = LP_TOL, seed=None, reps=None) -> tuple[dict, list | None]:
    """Run one scenario; returns ``(report, csv_rows)``."""
    if not isinstance(sc, dict):
        raise ScenarioError("scenario", "expected a JSON object")
    kind = _get(sc, "kind", "scenario", str)
    if kind not in RUNNERS:
        raise ScenarioError("scenario.kind", f"unknown kind {kind!r}; known: {list(KINDS)}")
    opts = {"tol": tol, "seed": seed, "reps": reps}
    result, verdict, table = RUNNERS[kind](sc, opts)
    report = {
        "tool": {"name": "emerge", "version": __version__},
        "scenario_sha256": scenario_hash(sc),
        "kind": kind,
        "seed": result.get("seed", seed),
        "tolerances": {
            "lp_verdict": tol,
            "domination_violation": VIOLATION_TOL,
            "oracle_agreement": ORACLE_TOL,
            "monte_carlo_band_se": SE_BAND,
        },
        "verdict": verdict,
        "result": result,
    }
    return report, table


def schedule(sc: dict, epsilons, thetas, *, tol: float = LP_TOL, threads: int = 1) -> tuple[dict, list]:
    """Run ``dominate`` over every ``(epsilon, theta)`` cell; failures stay per-cell."""
    epsilons, thetas = list(epsilons), list(thetas)
    if not epsilons or not thetas:
        raise ScenarioError("schedule", "epsilon and theta ladders must be non-empty")
    if epsilons != sorted(epsilons, reverse=True) and epsilons != sorted(epsilons):
        raise ScenarioError("schedule.epsilons", "ladder must be sorted")
    if thetas != sorted(thetas):
        raise ScenarioError("schedule.thetas", "ladder must be sorted ascending")
    ref = None
    fspec = sc.get("function", {})
    if fspec.get("id") == "weighted":
        ref = np.asarray(fspec["lambda"], dtype=float)
    cells = [(e, t) for t in thetas for e in epsilons]

    def run(cell):
        eps, th = cell
        try:
            result, _, _ = _run_dominate(sc, {"tol": tol}, theta=th, epsilon=eps)
        except InputError as exc:
            if isinstance(exc, ScenarioError):
                raise
            return {"epsilon": eps, "theta": th, "status": "failed", "error": str(exc)}
        except Exception as exc:  # solver and consistency errors stay in the cell
            return {"epsilon": eps, "theta": th, "status": "failed", "error": str(exc)}
        out = {"epsilon": eps, "theta": th, "status": "ok", **result}
        if ref is not None:
            out["linf_to_reference"] = float(np.abs(np.asarray(result["lambda"]) - ref).max())
        return out

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(run, cells))
    else:
        rows = [run(c) for c in cells]
    report = {
        "tool": {"name": "emerge", "version": __version__},
        "scenario_sha256": scenario_hash(sc),
        "kind": "schedule",
        "seed": None,
        "tolerances": {"lp_verdict": tol, "domination_violation": VIOLATION_TOL},
        "epsilons": epsilons,
        "thetas": thetas,
        "cells": rows,
        "verdict": "completed" if all(r["status"] == "ok" for r in rows) else "partial",
    }
    header = ["epsilon", "theta", "status", "lambda", "max_violation", "linf_to_reference"]
    table = [header] + [
        [
            r["epsilon"],
            r["theta"],
            r["status"],
            " ".join(repr(x) for x in r.get("lambda", [])),
            r.get("max_violation", ""),
            r.get("linf_to_reference", ""),
        ]
        for r in rows
    ]
    return report, table
