"""Acceptance criteria, one test each.

Every test prints a single ``criterion N: PASS|FAIL`` line (also collected
into the terminal summary) and asserts at the stated tolerance and runtime.
"""

import functools
import itertools
import json
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, random_instance, random_simplex, random_valid_F
from emerge.cli import main
from emerge.core import Coupling, DiscreteDistribution, grid_sample, make_axis, weighted_merge
from emerge.domination import dominate, linear_majorant, sup_mean_constrained
from emerge.montecarlo import iid_exponential, permutation
from emerge.oracle import SmallInstance, enumerate_binary_mean_laws, enumerate_couplings_value
from emerge.scenario import schedule
from emerge.subclasses import (
    compare_rules,
    exchangeable_merge,
    exchangeable_tail_check,
    full_support_admissibility_check,
    product_points,
    weighted_average,
)
from emerge.transport import worst_case_expectation


def criterion(n, title, budget):
    def wrap(fn):
        @functools.wraps(fn)
        def test(*args, **kwargs):
            start = time.perf_counter()
            detail, err = "", None
            try:
                detail = fn(*args, **kwargs) or ""
            except Exception as exc:  # recorded, then re-raised
                err = exc
            elapsed = time.perf_counter() - start
            if err is None and elapsed > budget:
                err = AssertionError(f"runtime {elapsed:.1f}s exceeds {budget}s")
            status = "PASS" if err is None else "FAIL"
            msg = detail if err is None else f"{type(err).__name__}: {err}"
            line = f"criterion {n}: {status} [{elapsed:.2f}s / {budget}s] {title} -- {msg}"
            ACCEPTANCE_LINES.append(line)
            print(line)
            if err is not None:
                raise err

        return test

    return wrap


def grid_mesh(F):
    return np.meshgrid(*F.axes, indexing="ij")


@criterion(1, "domination of random valid F (K=2, theta=4, 5 points, eps=1e-3)", 60)
def test_criterion_1_domination():
    rng = np.random.default_rng(1)
    worst = -np.inf
    for _ in range(20):
        F = random_valid_F(rng, K=2, theta=4.0, points=5)
        eps = 1e-3
        rep = dominate(F, eps)
        lam = rep.weights.entries
        mesh = grid_mesh(F)
        merged = sum(lam[k] * mesh[k] for k in range(2)) + lam[-1]
        scan = float((F.values - (1 + eps) * merged).max())
        assert scan <= 1e-8
        assert rep.max_violation <= 1e-8
        assert lam.min() >= 0 and abs(lam.sum() - 1) <= 1e-12
        worst = max(worst, scan)
    return f"worst F - (1+eps) M_lam = {worst:.3e}"


@criterion(2, "max is detected as invalid (value 2 on {0,2} half-half marginals)", 1)
def test_criterion_2_invalidity():
    F = grid_sample(max, 2, [[0, 1, 2], [0, 1, 2]])
    mu = DiscreteDistribution([0, 2], [0.5, 0.5])
    cert = worst_case_expectation(F, (mu, mu))
    oracle = enumerate_couplings_value(SmallInstance(F, (mu, mu)))
    assert abs(cert.primal_value - 2.0) <= 1e-8
    assert abs(oracle.value - cert.primal_value) <= 1e-8
    assert cert.verdict() == "invalid"
    return f"primal {cert.primal_value:.9f}, oracle {oracle.value:.9f}, verdict {cert.verdict()}"


def _independent_value(F, margs):
    total = 0.0
    for idx in itertools.product(*(range(mu.atoms.size) for mu in margs)):
        p = np.prod([mu.probs[i] for mu, i in zip(margs, idx)])
        total += p * F(tuple(mu.atoms[i] for mu, i in zip(margs, idx)))
    return total


@criterion(3, "duality gap on 50 random instances (K<=3, <=4 atoms)", 30)
def test_criterion_3_duality():
    rng = np.random.default_rng(3)
    worst_gap, worst_weak = 0.0, -np.inf
    for i in range(50):
        F, margs = random_instance(rng, K=1 + i % 3)
        cert = worst_case_expectation(F, margs)
        worst_gap = max(worst_gap, abs(cert.primal_value - cert.dual_value))
        bound = cert.dual.integral(margs)
        feasible = [cert.coupling.expectation(F), _independent_value(F, margs)]
        if F.K <= 2:
            feasible.append(enumerate_couplings_value(SmallInstance(F, margs)).value)
        worst_weak = max(worst_weak, max(feasible) - bound)
    assert worst_gap <= 1e-6
    assert worst_weak <= 1e-8
    return f"max |primal - dual| = {worst_gap:.2e}, max weak-duality excess = {worst_weak:.2e}"


def _random_g(rng, axis):
    kind = rng.integers(4)
    if kind == 0:
        return rng.random(axis.size) * 3
    if kind == 1:
        return np.cumsum(rng.random(axis.size))
    if kind == 2:
        return rng.random() * axis**2 + rng.random()
    return np.minimum(axis, rng.uniform(0.5, 3)) + rng.random() * (axis >= rng.choice(axis))


@criterion(4, "mean-constrained sup vs binary-law oracle; linear majorant", 60)
def test_criterion_4_majorant():
    rng = np.random.default_rng(4)
    worst_diff, worst_gap, worst_interval = 0.0, -np.inf, -np.inf
    for _ in range(100):
        axis = make_axis(float(rng.choice([2, 4, 8, 16])), int(rng.integers(3, 12)))
        g = _random_g(rng, axis)
        r = sup_mean_constrained(g, axis).value
        ref = enumerate_binary_mean_laws(g, axis)
        worst_diff = max(worst_diff, abs(r - ref))
        maj = linear_majorant(g, axis, r)
        worst_gap = max(worst_gap, float((g - maj(axis)).max()))
        worst_interval = max(worst_interval, maj.h_min - maj.h_max)
    assert worst_diff <= 1e-9
    assert worst_gap <= 1e-9
    assert worst_interval <= 1e-9
    return (
        f"max |sup - oracle| = {worst_diff:.1e}, max g - majorant = {worst_gap:.1e}, "
        f"max h_min - h_max = {worst_interval:.2f}"
    )


def _random_coupling(rng, margs, F):
    kind = rng.integers(3)
    if kind == 0:  # independent
        idx = list(itertools.product(*(range(mu.atoms.size) for mu in margs)))
        mass = [np.prod([mu.probs[i] for mu, i in zip(margs, t)]) for t in idx]
        return Coupling(margs, idx, mass)
    if kind == 1:  # optimal coupling for a random objective
        return worst_case_expectation(F, margs).coupling
    # comonotone: match quantiles
    cdfs = [np.cumsum(mu.probs) for mu in margs]
    cuts = np.unique(np.clip(np.concatenate([[0.0, 1.0], *cdfs]), 0.0, 1.0))
    support, mass = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (lo + hi)
        support.append([min(int(np.searchsorted(c, mid)), c.size - 1) for c in cdfs])
        mass.append(hi - lo)
    return Coupling(margs, support, mass)


@criterion(5, "expectation of M_lam is dependence-free (20 random couplings)", 30)
def test_criterion_5_dependence_free():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(20):
        K = int(rng.integers(1, 4))
        F, margs = random_instance(rng, K=K)
        lam = random_simplex(rng, K + 1)
        pi = _random_coupling(rng, margs, F)
        value = sum(m * weighted_merge(lam, x) for x, m in zip(pi.points(), pi.mass))
        closed = sum(l * mu.mean for l, mu in zip(lam, margs)) + lam[-1]
        worst = max(worst, abs(value - closed))
    assert worst <= 1e-10
    return f"max deviation {worst:.1e}"


@criterion(6, "exchangeable tail bound (K=5, 10^6 reps) and incomparability", 120)
def test_criterion_6_exchangeable():
    sampler = permutation([5, 0, 0, 0, 0])
    parts = []
    for beta in (1.5, 2.0, 5.0):
        rep = exchangeable_tail_check(beta, sampler, reps=10**6, seed=2024)
        est = rep.estimate
        assert est.mean <= 1 / beta + 3 * est.se
        parts.append(f"beta={beta:g}: {est.mean:.5f} <= {1 / beta:.5f} + 3*{est.se:.1e}")
    K = 5
    lam = np.full(K + 1, 1.0 / (K + 1))
    for axis in ([0, 1, 2, 3], [0, 0.5, 1, 2, 5]):
        cmp = compare_rules(
            lambda X: exchangeable_merge(2.0, X),
            lambda X: weighted_average(lam, X),
            product_points(axis, K),
        )
        assert cmp.verdict == "incomparable"
        assert exchangeable_merge(2.0, cmp.above) > weighted_average(lam, cmp.above)
        assert exchangeable_merge(2.0, cmp.below) < weighted_average(lam, cmp.below)
    return "; ".join(parts) + "; incomparable on both grids"


@criterion(7, "full-support observation: M_lam + 0.05*1{e1>1} has mean > 1", 60)
def test_criterion_7_full_support():
    lam = np.array([0.4, 0.4, 0.2])
    rule = lambda X: weighted_average(lam, X)
    better = lambda X: weighted_average(lam, X) + 0.05 * (X[:, 0] > 1)
    rep = full_support_admissibility_check(rule, iid_exponential(2), better, reps=10**6, seed=7)
    est = rep.estimate
    target = 1 + 0.05 * np.exp(-1)
    assert est.mean >= target - 3 * est.se
    assert est.mean - 3 * est.se > 1
    assert rep.verdict == "inadmissible improvement rejected"
    return f"estimate {est.mean:.5f} (se {est.se:.1e}), target {target:.5f}"


@criterion(8, "self-domination round trip and epsilon-ladder schedule", 60)
def test_criterion_8_round_trip():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(10):
        lam = random_simplex(rng, 3)
        F = grid_sample(lambda e: weighted_merge(lam, e), 4.0, 5, K=2)
        rep = dominate(F, 1e-3)
        assert rep.max_violation <= 1e-8
        worst = max(worst, float(np.abs(rep.weights.entries - lam).max()))
    assert worst <= 0.01
    sc = {
        "kind": "dominate",
        "function": {"id": "weighted", "lambda": [0.5, 0.2, 0.3]},
        "grid": {"K": 2, "theta": 4, "points": 5},
    }
    report, _ = schedule(sc, [1e-1, 1e-2, 1e-3], [2.0, 4.0, 8.0])
    for th in (2.0, 4.0, 8.0):
        dist = [c["linf_to_reference"] for c in report["cells"] if c["theta"] == th]
        assert all(a >= b for a, b in zip(dist, dist[1:])), dist
    return f"max l_inf error {worst:.2e}; ladder distances nonincreasing"


@criterion(9, "simulate reports are byte-identical for a fixed seed", 60)
def test_criterion_9_reproducible(tmp_path):
    sc = {
        "kind": "simulate",
        "rule": {"id": "exchangeable", "beta": 2},
        "sampler": {"id": "permutation", "base": [5, 0, 0, 0, 0]},
        "reps": 10**6,
        "seed": 42,
    }
    path = tmp_path / "sim.json"
    path.write_text(json.dumps(sc))
    blobs = []
    for name in ("a", "b"):
        assert main(["run", "--scenario", str(path), "--out", str(tmp_path / name)]) == 0
        blobs.append((tmp_path / name / "report.json").read_bytes())
    assert blobs[0] == blobs[1]
    return f"{len(blobs[0])} bytes, identical"
