"""Seeded, order-independent Monte Carlo replication.

Replications are split into fixed-size chunks.  Chunk ``c`` draws from its
own generator seeded by ``SeedSequence(seed, spawn_key=(c,))``, so the
result for a given master seed does not depend on how many workers run or
in which order chunks finish.  Chunk summaries are merged in chunk order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, InputError

CHUNK = 1 << 16


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(chunk,))
    return np.random.Generator(np.random.PCG64(ss))


def default_threads() -> int:
    raw = os.environ.get("EMERGE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise InputError(f"EMERGE_THREADS must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class Estimate:
    """Sample mean with its standard error."""

    reps: int
    mean: float
    se: float
    seed: int

    def upper(self, k: float = 3.0) -> float:
        return self.mean + k * self.se

    def lower(self, k: float = 3.0) -> float:
        return self.mean - k * self.se


def _combine(parts):
    # Chan et al. pairwise update, applied left to right
    n, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in parts:
        if nb == 0:
            continue
        delta = mb - mean
        tot = n + nb
        mean = mean + delta * nb / tot
        m2 = m2 + m2b + delta * delta * n * nb / tot
        n = tot
    return n, mean, m2


def replicate(
    statistic: Callable[[np.ndarray], np.ndarray],
    sampler: Callable[[np.random.Generator, int], np.ndarray],
    reps: int,
    seed: int,
    *,
    chunk: int = CHUNK,
    threads: int | None = None,
) -> Estimate:
    """Estimate ``E[statistic(X)]`` with ``X`` drawn row-wise from ``sampler``."""
    if reps < 2:
        raise DomainError("need at least 2 replications")
    if seed < 0:
        raise DomainError("seed must be a nonnegative integer")
    n_chunks = -(-reps // chunk)

    def run(c):
        size = min(chunk, reps - c * chunk)
        y = np.asarray(statistic(sampler(chunk_rng(seed, c), size)), dtype=float)
        mu = float(y.mean())
        return size, mu, float(((y - mu) ** 2).sum())

    threads = default_threads() if threads is None else threads
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(n_chunks)))
    else:
        parts = [run(c) for c in range(n_chunks)]
    n, mean, m2 = _combine(parts)
    se = float(np.sqrt(m2 / (n - 1) / n))
    return Estimate(int(n), float(mean), se, int(seed))


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sampler:
    """Draws ``(n, K)`` arrays of e-values.

    ``full_support`` says whether the joint law charges every open set of the
    positive orthant; ``exchangeable`` and ``identical`` name the subclasses
    the law belongs to.
    """

    name: str
    K: int
    draw: Callable = None
    full_support: bool = False
    exchangeable: bool = False
    identical: bool = False
    params: dict = None

    def __call__(self, rng, n):
        return self.draw(rng, n)

    def describe(self) -> dict:
        return {"id": self.name, "K": self.K, **(self.params or {})}


def iid_exponential(K: int, mean: float = 1.0) -> Sampler:
    """Independent exponentials; full support, exchangeable."""
    return Sampler(
        "iid_exponential",
        K,
        lambda rng, n: rng.exponential(mean, size=(n, K)),
        full_support=True,
        exchangeable=True,
        params={"mean": mean},
    )


def permutation(base) -> Sampler:
    """Uniformly random permutations of a fixed nonnegative vector.

    Every coordinate has mean ``mean(base)``, which must not exceed 1.
    """
    base = np.asarray(base, dtype=float)
    if base.ndim != 1 or base.size == 0 or np.any(base < 0):
        raise DomainError("base must be a nonempty nonnegative vector")
    if base.mean() > 1 + 1e-12:
        raise DomainError(f"base has mean {base.mean()} > 1")

    def draw(rng, n):
        return rng.permuted(np.broadcast_to(base, (n, base.size)), axis=1)

    return Sampler(
        "permutation", base.size, draw, exchangeable=True, params={"base": base.tolist()}
    )


def identical_exponential(K: int, mean: float = 1.0) -> Sampler:
    """One exponential copied into every coordinate."""
    return Sampler(
        "identical_exponential",
        K,
        lambda rng, n: np.repeat(rng.exponential(mean, size=(n, 1)), K, axis=1),
        exchangeable=True,
        identical=True,
        params={"mean": mean},
    )


def identical_two_point(K: int, top: float = 4.0) -> Sampler:
    """One binary e-variable (``top`` w.p. ``1/top``, else 0) copied K times."""
    def draw(rng, n):
        x = np.where(rng.random(n) < 1.0 / top, top, 0.0)
        return np.repeat(x[:, None], K, axis=1)

    return Sampler(
        "identical_two_point", K, draw, exchangeable=True, identical=True, params={"top": top}
    )


SAMPLERS = {
    "iid_exponential": lambda p: iid_exponential(int(p["K"]), float(p.get("mean", 1.0))),
    "permutation": lambda p: permutation(p["base"]),
    "identical_exponential": lambda p: identical_exponential(int(p["K"]), float(p.get("mean", 1.0))),
    "identical_two_point": lambda p: identical_two_point(int(p["K"]), float(p.get("top", 4.0))),
}


def make_sampler(spec: dict) -> Sampler:
    try:
        factory = SAMPLERS[spec["id"]]
    except KeyError:
        raise InputError(f"unknown sampler id {spec.get('id')!r}") from None
    return factory(spec)
