"""Seeded Monte Carlo for the binary branching walk and the restarted critical GW chain.

Particles are exchangeable, so a level is stored as a histogram of positions
instead of a tree.  Replicas are grouped in fixed blocks of ``BLOCK``; block
``b`` draws from ``SeedSequence(seed, spawn_key=(b,))`` and advances all its
replicas together.  Blocks are merged in index order, so output does not depend
on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import DomainError

MAX_LEVEL = 127
EXACT_LIMIT = 1 << 62  # numpy's binomial takes int64 trial counts
BLOCK = 1024  # replicas per seed stream; fixed so output ignores the worker count


def replica_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


@dataclass
class LevelHistogram:
    """Particle counts at positions ``-level, -level + 2, ..., level``."""

    level: int
    counts: np.ndarray

    def __post_init__(self):
        if self.counts.shape != (self.level + 1,):
            raise DomainError("counts must have one cell per admissible position")

    @classmethod
    def root(cls) -> "LevelHistogram":
        return cls(0, np.ones(1, dtype=np.int64))

    @property
    def positions(self) -> np.ndarray:
        return np.arange(-self.level, self.level + 1, 2)

    def total(self) -> int:
        if self.counts.dtype == object:
            return sum(int(c) for c in self.counts)
        return int(self.counts.sum())

    def as_dict(self) -> dict:
        return {int(x): int(c) for x, c in zip(self.positions, self.counts) if c}

    def max_and_count(self) -> tuple[int, int]:
        top = int(np.flatnonzero(self.counts)[-1])
        return -self.level + 2 * top, int(self.counts[top])


def _approx_binomial(trials: int, p: float, rng: np.random.Generator) -> int:
    # normal approximation with continuity correction
    mean = trials * p
    sd = math.sqrt(trials * p * (1.0 - p))
    draw = math.floor(mean + sd * rng.standard_normal() + 0.5)
    return min(max(int(draw), 0), trials)


def split_level(h: LevelHistogram, p: float, rng: np.random.Generator, events: list | None = None) -> LevelHistogram:
    """Every particle at ``x`` has two children, each at ``x+1`` with prob ``p`` else ``x-1``.

    A cell with ``c`` particles sends ``U ~ Binomial(2c, p)`` children up.
    Trial counts that do not fit int64 fall back to a normal approximation and
    are recorded in ``events``.
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError("p must lie in [0, 1]")
    if h.level >= MAX_LEVEL:
        raise DomainError(f"count overflow: level {h.level + 1} exceeds 128-bit totals")
    trials = 2 * h.counts
    new_len = h.level + 2
    if h.counts.dtype != object and h.level + 1 < 62:
        up = rng.binomial(trials, p)
        out = np.zeros(new_len, dtype=np.int64)
        out[1:] += up
        out[:-1] += trials - up
        return LevelHistogram(h.level + 1, out)
    out = np.zeros(new_len, dtype=object)
    for i, t in enumerate(trials):
        t = int(t)
        if t < EXACT_LIMIT:
            u = int(rng.binomial(t, p))
        else:
            u = _approx_binomial(t, p, rng)
            if events is not None:
                events.append({"level": h.level, "trials": str(t)})
        out[i + 1] += u
        out[i] += t - u
    return LevelHistogram(h.level + 1, out)


def _run_block(n: int, p: float, seed: int, block: int, size: int):
    """Replicas ``block * BLOCK ... + size - 1`` advanced together level by level."""
    rng = replica_rng(seed, block)
    M = np.zeros((size, n + 1), dtype=np.int64)
    K = np.ones((size, n + 1), dtype=np.float64)
    events: list = []
    counts = np.ones((size, 1), dtype=np.int64)
    fast = min(n, 61)
    rows = np.arange(size)
    for k in range(1, fast + 1):
        trials = 2 * counts
        up = rng.binomial(trials, p)
        counts = np.zeros((size, k + 1), dtype=np.int64)
        counts[:, 1:] += up
        counts[:, :-1] += trials - up
        if np.any(counts.sum(axis=1) != 1 << k):
            raise AssertionError(f"particle count not conserved at level {k}")
        top = k - np.argmax(counts[:, ::-1] > 0, axis=1)
        M[:, k] = 2 * top - k
        K[:, k] = counts[rows, top]
    for r in range(size):
        h = LevelHistogram(fast, counts[r])
        for k in range(fast + 1, n + 1):
            h = split_level(h, p, rng, events)
            if h.total() != 1 << k:
                raise AssertionError(f"particle count not conserved at level {k}")
            M[r, k], K[r, k] = h.max_and_count()
        for e in events:
            e.setdefault("replica", block * BLOCK + r)
    return M, K, events


@dataclass
class BRWStats:
    n: int
    p: float
    seed: int
    replicas: int
    M: np.ndarray  # (replicas, n + 1)
    K: np.ndarray  # (replicas, n + 1), exact below 2**53
    sampler_events: list = field(default_factory=list)

    def increments(self) -> np.ndarray:
        return np.diff(self.M, axis=1)

    def deficiency(self, level: int) -> np.ndarray:
        """``M'_level = (level - M_level) / 2``."""
        return (level - self.M[:, level]) // 2

    def empirical_tail(self, level: int, xs) -> np.ndarray:
        d = self.deficiency(level)
        return np.array([np.mean(d >= x) for x in xs])

    def per_level(self) -> list[dict]:
        inc = self.increments()
        rows = []
        for k in range(self.n + 1):
            mean_inc = float(inc[:, k].mean()) if k < self.n else math.nan
            se_inc = float(inc[:, k].std(ddof=1) / math.sqrt(self.replicas)) if k < self.n and self.replicas > 1 else math.nan
            rows.append(
                {
                    "level": k,
                    "mean_M": float(self.M[:, k].mean()),
                    "var_M": float(self.M[:, k].var()),
                    "mean_K": float(self.K[:, k].mean()),
                    "p_K_le_4": float(np.mean(self.K[:, k] <= 4)),
                    "mean_increment": mean_inc,
                    "se_increment": se_inc,
                }
            )
        return rows

    def metadata(self) -> dict:
        return {
            "seed": self.seed,
            "replicas": self.replicas,
            "n": self.n,
            "p": self.p,
            "seed_derivation": f"numpy SeedSequence(seed, spawn_key=(replica // {BLOCK},)) -> PCG64",
            "sampler_crossover_events": len(self.sampler_events),
            "sampler_events": self.sampler_events[:100],
        }


def simulate_brw(n: int, p: float, seed: int, replicas: int, workers: int = 1) -> BRWStats:
    """Per-level maximum ``M_k`` and argmax count ``K_k`` across independent replicas."""
    if not 0 <= n <= MAX_LEVEL:
        raise DomainError(f"n must lie in [0, {MAX_LEVEL}]")
    if replicas < 1:
        raise DomainError("replicas must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise DomainError("p must lie in [0, 1]")
    nblocks = -(-replicas // BLOCK)
    run = lambda b: _run_block(n, p, seed, b, min(BLOCK, replicas - b * BLOCK))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, range(nblocks)))
    else:
        results = [run(b) for b in range(nblocks)]
    M = np.concatenate([r[0] for r in results])
    K = np.concatenate([r[1] for r in results])
    events = [e for r in results for e in r[2]]
    return BRWStats(n, float(p), seed, replicas, M, K, events)


def gw_offspring(z: int, rng: np.random.Generator) -> int:
    """Total progeny of ``z`` particles with law 1/4, 1/2, 1/4 on {0, 1, 2}."""
    return int(rng.binomial(2 * z, 0.5))


@dataclass
class GWResult:
    n: int
    seed: int
    replicas: int
    Z: np.ndarray

    def pmf(self) -> dict:
        vals, counts = np.unique(self.Z, return_counts=True)
        return {int(v): c / self.replicas for v, c in zip(vals, counts)}

    def tail(self, m: int) -> float:
        return float(np.mean(self.Z >= m))


def simulate_gw_restart(n: int, replicas: int, seed: int) -> GWResult:
    """Critical GW chain with pgf ``((1+s)/2)**2`` restarted at 1 upon extinction."""
    if n < 0 or replicas < 1:
        raise DomainError("n must be >= 0 and replicas >= 1")
    Z = np.empty(replicas, dtype=np.int64)
    for i in range(replicas):
        rng = replica_rng(seed, i)
        z = 1
        for _ in range(n):
            z = gw_offspring(z, rng) or 1
        Z[i] = z
    return GWResult(n, seed, replicas, Z)


def dkw_band(samples: int, delta: float = 1e-3) -> float:
    """Half-width of the Dvoretzky-Kiefer-Wolfowitz band at confidence ``1 - delta``."""
    return math.sqrt(math.log(2.0 / delta) / (2.0 * samples))
