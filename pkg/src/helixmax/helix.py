"""Invariant helix family of the symmetric recursion and the cyclic limit experiments."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import BudgetExceeded, DomainError, TailFunction, g_map, G_map
from .exact import TailEvolver, delta_n, median

EPS = 1e-14
HALF_TOL = 1e-12
PERTURB = 1e-9


@dataclass(frozen=True)
class HelixElement:
    """Invariant tail pinned by one point ``F(k0) = v0`` with ``0 < v0 <= 1/2``.

    To the right ``F(x) = g^(x-k0)(v0)``; to the left the complement follows
    ``1 - F(x-1) = g(1 - F(x))``, which avoids evaluating ``G`` near 1.
    """

    k0: int
    v0: float

    def __post_init__(self):
        if not 0.0 < self.v0 <= 0.5:
            raise DomainError(f"anchor value must lie in (0, 1/2], got {self.v0!r}")

    def shifted(self, by: int) -> "HelixElement":
        return HelixElement(self.k0 + by, self.v0)

    def extent(self, eps: float = EPS) -> tuple[int, int]:
        """Integer range outside which ``F`` is within ``eps`` of 0 or 1."""
        v, right = self.v0, self.k0
        while v > eps:
            v = g_map(v)
            right += 1
        c, left = 1.0 - self.v0, self.k0
        while c > eps:
            c = g_map(c)
            left -= 1
        return left, right

    def sample(self, xs) -> tuple[np.ndarray, np.ndarray]:
        """Values and complements at integer points ``xs``."""
        xs = np.asarray(xs, dtype=np.int64)
        if xs.size == 0:
            return np.zeros(0), np.zeros(0)
        lo, hi = int(min(xs.min(), self.k0)), int(max(xs.max(), self.k0))
        vals = np.empty(hi - lo + 1)
        comp = np.empty(hi - lo + 1)
        i0 = self.k0 - lo
        v = self.v0
        for i in range(i0, hi - lo + 1):
            vals[i], comp[i] = v, 1.0 - v
            v = g_map(v)
        c = 1.0 - self.v0
        for i in range(i0 - 1, -1, -1):
            c = g_map(c)
            vals[i], comp[i] = 1.0 - c, c
        return vals[xs - lo], comp[xs - lo]


def helix_tail(e: HelixElement, x: int) -> float:
    if x >= e.k0:
        v = e.v0
        for _ in range(x - e.k0):
            v = g_map(v)
        return v
    c = 1.0 - e.v0
    for _ in range(e.k0 - x):
        c = g_map(c)
    return 1.0 - c


def from_median_anchor(F: TailFunction) -> HelixElement:
    """Helix element through ``(k_n, F_n(k_n))``.

    Equivalent to the element with parameter ``G^k_n(F_n(k_n))`` but never
    forms that parameter, which sits within ``4**-k_n`` of 1.
    """
    k = median(F)
    v = F(k)
    if v <= 0.0 or v >= 1.0:
        raise DomainError(f"degenerate anchor: F({k}) = {v!r}")
    return HelixElement(k, v)


def from_parameter(a: float) -> HelixElement:
    """Element ``F^a`` with ``F^a(0) = a``, re-anchored at its median point ``z``.

    ``z`` satisfies ``F^a(z-1) > 1/2 >= F^a(z)``.
    """
    if not 0.0 < a < 1.0:
        raise DomainError(f"helix parameter must lie in (0, 1), got {a!r}")
    x, v = 0, float(a)
    if v <= 0.5:
        while G_map(v) <= 0.5:
            v = G_map(v)
            x -= 1
    else:
        while v > 0.5:
            v = g_map(v)
            x += 1
    return HelixElement(x, v)


def sup_distance(F: TailFunction, e: HelixElement, shift: int = 0, eps: float = EPS) -> float:
    """``sup_x |F(x) - helix_tail(e, x + shift)|`` plus ``eps``.

    The maximum is taken over every x where either function lies in
    ``(eps, 1 - eps)``, with one cell of margin; beyond that window both
    functions are within ``eps`` of the same limit, which the slack covers.
    """
    left, right = e.extent(eps)
    lo = min(0, left - shift) - 1
    hi = max(F.hi, right - shift) + 1
    xs = np.arange(lo, hi + 1)
    fv = F.tail(xs)
    fc = np.where(xs <= 0, 0.0, np.where(xs > F.hi, 1.0, 0.0))
    inside = (xs >= 1) & (xs <= F.hi)
    fc[inside] = F.comp[xs[inside] - 1]
    hv, hc = e.sample(xs + shift)
    diff = np.where((fv > 0.5) & (hv > 0.5), np.abs(fc - hc), np.abs(fv - hv))
    return float(diff.max()) + eps


@dataclass(frozen=True)
class CyclicPoint:
    n: int
    k_n: int
    d_n: float
    delta_n: float


def cyclic_distance_curve(levels: Sequence[int], p: float = 0.5) -> list[CyclicPoint]:
    """Distance of ``F_n`` to its median-pinned helix element at each level.

    One streaming DP pass; ``delta_n`` needs one extra step per sampled level.
    """
    if list(levels) != sorted(levels):
        raise DomainError("levels must be ascending")
    ev = TailEvolver(p)
    out = []
    for n in levels:
        if n < 1:
            raise DomainError("levels must be >= 1")
        ev.advance(n - ev.n)
        F = ev.tail()
        nxt = ev.copy()
        nxt.advance(1)
        e = from_median_anchor(F)
        out.append(CyclicPoint(n, e.k0, sup_distance(F, e), delta_n(F, nxt.tail())))
    return out


@dataclass(frozen=True)
class LimitEntry:
    k: int
    n_k: int
    distance: float
    tie: bool = False


@dataclass(frozen=True)
class LimitPointReport:
    a: float
    a_used: float
    perturbed: bool
    z: int
    target: float
    entries: list = field(default_factory=list)

    def monotone(self, slack: float = 0.10) -> bool:
        d = [e.distance for e in self.entries]
        return all(b <= a * (1.0 + slack) for a, b in zip(d, d[1:]))

    def as_json(self) -> dict:
        return {
            "a": self.a,
            "a_used": self.a_used,
            "perturbed": self.perturbed,
            "z": self.z,
            "entries": [
                {"k": e.k, "n_k": e.n_k, "distance": e.distance, "tie": e.tie} for e in self.entries
            ],
        }


def _hits_half(a: float) -> bool:
    e = from_parameter(a)
    return abs(e.v0 - 0.5) < HALF_TOL or abs(helix_tail(e, e.k0 - 1) - 0.5) < HALF_TOL


def find_limit_point(a: float, count: int = 3, max_level: int = 10**8) -> LimitPointReport:
    """Subsequence ``n_k`` along which ``F_{n_k}(x + k - z)`` approaches ``F^a``.

    For ``k = 1, 2, ...`` the level ``n_k`` minimizes ``|F_n(k) - F^a(z)|``.
    Since ``n -> F_n(k)`` is nondecreasing, the crossing level is located by
    galloping ahead on DP checkpoints and bisecting back.
    """
    if count < 1:
        raise DomainError("count must be >= 1")
    a_used, perturbed = float(a), False
    if _hits_half(a_used):
        a_used = a_used + PERTURB if a_used + PERTURB < 1.0 else a_used - PERTURB
        perturbed = True
    e = from_parameter(a_used)
    z, target = e.k0, e.v0
    ev = TailEvolver(0.5)
    entries = []
    k = 1
    while len(entries) < count:
        chunk = 1
        while True:
            if ev.n + chunk > max_level:
                raise BudgetExceeded(f"no crossing for k={k} below n={max_level}")
            trial = ev.copy()
            trial.advance(chunk)
            if trial.value(k) >= target:
                break
            ev = trial
            chunk = min(2 * chunk, 1 << 16)
        # crossing lies in (ev.n, ev.n + chunk]
        span = chunk
        while span > 1:
            half = span // 2
            trial = ev.copy()
            trial.advance(half)
            if trial.value(k) >= target:
                span = half
            else:
                ev, span = trial, span - half
        before = ev.tail()
        ev.advance(1)
        after = ev.tail()
        gap_before, gap_after = abs(before(k) - target), abs(after(k) - target)
        # F_0 is degenerate, so level 0 is never reported
        chosen = before if (gap_before < gap_after and before.n >= 1) else after
        tie = gap_before == gap_after
        dist = sup_distance(chosen, e, shift=z - k)
        entries.append(LimitEntry(k, chosen.n, dist, tie))
        k += 1
    return LimitPointReport(float(a), a_used, perturbed, z, target, entries)


def _g_dual(v, c):
    """``g(v)`` given ``v`` and its complement ``c = 1 - v`` separately."""
    r = v / (1.0 + np.sqrt(c))
    return r * r


def fngg_gaps(F: TailFunction) -> tuple[float, float]:
    """Largest violations of ``F(x) <= g(F(x-1))`` and ``G(F(x)) <= F(x-1)``.

    Where the values involved exceed 1/2 the comparison is made between
    complements through the duality ``1 - g(y) = G(1 - y)``.  Nonpositive
    results mean the inequality holds at every stored ``x``.
    """
    v = np.concatenate(([1.0], F.values, [0.0]))
    c = np.concatenate(([0.0], F.comp, [1.0]))
    cur_v, cur_c, prev_v, prev_c = v[1:], c[1:], v[:-1], c[:-1]
    first = np.where(
        cur_v > 0.5,
        (2.0 * np.sqrt(prev_c) - prev_c) - cur_c,
        cur_v - _g_dual(prev_v, prev_c),
    )
    second = np.where(
        prev_v > 0.5,
        prev_c - _g_dual(cur_c, cur_v),
        (2.0 * np.sqrt(cur_v) - cur_v) - prev_v,
    )
    return float(first.max()), float(second.max())
