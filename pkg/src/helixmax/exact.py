"""Exact evolution of the tail function, derived statistics, joint (max, count) law."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from . import _kernels
from .core import (
    PRUNE_FLOOR,
    BudgetExceeded,
    DomainError,
    JointPmf,
    TailFunction,
    budget_ops,
    check_budget,
)

CHUNK = 4096


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p!r}")
    return p


class TailEvolver:
    """Mutable DP state advancing ``F_n`` in place.

    Only the active window (cells strictly between 0 and 1) is recomputed;
    cells below it are exactly 1 and cells above the prune floor are 0.
    """

    def __init__(self, p: float, start: TailFunction | None = None, floor: float = PRUNE_FLOOR):
        self.p = _check_p(p)
        self.q = 1.0 - self.p
        self.floor = floor
        if start is None:
            start = TailFunction.initial(self.p)
        self.n = start.n
        self.hi = start.hi
        cap = max(64, 2 * (self.hi + 2))
        self._F = np.zeros(cap)
        self._C = np.ones(cap)
        self._F[0], self._C[0] = 1.0, 0.0
        self._F[1 : self.hi + 1] = start.values
        self._C[1 : self.hi + 1] = start.comp
        self.lo = 1
        while self.lo <= self.hi and self._C[self.lo] == 0.0:
            self.lo += 1
        self.ops = 0

    def _reserve(self, steps: int) -> None:
        need = self.hi + steps + 2
        if need <= self._F.size:
            return
        cap = max(need, 2 * self._F.size)
        F, C = np.zeros(cap), np.ones(cap)
        F[: self._F.size] = self._F
        C[: self._C.size] = self._C
        self._F, self._C = F, C

    def advance(self, steps: int = 1) -> None:
        cap = budget_ops()
        while steps > 0:
            chunk = min(steps, CHUNK)
            self._reserve(chunk)
            self.lo, self.hi, ops = _kernels.tail_advance(
                self._F, self._C, self.lo, self.hi, self.p, self.q, chunk, self.floor
            )
            self.lo, self.hi = int(self.lo), int(self.hi)
            self.ops += int(ops)
            self.n += chunk
            steps -= chunk
            if self.ops > cap:
                raise BudgetExceeded(f"tail DP exceeded HELIX_BUDGET_OPS={cap:.3g} at n={self.n}")

    def value(self, x: int) -> float:
        if x <= 0:
            return 1.0
        if x > self.hi:
            return 0.0
        return float(self._F[x])

    def tail(self) -> TailFunction:
        return TailFunction(
            self.n,
            self._F[1 : self.hi + 1].copy(),
            self.p,
            comp=self._C[1 : self.hi + 1].copy(),
            prune_floor=self.floor,
        )

    def copy(self) -> "TailEvolver":
        other = object.__new__(TailEvolver)
        other.__dict__.update(self.__dict__)
        other._F = self._F.copy()
        other._C = self._C.copy()
        return other


def step_tail(F: TailFunction, p: float) -> TailFunction:
    """One generation: ``F'(x) = (p F(x) + q F(x-1))**2``."""
    ev = TailEvolver(p, F)
    ev.advance(1)
    return ev.tail()


def step_window(values, p: float) -> np.ndarray:
    """Apply the recursion to an arbitrary window ``v[0..L]`` of a tail.

    Returns the updated values at positions ``1..L`` (the first input cell
    serves only as the left neighbour).  Used to test invariant solutions that
    are not anchored at ``F(0) = 1``.
    """
    p = _check_p(p)
    v = np.asarray(values, dtype=np.float64)
    t = p * v[1:] + (1.0 - p) * v[:-1]
    return t * t


def evolve(n: int, p: float = 0.5) -> TailFunction:
    """``F_n`` from ``F_0 = 1{x <= 0}``."""
    if n < 0:
        raise DomainError("n must be nonnegative")
    ev = TailEvolver(p)
    ev.advance(n)
    return ev.tail()


def evolve_levels(levels: Sequence[int], p: float = 0.5) -> Iterator[TailFunction]:
    """Stream ``F_n`` for ascending ``levels`` in one DP pass."""
    ev = TailEvolver(p)
    last = -1
    for n in levels:
        if n < last or n < 0:
            raise DomainError("levels must be nonnegative and ascending")
        ev.advance(n - ev.n)
        last = n
        yield ev.tail()


def median(F: TailFunction) -> int:
    """Smallest ``x`` with ``F(x) <= 1/2``."""
    below = np.flatnonzero(F.values <= 0.5)
    return int(below[0]) + 1 if below.size else F.hi + 1


def delta_n(F_n: TailFunction, F_next: TailFunction) -> float:
    """``sum_k [F_{n+1}(k) - F_n(k)] = E(M'_{n+1} - M'_n)``."""
    if F_next.n != F_n.n + 1:
        raise DomainError(f"level mismatch: {F_n.n} -> {F_next.n}")
    hi = max(F_n.hi, F_next.hi)
    xs = np.arange(1, hi + 1)
    a, b = F_n.tail(xs), F_next.tail(xs)
    ca = np.concatenate((F_n.comp, np.ones(hi - F_n.hi)))
    cb = np.concatenate((F_next.comp, np.ones(hi - F_next.hi)))
    # near one the complements carry the precision
    diff = np.where(a > 0.5, ca - cb, b - a)
    return math.fsum(diff)


def expected_max(F: TailFunction) -> float:
    """``E M_n = n - 2 sum_{x>=1} F(x)`` on the +-1 scale."""
    return F.n - 2.0 * math.fsum(F.values)


def fixed_point_supercritical(p: float, x_max: int) -> TailFunction:
    """Nondegenerate invariant tail for ``p > 1/2``.

    Solves ``F(x) = (p F(x) + q F(x-1))**2`` for the smaller root via
    ``sqrt(F(x)) = 2 q F(x-1) / (1 + sqrt(1 - 4 p q F(x-1)))``, the
    cancellation-free form of the closed expression.  The returned tail uses
    ``n = x_max`` only to satisfy the support bound.
    """
    p = _check_p(p)
    if p <= 0.5:
        raise DomainError("no nondegenerate invariant solution for p <= 1/2")
    if x_max < 1:
        raise DomainError("x_max must be >= 1")
    q = 1.0 - p
    vals = np.zeros(x_max)
    prev = 1.0
    for i in range(x_max):
        r = 2.0 * q * prev / (1.0 + math.sqrt(1.0 - 4.0 * p * q * prev))
        prev = r * r
        vals[i] = prev
    return TailFunction(x_max, vals, p)


def fixed_point_closed_form(p: float, prev: float) -> float:
    """The closed expression ``(2p^2)^-1 [1 - 2 F pq - sqrt(1 - 4 F pq)]`` as written."""
    q = 1.0 - p
    return (1.0 - 2.0 * prev * p * q - math.sqrt(1.0 - 4.0 * prev * p * q)) / (2.0 * p * p)


def gw_extinction_curve(n: int) -> np.ndarray:
    """``q_k = P(Z_k = 0)`` for the critical GW process with pgf ``((1+s)/2)**2``.

    The scalar recursion is carried in the same dual form as the tail DP
    (extinction probability and survival probability side by side), so it is
    the recursion of ``F_k(1)`` literally.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    out = np.empty(n)
    s, c = 0.0, 1.0
    for k in range(n):
        t = 0.5 * s + 0.5 * 1.0
        u = 0.5 * c + 0.5 * 0.0
        ft = t * t
        if ft <= 0.5:
            s, c = ft, 1.0 - ft
        else:
            c = u * (2.0 - u)
            s = 1.0 - c
        out[k] = s
    return out


@dataclass(frozen=True)
class JointReport:
    joint: JointPmf
    p: float
    e_4_pow_minus_k: float
    increment_mean: float
    e_2_pow_minus_k: float
    increment_mean_literal: float

    def as_json(self) -> dict:
        return {
            "n": self.joint.n,
            "p": self.p,
            "k_max": self.joint.k_max,
            "e_4_pow_minus_k": self.e_4_pow_minus_k,
            "increment_mean": self.increment_mean,
            "e_2_pow_minus_k": self.e_2_pow_minus_k,
            "increment_mean_from_2_pow_minus_k": self.increment_mean_literal,
            "pooled_cell": "K >= k_max counted as k_max; expectations of decreasing functions of K are upper bounds",
        }


def joint_evolve(n: int, p: float = 0.5, k_max: int = 64) -> JointReport:
    """Exact law of ``(M'_n, min(K_n, k_max))`` with ``K_n`` the argmax count.

    Two subtrees combine as ``M' = min(M'_i + B_i)`` and ``K`` is the sum of
    the counts of the subtrees attaining the minimum.  Given ``K_n`` the maximum
    moves down iff all ``2 K_n`` child edges step down, probability
    ``q**(2 K_n)`` (``4**-K_n`` when ``p = 1/2``), hence
    ``E(M_{n+1} - M_n) = 1 - 2 E[q**(2 K_n)]``.  The report also carries the
    value obtained with ``q**K_n`` for comparison.
    """
    p = _check_p(p)
    if n < 0:
        raise DomainError("n must be nonnegative")
    if k_max < 2:
        raise DomainError("k_max must be >= 2")
    check_budget(float(n) * (n + 1) * k_max * k_max, "joint_evolve")
    q = 1.0 - p
    J = np.zeros((1, k_max))
    J[0, 0] = 1.0
    for _ in range(n):
        J = _kernels.joint_step(J, p, q)
    joint = JointPmf(n, k_max, J)
    ks = np.arange(1, k_max + 1)
    wk = joint.marginal_count()
    e4 = math.fsum(wk * q ** (2.0 * ks))
    e2 = math.fsum(wk * q ** ks.astype(float))
    return JointReport(joint, p, e4, 1.0 - 2.0 * e4, e2, 1.0 - 2.0 * e2)
