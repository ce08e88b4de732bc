"""Scalar maps, lattice pmfs and the tail-function representation."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

DOMAIN_SLACK = 1e-12
PRUNE_FLOOR = 1e-300
DEFAULT_BUDGET_OPS = 50_000_000_000


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class BudgetExceeded(RuntimeError):
    """A computation would exceed the ``HELIX_BUDGET_OPS`` operation cap."""


def budget_ops() -> int:
    raw = os.environ.get("HELIX_BUDGET_OPS")
    if raw is None or not raw.strip():
        return DEFAULT_BUDGET_OPS
    try:
        return int(float(raw))
    except ValueError as exc:
        raise DomainError(f"HELIX_BUDGET_OPS is not a number: {raw!r}") from exc


def check_budget(ops: float, what: str) -> None:
    cap = budget_ops()
    if ops > cap:
        raise BudgetExceeded(f"{what} needs ~{ops:.3g} operations, budget is {cap:.3g} (HELIX_BUDGET_OPS)")


def _as_probability(y):
    arr = np.asarray(y, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr < -DOMAIN_SLACK) or np.any(arr > 1.0 + DOMAIN_SLACK):
        raise DomainError(f"probability outside [0, 1]: {y!r}")
    return np.clip(arr, 0.0, 1.0)


def _clamp(v):
    return np.clip(v, 0.0, 1.0)


def g_map(y):
    """Right-side helix map ``2 - y - 2*sqrt(1-y)``.

    Evaluated as ``(y / (1 + sqrt(1-y)))**2``, the same function without
    cancellation at either end: relative precision survives for tiny ``y``.
    Accepts scalars or arrays.
    """
    if np.ndim(y) == 0:
        y = float(_as_probability(y))
        r = y / (1.0 + math.sqrt(1.0 - y))
        return min(max(r * r, 0.0), 1.0)
    arr = _as_probability(y)
    r = arr / (1.0 + np.sqrt(1.0 - arr))
    return _clamp(r * r)


def G_map(y):
    """Left-side helix map ``2*sqrt(y) - y``, the inverse of :func:`g_map`."""
    if np.ndim(y) == 0:
        y = float(_as_probability(y))
        return min(max(2.0 * math.sqrt(y) - y, 0.0), 1.0)
    arr = _as_probability(y)
    return _clamp(2.0 * np.sqrt(arr) - arr)


def iterate_map(which: str, y, steps: int):
    """Apply ``g`` or ``G`` ``steps`` times."""
    if which not in ("g", "G"):
        raise DomainError(f"unknown map {which!r}; expected 'g' or 'G'")
    if steps < 0:
        raise DomainError("steps must be nonnegative")
    fn = g_map if which == "g" else G_map
    out = _as_probability(y) if np.ndim(y) else float(_as_probability(y))
    for _ in range(steps):
        out = fn(out)
    return out


@dataclass(frozen=True)
class TailFunction:
    """Tail ``F(x) = P(M' >= x)`` of the normalized deficiency on the integers.

    ``values[i]`` holds ``F(i + 1)`` for ``x = 1..hi``.  ``F(x) = 1`` for
    ``x <= 0`` and ``F(x) = 0`` for ``x > hi`` are implicit.  ``comp`` holds
    ``1 - F`` carried separately so that values close to one keep their
    relative precision.
    """

    n: int
    values: np.ndarray
    p: float = 0.5
    comp: np.ndarray | None = field(default=None, repr=False)
    prune_floor: float = PRUNE_FLOOR

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64).ravel()
        if self.n < 0:
            raise DomainError("generation index must be nonnegative")
        if np.any(~np.isfinite(vals)) or np.any(vals < 0.0) or np.any(vals > 1.0):
            raise DomainError("tail values must lie in [0, 1]")
        if vals.size > 1 and np.any(np.diff(vals) > 0.0):
            raise DomainError("tail values must be nonincreasing in x")
        # trailing zeros carry no information
        nz = np.flatnonzero(vals)
        vals = vals[: nz[-1] + 1] if nz.size else vals[:0]
        if vals.size > self.n:
            raise DomainError(f"support exceeds [0, n]: hi={vals.size} > n={self.n}")
        if self.comp is None:
            comp = 1.0 - vals
        else:
            comp = np.array(self.comp, dtype=np.float64).ravel()[: vals.size]
            if comp.shape != vals.shape:
                raise DomainError("complement array does not match values")
        vals.setflags(write=False)
        comp.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "comp", comp)

    @property
    def hi(self) -> int:
        return int(self.values.size)

    def __call__(self, x: int) -> float:
        if x <= 0:
            return 1.0
        if x > self.hi:
            return 0.0
        return float(self.values[x - 1])

    def complement(self, x: int) -> float:
        if x <= 0:
            return 0.0
        if x > self.hi:
            return 1.0
        return float(self.comp[x - 1])

    def tail(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.int64)
        padded = np.concatenate(([1.0], self.values, [0.0]))
        return padded[np.clip(xs, 0, self.hi + 1)]

    def pmf(self) -> np.ndarray:
        """``P(M' = x)`` for ``x = 0..hi``."""
        full = np.concatenate(([1.0], self.values, [0.0]))
        return full[:-1] - full[1:]

    @classmethod
    def initial(cls, p: float = 0.5) -> "TailFunction":
        return cls(0, np.zeros(0), p)

    def to_csv(self, path, header_lines: Iterable[str] = ()) -> None:
        Path(path).write_text(tail_csv_text(self, header_lines))


def format_float(v: float) -> str:
    return repr(float(v))


def tail_csv_text(F: TailFunction, header_lines: Iterable[str] = ()) -> str:
    lines = [f"# {h}" for h in header_lines]
    lines.append(f"# n={F.n}")
    lines.append(f"# p={format_float(F.p)}")
    lines.append("x,F")
    lines.extend(f"{x},{format_float(v)}" for x, v in enumerate(F.values, start=1))
    return "\n".join(lines) + "\n"


def read_tail_csv(path) -> TailFunction:
    meta = {}
    xs, vals = [], []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, val = body.partition("=")
                meta[key.strip()] = val.strip()
            continue
        if line == "x,F":
            continue
        x, v = line.split(",")
        xs.append(int(x))
        vals.append(float(v))
    if xs != list(range(1, len(xs) + 1)):
        raise DomainError("tail CSV rows must be x = 1..hi in ascending order")
    n = int(meta.get("n", len(xs)))
    p = float(meta.get("p", 0.5))
    return TailFunction(n, np.array(vals), p)


@dataclass(frozen=True)
class LatticePmf:
    """Finite-support pmf on the integers."""

    support: tuple
    probs: tuple

    def __post_init__(self):
        sup = [int(s) for s in self.support]
        pr = [float(w) for w in self.probs]
        if not sup or len(sup) != len(pr):
            raise DomainError("support must be nonempty and match probs")
        if any(w <= 0.0 or not math.isfinite(w) for w in pr):
            raise DomainError("weights must be positive")
        if abs(math.fsum(pr) - 1.0) > 1e-12:
            raise DomainError(f"weights sum to {math.fsum(pr)!r}, not 1")
        order = sorted(range(len(sup)), key=sup.__getitem__)
        sup = [sup[i] for i in order]
        if len(set(sup)) != len(sup):
            raise DomainError("support points must be distinct")
        object.__setattr__(self, "support", tuple(sup))
        object.__setattr__(self, "probs", tuple(pr[i] for i in order))

    @classmethod
    def from_dict(cls, d: dict) -> "LatticePmf":
        return cls(tuple(d.keys()), tuple(d.values()))

    @classmethod
    def bernoulli01(cls, p: float) -> "LatticePmf":
        return cls((0, 1), (1.0 - p, p))

    @property
    def lo(self) -> int:
        return self.support[0]

    @property
    def omega(self) -> int:
        return self.support[-1]

    @property
    def span(self) -> int:
        """Largest ``h`` with all support points in ``lo + h*Z`` (0 if degenerate)."""
        return math.gcd(*(s - self.lo for s in self.support))

    def dense(self) -> np.ndarray:
        """Weights on ``lo..omega`` with zeros in the gaps."""
        out = np.zeros(self.omega - self.lo + 1)
        for s, w in zip(self.support, self.probs):
            out[s - self.lo] = w
        return out

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.probs))


@dataclass(frozen=True)
class JointPmf:
    """Truncated joint law of ``(M'_n, min(K_n, k_max))``.

    ``mass[x, k - 1]`` is ``P(M'_n = x, K_n = k)`` for ``k < k_max``; the last
    column pools every count ``>= k_max``.
    """

    n: int
    k_max: int
    mass: np.ndarray

    def __post_init__(self):
        m = np.array(self.mass, dtype=np.float64)
        if m.ndim != 2 or m.shape[1] != self.k_max:
            raise DomainError("mass must have shape (n + 1, k_max)")
        if np.any(m < 0.0):
            raise DomainError("negative mass")
        m.setflags(write=False)
        object.__setattr__(self, "mass", m)

    def total(self) -> float:
        return math.fsum(self.mass.ravel())

    def marginal_max(self) -> np.ndarray:
        return self.mass.sum(axis=1)

    def marginal_count(self) -> np.ndarray:
        return self.mass.sum(axis=0)

    def as_dict(self, tol: float = 0.0) -> dict:
        xs, ks = np.nonzero(self.mass > tol)
        return {(int(x), int(k) + 1): float(self.mass[x, k]) for x, k in zip(xs, ks)}
