"""Cumulant functionals of a one-generation progeny law and the reduction to criticality."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np
from scipy.optimize import bisect
from scipy.special import logsumexp, xlogy

from .core import DomainError

ROOT_XTOL = 1e-12
IDENTITY_TOL = 1e-10


class NoCriticalTilt(DomainError):
    """``R(gamma) = 0`` has no positive root."""


@dataclass(frozen=True)
class ProgenySpec:
    """``m`` children per particle with i.i.d. displacements from a finite pmf."""

    m: int
    support: tuple
    probs: tuple
    tilt: tuple | None = None

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise DomainError("m must be an integer >= 2")
        sup = tuple(float(v) for v in self.support)
        pr = tuple(float(w) for w in self.probs)
        if not sup or len(sup) != len(pr):
            raise DomainError("support must be nonempty and match probs")
        if any(w <= 0.0 for w in pr) or abs(math.fsum(pr) - 1.0) > 1e-12:
            raise DomainError("displacement weights must be positive and sum to 1")
        order = sorted(range(len(sup)), key=sup.__getitem__)
        object.__setattr__(self, "support", tuple(sup[i] for i in order))
        object.__setattr__(self, "probs", tuple(pr[i] for i in order))

    @classmethod
    def bernoulli_pm1(cls, p: float, m: int = 2) -> "ProgenySpec":
        if not 0.0 < p < 1.0:
            raise DomainError("p must lie in (0, 1)")
        return cls(m, (-1.0, 1.0), (1.0 - p, p))

    def as_json(self) -> dict:
        return {"m": self.m, "support": list(self.support), "probs": list(self.probs), "tilt": self.tilt}


class Cumulants(NamedTuple):
    phi: float
    psi: float
    dpsi: float
    d2psi: float
    r: float


def cumulants(spec: ProgenySpec, gamma: float) -> Cumulants:
    """``Phi, Psi = ln Phi, Psi', Psi''`` and ``R = gamma Psi' - Psi`` at ``gamma``.

    Everything is computed from the tilted weights ``p_i e^{gamma v_i}`` with
    the largest exponent factored out.
    """
    v = np.asarray(spec.support)
    logw = gamma * v + np.log(spec.probs)
    lse = logsumexp(logw)
    w = np.exp(logw - lse)
    mean = float(np.dot(w, v))
    var = float(np.dot(w, (v - mean) ** 2))
    psi = math.log(spec.m) + float(lse)
    phi = math.exp(psi) if psi < 700.0 else math.inf
    return Cumulants(phi, psi, mean, var, gamma * mean - psi)


def r_infinity(spec: ProgenySpec) -> float:
    """``lim R(gamma) = -ln(m P(xi = v_max))``."""
    return -math.log(spec.m * spec.probs[-1])


def _bracket(fn, lo: float = 0.0, hi: float = 1.0):
    while fn(hi) <= 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > 1e6:
            raise NoCriticalTilt("root bracket search diverged")
    return lo, hi


def solve_critical_gamma(spec: ProgenySpec) -> float:
    """Positive root of ``R(gamma) = 0`` by bisection."""
    if r_infinity(spec) <= 0.0:
        raise NoCriticalTilt(
            f"lim R = {r_infinity(spec):.6g} <= 0: no tilt reduces this walk to the critical case"
        )
    fn = lambda g: cumulants(spec, g).r
    lo, hi = _bracket(fn)
    return bisect(fn, lo, hi, xtol=ROOT_XTOL, maxiter=500)


def reduce_to_critical(spec: ProgenySpec) -> ProgenySpec:
    """Apply ``V -> gamma V - Psi(gamma)`` per generation at the critical ``gamma``."""
    gamma = solve_critical_gamma(spec)
    psi = cumulants(spec, gamma).psi
    return ProgenySpec(
        spec.m,
        tuple(gamma * v - psi for v in spec.support),
        spec.probs,
        tilt=(gamma, psi),
    )


def tilt_identities(spec: ProgenySpec) -> tuple[float, float]:
    """``E sum e^V`` and ``E sum V e^V`` for one generation."""
    v = np.asarray(spec.support)
    w = spec.m * np.asarray(spec.probs) * np.exp(v)
    return math.fsum(w), math.fsum(w * v)


def is_lattice(support, max_den: int = 10_000, tol: float = 1e-9) -> bool:
    """True when every support point lies in ``a + d Z`` for some ``d > 0``.

    Gaps are compared against the first gap and accepted as commensurable
    when their ratio is a fraction with denominator ``<= max_den``.
    """
    pts = sorted(float(s) for s in support)
    gaps = [s - pts[0] for s in pts[1:]]
    if not gaps:
        return True
    base = gaps[0]
    for gap in gaps[1:]:
        ratio = gap / base
        frac = Fraction(ratio).limit_denominator(max_den)
        if abs(float(frac) - ratio) > tol * max(1.0, abs(ratio)):
            return False
    return True


def check_aidekon(spec: ProgenySpec) -> dict:
    """Evaluate the hypotheses of the non-lattice Gumbel limit theorem.

    The first two conditions are tested on the walk as given; for a walk that
    is not yet normalized, run it through :func:`reduce_to_critical` first.
    """
    total, drift = tilt_identities(spec)
    v = np.asarray(spec.support)
    w = spec.m * np.asarray(spec.probs) * np.exp(v)
    second = math.fsum(w * v * v)
    lattice = is_lattice(spec.support)
    supercritical = spec.m > 1
    critical = abs(total - 1.0) < IDENTITY_TOL and abs(drift) < IDENTITY_TOL
    # finite support: X and X~ are bounded, so every moment is finite
    moments_finite = math.isfinite(second)
    return {
        "supercritical": supercritical,
        "critical_mean_shift": critical,
        "moments_finite": moments_finite,
        "lattice": lattice,
        "gumbel_limit_applicable": supercritical and critical and moments_finite and not lattice,
        "e_sum_exp_v": total,
        "e_sum_v_exp_v": drift,
        "e_sum_v2_exp_v": second,
    }


class Drift(NamedTuple):
    rho01: float
    speed_pm1: float


def bdrift_log_residual(rho: float, p: float) -> float:
    """``ln 2 - [rho ln(rho/p) + (1-rho) ln((1-rho)/q)]``, decreasing in ``rho``."""
    q = 1.0 - p
    rate = xlogy(rho, rho / p) + xlogy(1.0 - rho, (1.0 - rho) / q)
    return math.log(2.0) - float(rate)


def bdrift_residual(rho: float, p: float) -> float:
    """``2 p^rho q^(1-rho) - rho^rho (1-rho)^(1-rho)``."""
    q = 1.0 - p
    lhs = 2.0 * p**rho * q ** (1.0 - rho)
    rhs = rho**rho * (1.0 - rho) ** (1.0 - rho)
    return lhs - rhs


def solve_bdrift(p: float) -> Drift:
    """Root ``rho`` in ``(p, 1)`` of the drift equation and the +-1 speed ``2 rho - 1``.

    ``rho`` is the speed of the maximum of ``2^n`` sums of {0,1} steps with
    ``P(1) = p``; the same walk on +-1 steps moves at ``2 rho - 1``.
    """
    p = float(p)
    if not 0.0 < p < 0.5:
        raise DomainError(f"drift equation requires p<1/2 (got p={p})")
    fn = lambda r: bdrift_log_residual(r, p)
    rho = bisect(fn, p, 1.0, xtol=ROOT_XTOL, maxiter=500)
    return Drift(rho, 2.0 * rho - 1.0)
