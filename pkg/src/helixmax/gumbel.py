"""Maxima of 2^n independent lattice sums: Gumbel helix parameters and exact checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import bisect
from scipy.special import logsumexp

from . import _kernels
from .core import DomainError, LatticePmf, check_budget
from .criticality import solve_bdrift

MAX_LEVEL = 1024
ROOT_XTOL = 1e-12
LN2 = math.log(2.0)


class NoSolution(DomainError):
    """The Gumbel centering equation has no root for this step law."""


@dataclass(frozen=True)
class SumScheme:
    step: LatticePmf
    omega: int
    condition_class: str  # "(i)", "(ii)" or "violated"

    @property
    def solvable(self) -> bool:
        return self.condition_class != "violated"


def classify(step: LatticePmf) -> SumScheme:
    """Finite support never has ``omega = inf``, so the class is (ii) or violated."""
    p_top = step.probs[-1]
    return SumScheme(step, step.omega, "(ii)" if p_top < 0.5 else "violated")


def _cgf(step: LatticePmf, gamma: float) -> tuple[float, float, float]:
    """``L, L', L''`` of the step at ``gamma``."""
    v = np.asarray(step.support, dtype=np.float64)
    logw = gamma * v + np.log(step.probs)
    lse = float(logsumexp(logw))
    w = np.exp(logw - lse)
    mean = float(np.dot(w, v))
    return lse, mean, float(np.dot(w, (v - mean) ** 2))


def gammastar_residual(step: LatticePmf, gamma: float) -> float:
    """``L(gamma) - gamma L'(gamma) - ln(1/2)``."""
    L, dL, _ = _cgf(step, gamma)
    return L - gamma * dL + LN2


@dataclass(frozen=True)
class GumbelHelixParams:
    gamma: float
    rho: float
    sigma: float
    span: int = 1

    def a_n(self, n: int) -> float:
        """Helix position of ``M_n``.

        ``rho n - ln[sqrt(2 pi n) sigma (1 - e^-gamma)] / gamma`` for unit span;
        for span ``h`` the local-limit factor becomes ``(1 - e^{-gamma h}) / h``.
        """
        h = self.span
        scale = math.sqrt(2.0 * math.pi * n) * self.sigma * (1.0 - math.exp(-self.gamma * h)) / h
        return self.rho * n - math.log(scale) / self.gamma

    def center(self, n: int) -> float:
        """``rho n - ln n / (2 gamma)``, the origin of ``z``."""
        return self.rho * n - math.log(n) / (2.0 * self.gamma)

    def as_json(self) -> dict:
        return {"gamma_star": self.gamma, "rho_star": self.rho, "sigma": self.sigma, "span": self.span}


def solve_gamma_star(scheme: SumScheme) -> GumbelHelixParams:
    """Unique positive root of ``L(gamma) - gamma L'(gamma) = ln(1/2)``."""
    if not scheme.solvable:
        raise NoSolution(
            f"P(xi = omega) = {scheme.step.probs[-1]:.6g} >= 1/2: the centering equation has no solution"
        )
    fn = lambda g: -gammastar_residual(scheme.step, g)
    hi = 1.0
    while fn(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e6:
            raise NoSolution("bracket search diverged")
    gamma = bisect(fn, 0.0, hi, xtol=ROOT_XTOL, maxiter=500)
    _, rho, var = _cgf(scheme.step, gamma)
    return GumbelHelixParams(gamma, rho, math.sqrt(var), scheme.step.span)


def bernoulli_kappa_beta(p: float) -> tuple[float, float]:
    """``kappa = p(1-rho)/(q rho)`` and ``beta = 2 pi rho (1-rho)`` with ``rho`` from the drift equation."""
    if not 0.0 < p < 0.5:
        raise DomainError(f"requires 0 < p < 1/2 (got p={p})")
    rho = solve_bdrift(p).rho01
    q = 1.0 - p
    return p * (1.0 - rho) / (q * rho), 2.0 * math.pi * rho * (1.0 - rho)


def helix_gumbel_log(a: float, m, gamma: float):
    """``ln F^a(m) = -exp(-gamma (m - a))``.

    The offset is split into integer and fractional parts of ``a`` so that
    shifting ``a`` and ``m`` by the same integer leaves the argument unchanged.
    """
    fl = math.floor(a)
    t = (np.asarray(m, dtype=np.float64) - fl) - (a - fl)
    with np.errstate(over="ignore"):
        out = -np.exp(-gamma * t)
    return float(out) if np.ndim(out) == 0 else out


def helix_gumbel(a: float, m, gamma: float):
    """``exp(-exp(-gamma (m - a)))``, read as ``P(M <= m)`` of the helix element."""
    if gamma <= 0.0:
        raise DomainError("gamma must be positive")
    out = np.exp(helix_gumbel_log(a, m, gamma))
    return float(out) if np.ndim(out) == 0 else out


@lru_cache(maxsize=64)
def sum_log_pmf(step: LatticePmf, n: int) -> tuple[int, int, np.ndarray]:
    """Log pmf of ``S_n`` on its lattice ``offset + span * j`` by repeated squaring."""
    h = step.span or 1
    base = np.full((step.omega - step.lo) // h + 1, -np.inf)
    for s, w in zip(step.support, step.probs):
        base[(s - step.lo) // h] = math.log(w)
    acc = np.zeros(1)
    k = n
    while k:
        if k & 1:
            acc = _kernels.log_convolve(acc, base)
        k >>= 1
        if k:
            base = _kernels.log_convolve(base, base)
    acc.setflags(write=False)
    return n * step.lo, h, acc


def log_tail(step: LatticePmf, n: int, m: float) -> float:
    """``ln P(S_n >= m)``, accumulated with an exactly rounded sum."""
    offset, h, lp = sum_log_pmf(step, n)
    j0 = max(0, math.ceil((m - offset) / h))
    if j0 >= lp.size:
        return -math.inf
    tail = lp[j0:]
    top = float(tail.max())
    if top == -math.inf:
        return -math.inf
    return top + math.log(math.fsum(np.exp(tail - top)))


def _log1mexp(x: float) -> float:
    """``ln(1 - e^x)`` for ``x <= 0``."""
    if x == 0.0:
        return -math.inf
    if x > -LN2:
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))


def _check_level(n: int) -> None:
    if n < 1 or n > MAX_LEVEL:
        raise DomainError(f"n must lie in [1, {MAX_LEVEL}]")


def exact_max_cdf(scheme: SumScheme, n: int, m: float) -> float:
    """``ln P(M_n < m) = 2^n ln(1 - P(S_n >= m))``; ``-inf`` when the tail rounds to 1."""
    _check_level(n)
    check_budget(float(n) * (scheme.step.omega - scheme.step.lo + 1) * n, "exact_max_cdf")
    lt = log_tail(scheme.step, n, m)
    if lt == -math.inf:
        return 0.0
    l1m = _log1mexp(min(lt, 0.0))
    if l1m == -math.inf:
        return -math.inf
    with np.errstate(over="ignore"):
        return float(-np.exp(n * LN2 + math.log(-l1m)))


def exact_max_log_neglog(scheme: SumScheme, n: int, m: float) -> float:
    """``ln(-ln P(M_n < m))`` without forming ``2^n``."""
    _check_level(n)
    lt = log_tail(scheme.step, n, m)
    if lt == -math.inf:
        return -math.inf
    if lt < -20.0:
        # -ln(1 - T) = T (1 + T/2 + ...), T < 2e-9
        t = math.exp(lt)
        return n * LN2 + lt + math.log1p(t / 2.0 + t * t / 3.0)
    l1m = _log1mexp(min(lt, 0.0))
    if l1m == -math.inf:
        return math.inf
    return n * LN2 + math.log(-l1m)


@dataclass(frozen=True)
class BoundRow:
    n: int
    z: float
    m: int
    exact_neglog: float
    asymptotic_neglog: float
    ratio: float
    bernoulli_neglog: float | None = None
    reconciliation: float | None = None
    underflow: bool = False


@dataclass(frozen=True)
class BoundTable:
    params: GumbelHelixParams
    n: int
    interval: tuple
    rows: tuple

    def max_deviation(self) -> float:
        return max(abs(r.ratio - 1.0) for r in self.rows)

    def as_json(self) -> dict:
        return {
            "n": self.n,
            "interval": list(self.interval),
            "params": self.params.as_json(),
            "a_n": self.params.a_n(self.n),
            "max_abs_ratio_minus_1": self.max_deviation(),
            "rows": [r.__dict__ for r in self.rows],
        }


def _is_bernoulli01(step: LatticePmf) -> bool:
    return step.support == (0, 1)


def verify_bound(scheme: SumScheme, n: int, interval=(-3.0, 3.0)) -> BoundTable:
    """Exact ``-ln P(M_n < m)`` against ``exp(-gamma (m - a_n))`` on the lattice.

    ``z = m - rho n + ln n / (2 gamma)``; every lattice point ``m`` of ``S_n``
    whose ``z`` falls in ``interval`` gets a row.  For the {0,1} Bernoulli law
    the table also carries ``kappa^z' / (1 - kappa)`` with its own centering.
    """
    params = solve_gamma_star(scheme)
    _check_level(n)
    zlo, zhi = interval
    offset, h, _ = sum_log_pmf(scheme.step, n)
    c = params.center(n)
    a_n = params.a_n(n)
    j_lo = math.ceil((c + zlo - offset) / h)
    j_hi = math.floor((c + zhi - offset) / h)
    bern = None
    if _is_bernoulli01(scheme.step):
        p = scheme.step.probs[1]
        if p < 0.5:
            kappa, beta = bernoulli_kappa_beta(p)
            rho_b = solve_bdrift(p).rho01
            bern = (kappa, beta, rho_b)
    rows = []
    for j in range(j_lo, j_hi + 1):
        m = offset + h * j
        z = m - c
        lneg = exact_max_log_neglog(scheme, n, m)
        exact = math.exp(lneg) if math.isfinite(lneg) else lneg
        asym = math.exp(-params.gamma * (m - a_n))
        ratio = math.exp(lneg + params.gamma * (m - a_n)) if math.isfinite(lneg) else math.nan
        extra = {}
        if bern is not None:
            kappa, beta, rho_b = bern
            zb = m - rho_b * n + math.log(beta * n) / (2.0 * abs(math.log(kappa)))
            bneg = kappa**zb / (1.0 - kappa)
            extra = {"bernoulli_neglog": bneg, "reconciliation": abs(bneg / asym - 1.0)}
        rows.append(
            BoundRow(n, z, m, exact, asym, ratio, underflow=not math.isfinite(lneg), **extra)
        )
    return BoundTable(params, n, (zlo, zhi), tuple(rows))
