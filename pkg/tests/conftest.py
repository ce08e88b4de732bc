from fractions import Fraction

import pytest


def exact_max_law(n: int, p: Fraction) -> dict:
    """Law of ``M_n`` on the +-1 scale by rational arithmetic, straight from the tree.

    ``M_{k+1} = max(M_k^(1) + B_1, M_k^(2) + B_2)`` with independent copies.
    """
    q = 1 - p
    law = {0: Fraction(1)}
    for _ in range(n):
        shifted = {}
        for m, w in law.items():
            shifted[m + 1] = shifted.get(m + 1, 0) + p * w
            shifted[m - 1] = shifted.get(m - 1, 0) + q * w
        pts = sorted(shifted)
        cdf, acc = {}, Fraction(0)
        for m in pts:
            acc += shifted[m]
            cdf[m] = acc
        new, prev = {}, Fraction(0)
        for m in pts:
            c2 = cdf[m] ** 2
            if c2 != prev:
                new[m] = c2 - prev
            prev = c2
        law = new
    return law


def exact_tail(n: int, p: Fraction) -> list:
    """``F_n(x) = P((n - M_n)/2 >= x)`` for ``x = 1..n`` as fractions."""
    law = exact_max_law(n, p)
    return [sum((w for m, w in law.items() if (n - m) // 2 >= x), Fraction(0)) for x in range(1, n + 1)]


@pytest.fixture
def rational_tail():
    return exact_tail


ACCEPTANCE_LOG: list = []


@pytest.fixture
def acceptance():
    """Record one result line per acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE_LOG.append((number, ok, detail))
        print(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(ACCEPTANCE_LOG):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}")
