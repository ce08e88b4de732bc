"""Inner loops: tail recursion, joint (max, count) recursion, log-space convolution.

Every kernel exists twice, a numba loop (``*_nb``) and a vectorized numpy
version (``*_np``).  The public names at the bottom pick one according to
:mod:`helixmax._accel`.  Both tail kernels perform the same IEEE operations in
the same order, so they agree bit for bit.
"""

import numpy as np
from scipy.special import logsumexp

from ._accel import njit, select


# -- tail recursion ---------------------------------------------------------
#
# Arrays are indexed by x; index 0 is x = 0 with F = 1, C = 0.  Cells above
# ``hi`` hold F = 0, C = 1.  Cells below ``lo`` hold exactly F = 1, C = 0 and
# stay frozen because their update reads only zeros of C.  Complements under
# the prune floor are flushed to zero, mirroring the pruning of F on the right.
#
# Each cell is advanced twice: in F-space ``t**2`` and in complement space
# ``u * (2 - u)``; whichever result is <= 1/2 is kept.  Carrying only F makes
# the recursion stall at a spurious fixed point one ulp below 1 when p < 1/2.


@njit
def _tail_advance_nb(F, C, lo, hi, p, q, steps, floor):
    ops = 0
    for _ in range(steps):
        top = hi + 1
        for x in range(top, lo - 1, -1):
            t = p * F[x] + q * F[x - 1]
            u = p * C[x] + q * C[x - 1]
            ft = t * t
            if ft <= 0.5:
                F[x] = ft
                C[x] = 1.0 - ft
            else:
                c = u * (2.0 - u)
                C[x] = c
                F[x] = 1.0 - c
        ops += top - lo + 1
        hi = top
        while hi >= 1 and F[hi] < floor:
            F[hi] = 0.0
            C[hi] = 1.0
            hi -= 1
        while lo <= hi and C[lo] < floor:
            C[lo] = 0.0
            F[lo] = 1.0
            lo += 1
    return lo, hi, ops


def _tail_advance_np(F, C, lo, hi, p, q, steps, floor):
    ops = 0
    for _ in range(steps):
        top = hi + 1
        cur = slice(lo, top + 1)
        prev = slice(lo - 1, top)
        t = p * F[cur] + q * F[prev]
        u = p * C[cur] + q * C[prev]
        ft = t * t
        cu = u * (2.0 - u)
        keep_f = ft <= 0.5
        F[cur] = np.where(keep_f, ft, 1.0 - cu)
        C[cur] = np.where(keep_f, 1.0 - ft, cu)
        ops += top - lo + 1
        hi = top
        while hi >= 1 and F[hi] < floor:
            F[hi] = 0.0
            C[hi] = 1.0
            hi -= 1
        while lo <= hi and C[lo] < floor:
            C[lo] = 0.0
            F[lo] = 1.0
            lo += 1
    return lo, hi, ops


# -- joint law of (M', min(K, k_max)) ----------------------------------------


@njit
def _joint_step_nb(J, p, q):
    X, K = J.shape
    A = np.zeros((X + 1, K))
    for y in range(X + 1):
        for k in range(K):
            a = 0.0
            if y < X:
                a += p * J[y, k]
            if y >= 1:
                a += q * J[y - 1, k]
            A[y, k] = a
    S = np.zeros(X + 2)
    for y in range(X, -1, -1):
        row = 0.0
        for k in range(K):
            row += A[y, k]
        S[y] = S[y + 1] + row
    out = np.zeros((X + 1, K))
    for y in range(X + 1):
        for k in range(K):
            out[y, k] = 2.0 * A[y, k] * S[y + 1]
        for k1 in range(K):
            a1 = A[y, k1]
            if a1 == 0.0:
                continue
            for k2 in range(K):
                idx = k1 + k2 + 1
                if idx > K - 1:
                    idx = K - 1
                out[y, idx] += a1 * A[y, k2]
    return out


def _joint_step_np(J, p, q):
    X, K = J.shape
    A = np.zeros((X + 1, K))
    A[:X] += p * J
    A[1:] += q * J
    rows = A.sum(axis=1)
    S = np.concatenate((np.cumsum(rows[::-1])[::-1], [0.0]))
    out = 2.0 * A * S[1:, None]
    conv = np.zeros((X + 1, 2 * K))
    for k1 in range(K):
        conv[:, k1 + 1 : k1 + 1 + K] += A[:, k1 : k1 + 1] * A
    conv[:, K - 1] += conv[:, K:].sum(axis=1)
    out += conv[:, :K]
    return out


# -- log-space convolution ----------------------------------------------------


@njit
def _log_convolve_nb(a, b):
    na, nb = a.shape[0], b.shape[0]
    out = np.empty(na + nb - 1)
    for k in range(na + nb - 1):
        j0 = max(0, k - nb + 1)
        j1 = min(na - 1, k)
        m = -np.inf
        for j in range(j0, j1 + 1):
            v = a[j] + b[k - j]
            if v > m:
                m = v
        if m == -np.inf:
            out[k] = -np.inf
            continue
        s = 0.0
        for j in range(j0, j1 + 1):
            s += np.exp(a[j] + b[k - j] - m)
        out[k] = m + np.log(s)
    return out


def _log_convolve_np(a, b):
    na, nb = a.shape[0], b.shape[0]
    k = np.arange(na + nb - 1)
    j = np.arange(na)[:, None]
    idx = k[None, :] - j
    valid = (idx >= 0) & (idx < nb)
    terms = np.where(valid, a[:, None] + b[np.clip(idx, 0, nb - 1)], -np.inf)
    with np.errstate(invalid="ignore"):
        return logsumexp(terms, axis=0)


tail_advance = select(_tail_advance_nb, _tail_advance_np)
joint_step = select(_joint_step_nb, _joint_step_np)
log_convolve = select(_log_convolve_nb, _log_convolve_np)
