"""Acceptance criteria, each at its stated tolerance and time limit."""

import time

import numpy as np
import pytest

from helixmax.cli import run
from helixmax.core import G_map, LatticePmf, g_map
from helixmax.criticality import bdrift_log_residual, solve_bdrift
from helixmax.exact import (
    TailEvolver,
    delta_n,
    evolve,
    evolve_levels,
    expected_max,
    fixed_point_supercritical,
    gw_extinction_curve,
    joint_evolve,
)
from helixmax.gumbel import bernoulli_kappa_beta, classify, gammastar_residual, solve_gamma_star, verify_bound
from helixmax.helix import HelixElement, cyclic_distance_curve, find_limit_point, fngg_gaps
from helixmax.mc import dkw_band, simulate_brw


def test_01_map_identities(acceptance):
    t0 = time.perf_counter()
    y = np.linspace(0.0, 1.0, 1000)
    errs = (
        np.abs(G_map(g_map(y)) - y).max(),
        np.abs(g_map(G_map(y)) - y).max(),
        np.abs(g_map(1.0 - y) - (1.0 - G_map(y))).max(),
    )
    dt = time.perf_counter() - t0
    ok = max(errs) < 1e-12 and dt < 1.0
    assert acceptance(1, ok, f"max map identity error {max(errs):.2e} (< 1e-12), {dt:.3f}s (< 1s)")


def test_02_hand_values(acceptance):
    F1, F2 = evolve(1), evolve(2)
    checks = {
        "F_1(1)=1/4": F1(1) == 0.25,
        "F_2(1)=25/64": F2(1) == 25 / 64,
        "F_2(2)=1/64": F2(2) == 1 / 64,
        "F_1(1)=0.16 at p=0.6": abs(evolve(1, 0.6)(1) - 0.16) < 1e-15,
        "E M_2=1.1875": expected_max(F2) == 1.1875,
        "Delta_1=0.15625": delta_n(F1, F2) == 0.15625,
        "joint n=1": joint_evolve(1).joint.as_dict() == {(0, 1): 0.5, (0, 2): 0.25, (1, 2): 0.25},
    }
    bad = [k for k, v in checks.items() if not v]
    assert acceptance(2, not bad, "all hand values exact" if not bad else f"mismatch: {bad}")


def test_03_gw_identity(acceptance):
    t0 = time.perf_counter()
    n_max = 10_000
    q = gw_extinction_curve(n_max)
    ev = TailEvolver(0.5)
    mismatches = 0
    for n in range(1, n_max + 1):
        ev.advance(1)
        mismatches += ev.value(1) != q[n - 1]
    dt = time.perf_counter() - t0
    ok = mismatches == 0 and dt < 10.0
    assert acceptance(3, ok, f"{mismatches} bitwise mismatches for n <= {n_max}, {dt:.2f}s (< 10s)")


def test_04_helix_invariance(acceptance):
    from helixmax.exact import step_window

    worst_step = worst_eq = 0.0
    for v0 in (0.1, 0.2, 0.3, 0.4, 0.5):
        e = HelixElement(0, v0)
        xs = np.arange(-40, 41)
        vals, _ = e.sample(xs)
        stepped = step_window(vals, 0.5)
        shifted, _ = HelixElement(1, g_map(v0)).sample(xs[1:])
        worst_step = max(worst_step, np.abs(stepped - shifted).max())
        worst_eq = max(worst_eq, np.abs(4 * vals[1:] - (vals[1:] + vals[:-1]) ** 2).max())
    ok = worst_step < 1e-12 and worst_eq < 1e-12
    assert acceptance(
        4, ok, f"step residual {worst_step:.2e}, invariance-equation residual {worst_eq:.2e} (< 1e-12)"
    )


def test_05_cyclic_trend(acceptance):
    t0 = time.perf_counter()
    levels = [100, 1000, 10_000]
    pts = cyclic_distance_curve(levels)
    d = [c.d_n for c in pts]
    dl = [c.delta_n for c in pts]
    gaps = [max(fngg_gaps(F)) for F in evolve_levels(levels)]
    dt = time.perf_counter() - t0
    ok = (
        d[0] > d[1] > d[2]
        and d[2] < 0.5 * d[0]
        and dl[0] > dl[1] > dl[2]
        and max(gaps) <= 0.0
        and dt < 120.0
    )
    detail = (
        f"d_n={['%.3e' % v for v in d]}, Delta_n={['%.3e' % v for v in dl]}, "
        f"worst inequality gap {max(gaps):.1e}, {dt:.2f}s"
    )
    assert acceptance(5, ok, detail)


def test_06_limit_points(acceptance):
    t0 = time.perf_counter()
    parts, ok = [], True
    for a in (0.2, 0.4, 0.7):
        rep = find_limit_point(a, count=3)
        d = [e.distance for e in rep.entries]
        ok &= len(d) >= 3 and all(x > y for x, y in zip(d, d[1:]))
        parts.append(f"a={a}: n_k={[e.n_k for e in rep.entries]}")
    dt = time.perf_counter() - t0
    ok &= dt < 300.0
    assert acceptance(6, ok, f"{'; '.join(parts)}; strictly decreasing distances, {dt:.2f}s")


def test_07_supercritical(acceptance):
    ev = TailEvolver(0.6)
    prev = ev.value(1)
    while True:
        ev.advance(1)
        cur = ev.value(1)
        if abs(cur - prev) < 1e-12:
            break
        prev = cur
    gap = abs(cur - 4.0 / 9.0)
    F = fixed_point_supercritical(0.6, 50)
    xs = np.arange(1, 51)
    v, w = F.tail(xs), F.tail(xs - 1)
    resid = np.abs(v - (0.6 * v + 0.4 * w) ** 2).max()
    ok = gap < 1e-10 and resid < 1e-12
    assert acceptance(7, ok, f"|F_{ev.n}(1) - 4/9| = {gap:.2e} (< 1e-10), fixed-point residual {resid:.2e}")


def test_08_drift(acceptance):
    d = solve_bdrift(0.3)
    resid = abs(bdrift_log_residual(d.rho01, 0.3))
    F2000, F4000 = evolve_levels([2000, 4000], 0.3)
    slope = (expected_max(F4000) - expected_max(F2000)) / 2000
    rel = abs(slope / d.speed_pm1 - 1.0)
    rel_alt = abs(slope / d.rho01 - 1.0)
    ok = resid < 1e-10 and rel < 0.01
    detail = (
        f"rho01={d.rho01:.10f}, residual {resid:.1e}; DP slope {slope:.6f} vs 2*rho01-1={d.speed_pm1:.6f} "
        f"(rel {rel:.1e}; vs rho01 itself rel {rel_alt:.2f}) -> +-1 speed is 2*rho01-1"
    )
    assert acceptance(8, ok, detail)


def test_09_gumbel_constants(acceptance):
    worst_k = worst_b = worst_r = 0.0
    for p in (0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45):
        step = LatticePmf.bernoulli01(p)
        params = solve_gamma_star(classify(step))
        kappa, beta = bernoulli_kappa_beta(p)
        worst_k = max(worst_k, abs(kappa - np.exp(-params.gamma)))
        worst_b = max(worst_b, abs(beta - 2 * np.pi * params.sigma**2))
        worst_r = max(worst_r, abs(gammastar_residual(step, params.gamma)))
    ok = worst_k < 1e-9 and worst_b < 1e-9 and worst_r < 1e-10
    assert acceptance(9, ok, f"kappa err {worst_k:.1e}, beta err {worst_b:.1e}, centering residual {worst_r:.1e}")


def test_10_verify_bound(acceptance):
    t0 = time.perf_counter()
    scheme = classify(LatticePmf.bernoulli01(0.3))
    devs = [verify_bound(scheme, n, (-3.0, 3.0)).max_deviation() for n in (128, 256, 512)]
    dt = time.perf_counter() - t0
    ok = devs[0] > devs[1] > devs[2] and devs[2] < 0.25 and dt < 60.0
    assert acceptance(10, ok, f"max|ratio-1| at n=128,256,512: {['%.3f' % v for v in devs]}, {dt:.2f}s")


def test_11_monte_carlo(acceptance):
    t0 = time.perf_counter()
    reps = 100_000
    band = dkw_band(reps, 1e-3)
    parts, ok = [], True
    for p in (0.5, 0.6):
        # simulate_brw asserts the 2**level particle count at every level of every replica
        s = simulate_brw(20, p, seed=2024, replicas=reps)
        xs = np.arange(0, 21)
        gap = np.abs(s.empirical_tail(20, xs) - evolve(20, p).tail(xs)).max()
        ok &= gap <= band
        parts.append(f"p={p}: sup|F^-F|={gap:.4f}")
        if p == 0.5:
            inc = s.increments()[:, 1]
            se = inc.std(ddof=1) / np.sqrt(reps)
            z = abs(inc.mean() - 0.6875) / se
            ok &= z < 3.0
            parts.append(f"mean increment at n=1 {inc.mean():.4f} ({z:.2f} SE)")
    dt = time.perf_counter() - t0
    ok &= dt < 120.0
    assert acceptance(11, ok, f"{'; '.join(parts)}; DKW band {band:.4f}; conservation checked; {dt:.1f}s")


def test_12_reproducibility(acceptance, tmp_path):
    runs = [
        ["simulate", "--n", "20", "--p", "0.5", "--replicas", "5000", "--seed", "99"],
        ["gw", "--n", "50", "--replicas", "2000", "--seed", "5"],
        ["cyclic", "--levels", "10,100"],
        ["verify-bound", "--p", "0.3", "--n", "128"],
    ]
    ok = True
    for i, args in enumerate(runs):
        blobs = []
        for j, extra in enumerate([[], [], ["--workers", "4"]] if args[0] == "simulate" else [[], []]):
            out = tmp_path / f"{i}_{j}.out"
            ok &= run(args + extra + ["--out", str(out)]) == 0
            blobs.append(out.read_bytes())
        ok &= all(b == blobs[0] for b in blobs)
    assert acceptance(12, ok, f"{len(runs)} commands rerun byte-identical, simulate also with 4 workers")
