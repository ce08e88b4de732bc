"""Time the numba and pure-numpy versions of each hot kernel.

    python3 benchmarks/bench_kernels.py
"""

import timeit

import numpy as np

from helixmax import _kernels


def tail_case(fn, steps=2000):
    def go():
        F, C = np.zeros(steps + 4), np.ones(steps + 4)
        F[0], C[0] = 1.0, 0.0
        fn(F, C, 1, 0, 0.5, 0.5, steps, 1e-300)

    return go


def joint_case(fn, n=40, k=16):
    rng = np.random.default_rng(0)
    J = rng.random((n, k))
    J /= J.sum()
    return lambda: fn(J, 0.5, 0.5)


def conv_case(fn, size=400):
    a = np.log(np.random.default_rng(1).random(size))
    return lambda: fn(a, a)


CASES = {
    "tail_advance (2000 steps)": (tail_case, "_tail_advance"),
    "joint_step (40x16)": (joint_case, "_joint_step"),
    "log_convolve (400x400)": (conv_case, "_log_convolve"),
}


def main():
    print(f"{'kernel':28s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for label, (make, base) in CASES.items():
        times = []
        for suffix in ("_nb", "_np"):
            run = make(getattr(_kernels, base + suffix))
            run()  # compile / warm up
            reps, total = timeit.Timer(run).autorange()
            times.append(1e3 * total / reps)
        print(f"{label:28s} {times[0]:10.3f} {times[1]:10.3f} {times[1] / times[0]:8.1f}x")


if __name__ == "__main__":
    main()
