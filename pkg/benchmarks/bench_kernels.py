"""Time the numba kernels against their numpy counterparts.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Both variants are imported from ``wolffkit.kernels`` directly, so the
comparison does not depend on ``WOLFFKIT_BACKEND``.
"""
import argparse
import time

import numpy as np

from wolffkit import kernels


def best_of(fn, repeat):
    fn()  # warm-up (triggers compilation for the jitted variant)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def first(out):
    return np.asarray(out[0] if isinstance(out, tuple) else out)


def cases(rng):
    nb, nr = 200, 2000
    centers = rng.uniform(-1, 1, size=(nb, 3))
    radii = rng.uniform(0.01, 0.1, size=nb)
    heights = rng.uniform(0.5, 2.0, size=nb)
    x = np.zeros(3)
    r = np.geomspace(1e-4, 3.0, nr)
    yield "bump_ball_mass (200 bumps x 2000 radii)", \
        lambda k: k.bump_ball_mass_numba(centers, radii, heights, x, r), \
        lambda k: k.bump_ball_mass_numpy(centers, radii, heights, x, r)

    n = 100_000
    xg = np.linspace(0, 1, n)
    u = np.sin(np.pi * xg) + 0.1 * rng.standard_normal(n)
    w = np.ones(n - 1)
    yield f"flux_divergence (n={n}, p=3)", \
        lambda k: k.flux_divergence_numba(xg, u, w, w, 3.0, 1e-6), \
        lambda k: k.flux_divergence_numpy(xg, u, w, w, 3.0, 1e-6)

    lower = -np.ones(n)
    upper = -np.ones(n)
    diag = np.full(n, 4.0)
    rhs = rng.standard_normal(n)
    yield f"thomas (n={n})", \
        lambda k: k.thomas_numba(lower, diag, upper, rhs), \
        lambda k: k.thomas_numpy(lower, diag, upper, rhs)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        print("numba not installed; only the numpy path is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':45s} {'numba [ms]':>12s} {'numpy [ms]':>12s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, fast, ref in cases(rng):
        t_ref = best_of(lambda: ref(kernels), args.repeat)
        a = first(ref(kernels))
        if kernels.HAVE_NUMBA:
            t_fast = best_of(lambda: fast(kernels), args.repeat)
            diff = float(np.max(np.abs(a - first(fast(kernels)))))
            print(f"{name:45s} {1e3 * t_fast:12.3f} {1e3 * t_ref:12.3f} {t_ref / t_fast:8.1f} {diff:11.2e}")
        else:
            print(f"{name:45s} {'-':>12s} {1e3 * t_ref:12.3f} {'-':>8s} {'-':>11s}")


if __name__ == "__main__":
    main()
