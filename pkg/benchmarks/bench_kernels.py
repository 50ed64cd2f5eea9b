"""Compare the numba and numpy kernels on realistic block sizes.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5]

Each kernel is run once to trigger compilation, then timed ``--repeat``
times; the best time is reported.  The script also checks that both
backends produce bit-identical normal draws.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from compressed_pca import _accel, seeding


def best_of(fn, repeat: int) -> float:
    fn()
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; install the 'accel' extra to compare backends")

    rng = np.random.default_rng(0)
    cases = []
    for rows, cols in [(256, 500), (256, 5000), (10000, 500)]:
        keys = seeding.derive_keys(seeding.derive_key(1), np.arange(rows))
        a = _accel.normal_rows_numpy(keys, cols)
        b = _accel.normal_rows_numba(keys, cols)
        assert np.array_equal(a, b), "backends disagree"
        cases.append((
            f"normal_rows {rows}x{cols}",
            best_of(lambda: _accel.normal_rows_numpy(keys, cols), args.repeat),
            best_of(lambda: _accel.normal_rows_numba(keys, cols), args.repeat),
        ))
    for rows, p, k in [(256, 500, 6), (256, 500, 30), (1000, 2500, 30)]:
        y = rng.standard_normal((rows, p))
        basis, _ = np.linalg.qr(rng.standard_normal((p, k)))
        cases.append((
            f"residual_norms {rows}x{p} k={k}",
            best_of(lambda: _accel.residual_norms_numpy(y, basis), args.repeat),
            best_of(lambda: _accel.residual_norms_numba(y, basis), args.repeat),
        ))

    print(f"{'kernel':<32}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}")
    for name, t_np, t_nb in cases:
        print(f"{name:<32}{1e3 * t_np:>12.3f}{1e3 * t_nb:>12.3f}{t_np / t_nb:>10.2f}")


if __name__ == "__main__":
    main()
