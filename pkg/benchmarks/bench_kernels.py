"""Time the numba kernels against the numpy fallback on a 145x145x220 cube.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Kernel timings call both implementations directly; the end-to-end row runs
``detect`` in a subprocess per backend (the backend is fixed at import).
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from badband import _kernels as k

DETECT_SNIPPET = """
import time, numpy as np
from badband import _kernels, detect
from badband.synth import SyntheticSpec, gen_injected_cube
spec = SyntheticSpec.from_dict({"lines": 145, "samples": 145, "bands": 220, "seed": 3,
                                "faults": [{"bands": [100, 110], "kind": "pure_noise"}]})
cube, _ = gen_injected_cube(spec)
detect(cube, 1.5, M=10, seed=1)
best = min(
    (lambda t0: (detect(cube, 1.5, M=1000, seed=1), time.perf_counter() - t0)[1])(time.perf_counter())
    for _ in range({repeat})
)
print(_kernels.BACKEND, best)
"""


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rs = np.random.default_rng(0)
    L, n = 220, 145 * 145
    x = rs.standard_normal((L, n))
    w = rs.standard_normal(L)
    edges = k.block_bounds(n)
    draws = rs.integers(0, 2**63, 1000, dtype=np.uint64)

    rows = [
        ("band_stats", lambda: k.band_stats_numpy(x), lambda: k.band_stats_numba(x)),
        ("covariance_sum", lambda: k.covariance_sum_numpy(x, edges), lambda: k.covariance_sum_numba(x, edges)),
        ("apply_pixels", lambda: k.apply_pixels_numpy(w, x), lambda: k.apply_pixels_numba(w, x)),
        ("partial_shuffle", lambda: k.partial_shuffle_numpy(n, draws), lambda: k.partial_shuffle_numba(n, draws)),
    ]
    print(f"cube {L} bands x {n} pixels, best of {args.repeat}")
    print(f"{'kernel':<18}{'numpy s':>12}{'numba s':>12}")
    for name, np_fn, nb_fn in rows:
        t_np = best_of(np_fn, args.repeat)
        t_nb = best_of(nb_fn, args.repeat) if k.HAVE_NUMBA else float("nan")
        print(f"{name:<18}{t_np:>12.4f}{t_nb:>12.4f}")

    code = DETECT_SNIPPET.replace("{repeat}", str(args.repeat))
    for flag in ("1", "0"):
        env = dict(os.environ, BADBAND_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        backend, secs = out.stdout.split()
        print(f"detect M=1000 ({backend}): {float(secs):.3f} s")


if __name__ == "__main__":
    main()
