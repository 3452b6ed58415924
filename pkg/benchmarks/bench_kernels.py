"""Time the numba kernels against their numpy fallbacks.

Each backend runs in its own subprocess because the backend is fixed at
import time by SLAPROV_BACKEND.  Usage::

    python3 benchmarks/bench_kernels.py [--repeat 3] [--quick]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def worker(repeat: int, quick: bool) -> dict:
    import numpy as np

    from slaprov import kernels, queueing
    from slaprov._accel import backend_name
    from slaprov.oracles import mmn_stationary_cdf

    n, u, K = (5, 0.8, 20) if quick else (10, 0.9, 50)
    a = n * u
    J, ncap, _ = queueing._truncation(n, a, K)
    xs = queueing.X_GRID
    cdf, sigma = mmn_stationary_cdf(n, a)
    reps = 2000 if quick else 20000

    cases = {
        "tick_table": lambda: kernels.tick_table(n, a, K, J, ncap),
        "tail_grid": None,
        "stationary_block_waits": lambda: kernels.stationary_block_waits(n, a, 1.0, K, reps, 7, cdf, sigma),
        "exact_tail_table": lambda: queueing.exact_tail_table(n, a, K),
    }
    P = kernels.tick_table(n, a, K, J, ncap)
    cases["tail_grid"] = lambda: kernels.tail_grid(P, a + n, xs)

    out = {"backend": backend_name(), "n": n, "util": u, "K": K, "cases": {}}
    for name, fn in cases.items():
        t0 = time.perf_counter()
        fn()  # first call includes JIT compilation or cache load
        first = time.perf_counter() - t0
        out["cases"][name] = {"first": first, "best": _best(fn, repeat)}
    out["checksum"] = float(np.asarray(queueing.exact_tail_table(n, a, K)).sum())
    return out


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true")
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()
    if args.worker:
        print(json.dumps(worker(args.repeat, args.quick)))
        return 0

    results = {}
    for backend in ("numba", "numpy"):
        env = dict(os.environ, SLAPROV_BACKEND=backend)
        env.pop("SLAPROV_TABLE_CACHE", None)
        cmd = [sys.executable, __file__, "--worker", "--repeat", str(args.repeat)] + (["--quick"] if args.quick else [])
        proc = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
        results[backend] = json.loads(proc.stdout.strip().splitlines()[-1])

    nb, npy = results["numba"], results["numpy"]
    print(f"M/M/{nb['n']} at utilization {nb['util']}, block length {nb['K']}, best of {args.repeat}")
    print(f"{'kernel':24s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s} {'numba 1st':>10s}")
    for name in nb["cases"]:
        a, b = nb["cases"][name], npy["cases"][name]
        print(f"{name:24s} {a['best']:10.4f} {b['best']:10.4f} {b['best'] / a['best']:8.1f} {a['first']:10.3f}")
    rel = abs(nb["checksum"] - npy["checksum"]) / max(abs(npy["checksum"]), 1e-300)
    print(f"table checksum relative difference: {rel:.2e}")
    return 0 if rel < 1e-9 else 1


if __name__ == "__main__":
    sys.exit(main())
