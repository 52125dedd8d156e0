"""Benchmark the JIT kernels against the pure-numpy fallback.

Runs each workload in two child interpreters (one per backend) so the
environment flag takes effect at import time, then prints a comparison
table.  Usage:

    python benchmarks/bench_backends.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json, sys, time
import numpy as np
from nahmkn import backend, kempfness, kernels, liecore

repeat = int(sys.argv[1])
t = liecore.su2_basis()
x = np.ascontiguousarray(0.8 * t)
dirs = np.zeros((3, 3, 2, 2), dtype=np.complex128)
for i in range(3):
    dirs[i, 0] = t[i]
prob = kempfness.torus_problem([[1, 2], [1, -2]], [2, 1])

def timed(fn, *args):
    fn(*args)  # warm (JIT compile on the numba side)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best

results = {"backend": backend.backend_name()}
results["reduced_flow_1024"] = timed(kernels.reduced_flow, x, 1024, 1e6)
results["chart_flow_1024"] = timed(
    kernels.chart_flow, np.ascontiguousarray(0.5 * t[2]), x, 1024)
results["chart_h_flow_m3_1024"] = timed(kernels.chart_h_flow, x, dirs, 1024)
results["kn_classify"] = timed(
    lambda: kempfness.kn_minimize(prob, [1.0, 1.0]))
json.dump(results, sys.stdout)
"""


def run_backend(pure, repeat):
    env = dict(os.environ)
    if pure:
        env["NAHMKN_PURE_NUMPY"] = "1"
    else:
        env.pop("NAHMKN_PURE_NUMPY", None)
    out = subprocess.run(
        [sys.executable, "-c", _WORKER, str(repeat)],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(out.stdout)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    print("running numba backend...")
    jit = run_backend(pure=False, repeat=args.repeat)
    print("running pure-numpy backend (slow)...")
    pure = run_backend(pure=True, repeat=args.repeat)

    keys = [k for k in jit if k != "backend"]
    width = max(len(k) for k in keys)
    print(f"\n{'workload':<{width}}  {'numba':>10}  {'numpy':>10}  {'speedup':>8}")
    for k in keys:
        ratio = pure[k] / jit[k]
        print(f"{k:<{width}}  {jit[k] * 1e3:>8.2f}ms  {pure[k] * 1e3:>8.2f}ms  "
              f"{ratio:>7.1f}x")


if __name__ == "__main__":
    main()
