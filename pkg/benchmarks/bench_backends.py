#!/usr/bin/env python3
"""Benchmark the numba-jitted hot kernels against the pure-numpy fallback.

Kernel microbenchmarks run both implementations in-process; the end-to-end
mode re-runs the schedule-replay verification in subprocesses with
DIFFLIGHT_BACKEND set, since the backend is pinned at import time.

Usage:
    python benchmarks/bench_backends.py            # kernel microbenchmarks
    python benchmarks/bench_backends.py --end-to-end
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from difflight import backend

_E2E_SNIPPET = """
import time
from difflight import backend
from difflight.architecture import ArchConfig
from difflight.devices import Platform
from difflight.replay import verify_schedule
from difflight.scheduler import CompileOptions, compile_schedule
from difflight.workload import preset

graph = preset("sdm-toy")
schedule = compile_schedule(graph, ArchConfig(), Platform(), CompileOptions(True, True, True))
verify_schedule(schedule, graph)  # warm the JIT outside the timed region
t0 = time.perf_counter()
for _ in range(3):
    verify_schedule(schedule, graph)
print(f"{backend.active_backend()}: {(time.perf_counter() - t0) / 3:.3f} s per replay")
"""


def time_call(fn, *args, repeats=5, warmup=1):
    for _ in range(warmup):
        fn(*args)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_im2col():
    rng = np.random.default_rng(0)
    padded = rng.normal(size=(16, 66, 66))
    args = (padded, 3, 3, 1)
    t_np = time_call(backend._im2col_numpy, *args)
    t_nb = time_call(backend._im2col_numba, *args)
    ref = backend._im2col_numpy(*args)
    assert np.allclose(backend._im2col_numba(*args), ref)
    return "im2col 16x66x66 k3", t_np, t_nb


def bench_accumulate():
    rng = np.random.default_rng(1)
    rows, inner, instances = 16, 144, 4096
    weights = rng.normal(size=(rows, inner))
    acts = rng.normal(size=(instances, inner))
    tiles = []
    for g in range(instances):
        for r0 in range(0, rows, 3):
            for c0 in range(0, inner, 12):
                tiles.append((g, r0, min(r0 + 3, rows), c0, min(c0 + 12, inner)))
    gemm, r0, r1, c0, c1 = (np.asarray(col, dtype=np.int64) for col in zip(*tiles))

    def run(impl):
        out = np.zeros((instances, rows))
        impl(weights, acts, gemm, r0, r1, c0, c1, out)
        return out

    t_np = time_call(run, backend._accumulate_tiles_numpy, repeats=3)
    t_nb = time_call(run, backend._accumulate_tiles_numba, repeats=3)
    assert np.allclose(run(backend._accumulate_tiles_numba),
                       run(backend._accumulate_tiles_numpy))
    return f"tile accumulate ({len(tiles)} passes)", t_np, t_nb


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--end-to-end", action="store_true",
                        help="time sdm-toy schedule replay under each backend")
    args = parser.parse_args()

    if args.end_to_end:
        for choice in ("numpy", "numba"):
            env = dict(os.environ, DIFFLIGHT_BACKEND=choice)
            subprocess.run([sys.executable, "-c", _E2E_SNIPPET], env=env, check=True)
        return 0

    print(f"{'kernel':34s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for bench in (bench_im2col, bench_accumulate):
        name, t_np, t_nb = bench()
        print(f"{name:34s} {t_np * 1e3:9.2f}ms {t_nb * 1e3:9.2f}ms {t_np / t_nb:7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
