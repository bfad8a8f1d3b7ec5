"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Both backends run the same workloads through the public analysis API and
must produce identical results; the script exits non-zero if they differ.
"""

import argparse
import sys
import time

import numpy as np

from crlflood import kernels
from crlflood.analysis import fluid_integrate, proportional_fluid_integrate, simulate_chain

WORKLOADS = {
    "chain k=2000 d=31": lambda: simulate_chain(2000, 3, 0.05, 31, 7).decoded_at,
    "chain k=10000 d=6": lambda: simulate_chain(10_000, 3, 0.0, 6, 7).decoded_at,
    "fluid M=3 20 rounds": lambda: fluid_integrate(3, 21, 1e3, 1e-3, max_rounds=20).crossings,
    "proportional 20 rounds": lambda: proportional_fluid_integrate(21, 1e3, 1e-3, max_rounds=20).crossings,
}


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    p = argparse.ArgumentParser()
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    found = kernels.backends()
    if "compiled" not in found:
        print("compiled extension not built; run pip install -e . --no-build-isolation")
        return 1
    saved = kernels.impl
    mismatch = False
    print(f"{'workload':26s} {'python s':>10s} {'compiled s':>11s} {'speedup':>8s}")
    try:
        for name, fn in WORKLOADS.items():
            kernels.impl = found["python"]
            tp, outp = best_of(fn, args.repeat)
            kernels.impl = found["compiled"]
            tc, outc = best_of(fn, args.repeat)
            same = np.array_equal(np.asarray(outp), np.asarray(outc))
            mismatch |= not same
            print(f"{name:26s} {tp:10.4f} {tc:11.4f} {tp / tc:7.1f}x{'' if same else '  MISMATCH'}")
    finally:
        kernels.impl = saved
    return 1 if mismatch else 0


if __name__ == "__main__":
    sys.exit(main())
