"""Benchmark the numba kernel path against the numpy/scipy fallback.

Run as ``python -m treefd.bench [--n 200,400] [--repeat 3]``.  Prices the
American put reference case on both backends, reports wall times and the
largest price discrepancy (expected at solver round-off).
"""

from __future__ import annotations

import argparse
import time

from ._kernels import HAS_NUMBA, available_backends
from .benchmarks_data import AMERICAN_PUT_SET2_PARAMS
from .model import HestonParams
from .pricing import ExerciseStyle, OptionKind, OptionSpec, price


def _case() -> tuple[HestonParams, OptionSpec]:
    base = dict(AMERICAN_PUT_SET2_PARAMS)
    strike, maturity = base.pop("strike"), base.pop("maturity")
    params = HestonParams(**base, s0=10.0)
    spec = OptionSpec(kind=OptionKind.PUT, style=ExerciseStyle.AMERICAN,
                      strike=strike, maturity=maturity)
    return params, spec


def run(n_values, repeat: int) -> None:
    params, spec = _case()
    backends = available_backends()
    if HAS_NUMBA:
        # trigger JIT compilation outside the timed region
        price(params, spec, 10, 16, backend="numba")
    print(f"{'n':>6} | " + " | ".join(f"{b + ' (s)':>12}" for b in backends)
          + " |   max |diff|")
    for n in n_values:
        times = {}
        values = {}
        for backend in backends:
            best = float("inf")
            for _ in range(repeat):
                t0 = time.perf_counter()
                res = price(params, spec, n, n, backend=backend)
                best = min(best, time.perf_counter() - t0)
            times[backend] = best
            values[backend] = res.price
        spread = max(values.values()) - min(values.values())
        print(f"{n:>6} | " + " | ".join(f"{times[b]:>12.3f}" for b in backends)
              + f" | {spread:>12.3e}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", default="100,200,400",
                    help="comma-separated resolutions (n_time = n_space)")
    ap.add_argument("--repeat", type=int, default=3, help="timed repetitions, best-of")
    args = ap.parse_args()
    run([int(s) for s in args.n.split(",")], args.repeat)


if __name__ == "__main__":
    main()
