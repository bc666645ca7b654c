"""Throughput benchmark: compiled window stepper vs the pure-Python one.

Both engines step identical rolling-contact windows; the printed checksums
must agree exactly (they share bit-identical semantics).  Run with

    python3 benchmarks/bench_sim.py [--windows 2000] [--substeps 50]
"""
import argparse
import time

import numpy as np

from sphereguide import scene, sim
from sphereguide.simcore import pystep

try:
    from sphereguide.simcore import _kernel
except ImportError:
    _kernel = None


def make_start(spec):
    s = np.array([0.34, 0.5, 0.08, 0.5, 0.5, 0.08])
    return scene.DynState.at_rest(s).to_array()


def bench(step_fn, start, coefs, pack, substeps):
    arr = start.copy()
    t0 = time.perf_counter()
    for coef in coefs:
        arr, diverged = step_fn(arr, coef, pack, substeps)
        if diverged:
            raise RuntimeError("benchmark trajectory diverged")
    elapsed = time.perf_counter() - t0
    return elapsed, arr


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--windows", type=int, default=2000)
    ap.add_argument("--substeps", type=int, default=50)
    args = ap.parse_args()

    spec = scene.default_scene()
    params = sim.SimParams(substeps=args.substeps)
    pack = sim.build_pack(spec, params)
    start = make_start(spec)

    # small pushes that keep the robot rolling against the object
    rng = np.random.default_rng(0)
    coefs = 0.5 * rng.uniform(-1.0, 1.0, size=(args.windows, 3))

    t_pure, end_pure = bench(pystep.run_window, start, coefs, pack,
                             args.substeps)
    rate_pure = args.windows / t_pure
    print(f"pure python : {t_pure:8.3f} s  "
          f"({rate_pure:8.0f} windows/s, checksum {end_pure.sum():+.12f})")

    if _kernel is None:
        print("compiled    : extension not built")
        return

    t_comp, end_comp = bench(_kernel.run_window, start, coefs, pack,
                             args.substeps)
    rate_comp = args.windows / t_comp
    print(f"compiled    : {t_comp:8.3f} s  "
          f"({rate_comp:8.0f} windows/s, checksum {end_comp.sum():+.12f})")
    print(f"speedup     : {t_pure / t_comp:8.1f}x")
    if not np.array_equal(end_pure, end_comp):
        raise SystemExit("checksum mismatch: engines disagree")
    print("engines agree bit for bit")


if __name__ == "__main__":
    main()
