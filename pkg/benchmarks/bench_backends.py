"""Compare the numba and pure-numpy backends on the batch summary kernels.

    python benchmarks/bench_backends.py [--paths 2000] [--repeat 3]

Each case is timed after a warm-up call (so numba compilation is excluded)
and the two backends' outputs are compared.
"""

import argparse
import time

import numpy as np

from azema import _backend
from azema.driver import summaries
from azema.rng import SeedSpec
from azema.sampler import AzemaParams
from azema.structure import GeneralParams, parse_structure_fn

CASES = [
    ("beta=-1 n=1e4", lambda: AzemaParams(-1.0, 10_000, seed=SeedSpec(1))),
    ("beta=0 n=1e3", lambda: AzemaParams(0.0, 1_000, seed=SeedSpec(1))),
    ("beta=1 n=100", lambda: AzemaParams(1.0, 100, seed=SeedSpec(1))),
    ("f=cubic n=100", lambda: GeneralParams(parse_structure_fn("cubic"), 100, seed=SeedSpec(1))),
    ("f=linear:-1 n=100", lambda: GeneralParams(parse_structure_fn("linear:-1"), 100, seed=SeedSpec(1))),
]


def best_time(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    print(f"{'case':<20}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max |diff|':>14}")
    for label, make in CASES:
        params = make()
        results = {}
        for name in ("numba", "numpy"):
            _backend.set_backend(name)
            summaries(params, 10, args.workers)  # warm-up / compile
            results[name] = best_time(lambda: summaries(params, args.paths, args.workers), args.repeat)
        _backend.set_backend("numba")
        (tn, a), (tp, b) = results["numba"], results["numpy"]
        diff = float(np.max(np.abs(a - b)))
        print(f"{label:<20}{tn:>12.4f}{tp:>12.4f}{tp / tn:>10.1f}{diff:>14.3g}")


if __name__ == "__main__":
    main()
