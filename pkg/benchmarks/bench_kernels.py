"""Time the batch displacement kernel under numba and under the numpy fallback.

Each backend runs in a fresh interpreter (the choice is made at import time
from FREEOUT_NO_NUMBA).  Usage: python3 benchmarks/bench_kernels.py [--points N]
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from freeout import _kernels
from freeout.freegroup import compose
from freeout.generators import whitehead_automorphisms
from freeout.graphs import core_graphs
from freeout.outerspace import MarkedMetricGraph, candidate_matrices

n_points, repeats = int(sys.argv[1]), int(sys.argv[2])
rng = np.random.default_rng(0)
W = whitehead_automorphisms(3).elements
phi = compose(*[W[i] for i in rng.integers(0, len(W), 6)])
g = max(core_graphs(3), key=lambda g: g.num_edges)
spec = MarkedMetricGraph.standard(g).spec
P, Q = (np.asarray(M, dtype=np.float64) for M in candidate_matrices(spec, phi))
L = rng.random((n_points, g.num_edges)) + 0.05
_kernels.ratio_max_batch(P, Q, L[:2])  # compile / warm up
best = float("inf")
for _ in range(repeats):
    t = time.perf_counter()
    out = _kernels.ratio_max_batch(P, Q, L)
    best = min(best, time.perf_counter() - t)
print(json.dumps({"backend": _kernels.BACKEND, "candidates": P.shape[0], "edges": P.shape[1],
                  "points": n_points, "seconds": best, "checksum": float(out.sum())}))
"""


def run(no_numba: bool, points: int, repeats: int) -> dict:
    env = dict(os.environ)
    env.pop("FREEOUT_NO_NUMBA", None)
    if no_numba:
        env["FREEOUT_NO_NUMBA"] = "1"
    out = subprocess.run(
        [sys.executable, "-c", CHILD, str(points), str(repeats)], env=env, capture_output=True, text=True, check=True
    )
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    results = [run(False, args.points, args.repeats), run(True, args.points, args.repeats)]
    for r in results:
        print("%-6s %d candidates x %d edges, %d points: %.4fs" % (
            r["backend"], r["candidates"], r["edges"], r["points"], r["seconds"]))
    nb, np_ = results
    if abs(nb["checksum"] - np_["checksum"]) > 1e-6 * abs(np_["checksum"]):
        print("backends disagree: %r vs %r" % (nb["checksum"], np_["checksum"]))
        return 1
    if nb["backend"] == "numba":
        print("numba speedup: %.2fx" % (np_["seconds"] / nb["seconds"]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
