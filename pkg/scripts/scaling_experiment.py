"""Measure consistency-check runtime on synthetic chain networks.

Builds chains whose edge count doubles from 8 to a chosen maximum,
where every local map carries the full feature chain, times
check_consistency_ordinary on each, and prints the per-doubling growth
factor. Run from the repository root:

    python3 scripts/scaling_experiment.py [--max-edges 64] [--repeats 5]
"""

import argparse
import time

from simnet.core import KnowledgeMap, Variable
from simnet.similarity import (
    OrdinaryNetwork,
    SimilarityGraph,
    check_consistency_ordinary,
)

BINARY = ("absent", "present")


def chain_network(n_edges: int) -> OrdinaryNetwork:
    hyps = tuple(f"h{i}" for i in range(n_edges + 1))
    edges = tuple((hyps[i], hyps[i + 1]) for i in range(n_edges))
    feats = tuple(f"x{i}" for i in range(n_edges + 1))
    arcs = {("h", f) for f in feats}
    arcs |= {(feats[j], feats[j + 1]) for j in range(len(feats) - 1)}
    locals_ = {}
    for e in edges:
        hvar = Variable("h", e)
        locals_[e] = KnowledgeMap(
            (hvar,) + tuple(Variable(f, BINARY) for f in feats),
            frozenset(arcs),
            distinguished="h",
        )
    return OrdinaryNetwork(SimilarityGraph(hyps, edges), locals_, distinguished="h")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--max-edges", type=int, default=64)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    sizes = []
    n = 8
    while n <= args.max_edges:
        sizes.append(n)
        n *= 2

    print(f"{'edges':>6}  {'best (ms)':>10}  {'growth':>7}")
    prev = None
    for size in sizes:
        net = chain_network(size)
        best = min(
            _timed(net) for _ in range(max(1, args.repeats))
        )
        growth = "" if prev is None else f"{best / prev:6.2f}x"
        print(f"{size:>6}  {best * 1e3:>10.3f}  {growth:>7}")
        prev = best
    print("cubic growth would be 8.00x per doubling")
    return 0


def _timed(net: OrdinaryNetwork) -> float:
    t0 = time.perf_counter()
    verdict = check_consistency_ordinary(net)
    elapsed = time.perf_counter() - t0
    if not verdict.is_consistent:
        raise RuntimeError("chain fixture should be consistent")
    return elapsed


if __name__ == "__main__":
    raise SystemExit(main())
