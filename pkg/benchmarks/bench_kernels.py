"""Time the numba kernels against their pure-numpy twins.

Runs every kernel from ``autossl._kernels`` on inputs shaped like a real
search (an SBM graph, soft posteriors, k-means candidates) under both
backends and prints per-call times plus the speedup. Numba compile time
is excluded by a warmup call per kernel.

    python3 benchmarks/bench_kernels.py --nodes 3000 --hidden 64

The numbers justify shipping two implementations: the numba versions win
by an order of magnitude on graph-sized inputs, and the numpy versions
keep the package importable where numba is not.
"""
import argparse
import timeit

import numpy as np

from autossl._kernels import implementations
from autossl.graph import normalized_adjacency, sbm_generate
from autossl.rng import RngStream


def build_inputs(nodes: int, hidden: int, k: int, seed: int):
    blocks = [nodes // 3, nodes // 3, nodes - 2 * (nodes // 3)]
    graph = sbm_generate(blocks, 0.02, 0.002, 0.5, RngStream(seed))
    adj = normalized_adjacency(graph)
    rng = RngStream(seed).child(1)
    dense = rng.standard_normal((nodes, hidden))
    posteriors = rng.uniform(size=(nodes, k))
    posteriors /= posteriors.sum(axis=1, keepdims=True)
    points = rng.standard_normal((nodes, hidden))
    centroids = points[rng.choice(nodes, size=k, replace=False)].copy()
    return {
        "csr_dense_matmul": (adj.indptr, adj.indices, adj.data, dense),
        "bfs_distances": (graph.indptr, graph.indices, 0, 6),
        "edge_l1_loss_grad": (graph.edge_u, graph.edge_v, posteriors),
        "kmeans_assign": (points, centroids),
    }, graph


def time_call(fn, args, repeats: int) -> float:
    fn(*args)  # warmup; also triggers the numba compile
    timer = timeit.Timer(lambda: fn(*args))
    number = max(1, int(0.2 / max(min(timer.repeat(1, 1)), 1e-6)))
    return min(timer.repeat(repeats, number)) / number


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--nodes", type=int, default=3000)
    parser.add_argument("--hidden", type=int, default=64)
    parser.add_argument("--clusters", type=int, default=10)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    impls = implementations()
    inputs, graph = build_inputs(args.nodes, args.hidden, args.clusters,
                                 args.seed)
    print(f"graph: {graph.num_nodes} nodes, {graph.num_edges} edges, "
          f"hidden {args.hidden}, {args.clusters} clusters")
    backends = sorted(impls)
    header = f"{'kernel':<20}" + "".join(f"{b + ' (ms)':>14}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for name, call_args in inputs.items():
        times = {b: time_call(impls[b][name], call_args, args.repeats)
                 for b in backends}
        row = f"{name:<20}" + "".join(f"{1e3 * times[b]:>14.3f}"
                                      for b in backends)
        if len(backends) == 2:
            row += f"{times['numpy'] / times['numba']:>9.1f}x"
        print(row)
    if "numba" not in impls:
        print("numba not importable; only the numpy backend was timed")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
