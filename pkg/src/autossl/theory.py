"""Information-theoretic limit on agreement between labelings of a graph.

For two balanced binary labelings A and B of the same graph whose edge
homophilies satisfy h_A < h_B, at least delta = (h_B - h_A) |E| / (2 d_max)
nodes must change class to turn A into B, and the mutual information
between the labelings is bounded by ``pseudo_homophily_bound(delta, N)``.
The bound is ln 2 at delta = 0 and falls strictly to 0 at delta = N / 4.
``verify_theorem`` brute-forces the claim on small graphs by enumerating
every balanced labeling.
"""
from __future__ import annotations

from itertools import combinations

import numpy as np

from .graph import Graph, build_graph, homophily, sbm_generate
from .rng import RngStream


def delta_from_homophily(h_a: float, h_b: float, num_edges: int,
                         d_max: int) -> float:
    """Minimum number of nodes that must flip class to raise h_a to h_b."""
    if d_max <= 0 or num_edges <= 0:
        raise ValueError("graph must have at least one edge")
    return (h_b - h_a) * num_edges / (2.0 * d_max)


def pseudo_homophily_bound(delta: float, num_nodes: int) -> float:
    """Upper bound (nats) on MI between balanced binary labelings.

    U(delta, N) = (1/N) [ 2 delta ln(4 delta / N)
                          + 2 (N/2 - delta) ln(4 (N/2 - delta) / N) ]
    with 0 ln 0 = 0. Valid for 0 <= delta <= N/4; strictly decreasing in
    delta on that range.
    """
    n = int(num_nodes)
    if n <= 0 or n % 2:
        raise ValueError(f"num_nodes must be positive and even, got {n}")
    if not 0.0 <= delta <= n / 4.0 + 1e-12:
        raise ValueError(f"delta must be in [0, N/4]={n / 4}, got {delta}")
    term1 = 2.0 * _xlog4x_over_n(delta, n)
    term2 = 2.0 * _xlog4x_over_n(n / 2.0 - delta, n)
    return (term1 + term2) / n


def _xlog4x_over_n(x: float, n: int) -> float:
    """x * ln(4x / N) with the 0 ln 0 = 0 convention."""
    if x <= 0.0:
        return 0.0
    return x * np.log(4.0 * x / n)


def binary_mutual_information(labels_a, labels_b) -> float:
    """Mutual information (nats) between two binary labelings."""
    a = np.asarray(labels_a).astype(np.int64)
    b = np.asarray(labels_b).astype(np.int64)
    if a.shape != b.shape:
        raise ValueError("labelings must have equal length")
    n = a.shape[0]
    mi = 0.0
    for va in (0, 1):
        for vb in (0, 1):
            joint = float(np.sum((a == va) & (b == vb))) / n
            if joint <= 0.0:
                continue
            pa = float(np.sum(a == va)) / n
            pb = float(np.sum(b == vb)) / n
            mi += joint * np.log(joint / (pa * pb))
    return mi


def verify_theorem(graph: Graph, labels_b=None, name: str = "",
                   tol: float = 1e-12) -> dict:
    """Exhaustively check the bound against every balanced labeling.

    Enumerates all balanced binary labelings A with node 0 fixed to class
    0 (the bound and MI are label-swap invariant), keeps those with
    h_A < h_B, and confirms MI(A, B) <= U(delta, N). Also confirms the
    bound is monotone increasing in h_A over the labelings seen. Intended
    for graphs with at most ~16 nodes.
    """
    n = graph.num_nodes
    if n % 2:
        raise ValueError("theorem applies to graphs with an even node count")
    if labels_b is None:
        labels_b = graph.labels
    labels_b = np.asarray(labels_b, dtype=np.int64)
    counts = np.bincount(labels_b, minlength=2)
    if labels_b.shape != (n,) or set(np.unique(labels_b)) - {0, 1} or \
            counts[0] != counts[1]:
        raise ValueError("labels_b must be a balanced binary labeling")

    h_b = homophily(graph, labels_b)
    d_max = graph.max_degree
    num_edges = graph.num_edges

    checked = 0
    skipped = 0
    violations = 0
    min_gap = np.inf
    bound_by_ha: dict[float, float] = {}
    labels_a = np.empty(n, dtype=np.int64)
    for ones in combinations(range(1, n), n // 2):
        labels_a[:] = 0
        labels_a[list(ones)] = 1
        h_a = homophily(graph, labels_a)
        if h_a >= h_b:
            skipped += 1
            continue
        delta = delta_from_homophily(h_a, h_b, num_edges, d_max)
        bound = pseudo_homophily_bound(delta, n)
        mi = binary_mutual_information(labels_a, labels_b)
        gap = bound - mi
        if gap < -tol:
            violations += 1
        if gap < min_gap:
            min_gap = gap
        bound_by_ha.setdefault(round(h_a, 12), bound)
        checked += 1

    sorted_ha = sorted(bound_by_ha)
    bounds = [bound_by_ha[h] for h in sorted_ha]
    monotone = all(b2 > b1 - tol for b1, b2 in zip(bounds, bounds[1:]))

    return {
        "name": name,
        "num_nodes": n,
        "num_edges": num_edges,
        "d_max": d_max,
        "h_b": h_b,
        "num_labelings": checked + skipped,
        "num_checked": checked,
        "num_skipped": skipped,
        "violations": violations,
        "min_gap": float(min_gap) if checked else None,
        "monotone": bool(monotone),
    }


def _simple_graph(num_nodes: int, pairs, labels) -> Graph:
    return build_graph(num_nodes, np.asarray(pairs, dtype=np.int64),
                       np.eye(num_nodes), np.asarray(labels, dtype=np.int64))


def builtin_verification_corpus() -> list[tuple[str, Graph]]:
    """Small graphs with balanced binary labels for brute-force checks.

    Covers a cycle, a path, a complete graph (where no labeling beats the
    reference, so the theorem's precondition filters everything out), two
    sampled two-block graphs, and two cliques joined by a bridge.
    """
    half = lambda n: [0] * (n // 2) + [1] * (n // 2)  # noqa: E731

    def ring(n):
        return [(i, (i + 1) % n) for i in range(n)]

    corpus = [
        ("cycle8", _simple_graph(8, ring(8), half(8))),
        ("path8", _simple_graph(8, [(i, i + 1) for i in range(7)], half(8))),
        ("complete4", _simple_graph(
            4, [(i, j) for i in range(4) for j in range(i + 1, 4)],
            half(4))),
        ("cycle12", _simple_graph(12, ring(12), half(12))),
        ("triangles_bridge", _simple_graph(
            6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)],
            half(6))),
    ]
    for name, seed, sizes in (("sbm2x5", 7, (5, 5)), ("sbm2x6", 11, (6, 6))):
        g = sbm_generate(sizes, 0.9, 0.1, 0.0, RngStream(seed))
        corpus.append((name, g))
    return corpus
