"""Graph container, on-disk format, homophily, and an SBM generator.

On-disk layout of a graph directory:

* ``edges.tsv``     one edge per line, two whitespace-separated 0-based
                    node indices. Direction, duplicates and self-loops are
                    ignored (self-loops and duplicates are dropped with a
                    logged count).
* ``features.csv``  one row per node, comma-separated reals. The number of
                    rows defines the node count.
* ``labels.txt``    optional, one integer class id per node.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import DimensionError, IngestionError, MalformedInputError
from .numeric import CsrMatrix, make_csr
from .rng import RngStream

log = logging.getLogger("autossl")


@dataclass(eq=False)
class Graph:
    """Undirected graph with node features. Immutable after construction.

    Edges are stored once with ``edge_u < edge_v``, plus a symmetric CSR
    adjacency for traversal. ``labels`` is None when ground truth is
    unavailable.
    """

    num_nodes: int
    edge_u: np.ndarray
    edge_v: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    features: np.ndarray
    labels: np.ndarray | None = None
    _norm_adj: CsrMatrix | None = field(default=None, repr=False)

    @property
    def num_edges(self) -> int:
        """Number of undirected edges, each counted once."""
        return int(self.edge_u.shape[0])

    @property
    def max_degree(self) -> int:
        if self.num_nodes == 0:
            return 0
        return int(np.diff(self.indptr).max())

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr).astype(np.int64)


def build_graph(num_nodes: int, pairs: np.ndarray, features: np.ndarray,
                labels=None) -> Graph:
    """Canonicalize raw edge pairs into a Graph.

    Symmetrizes, deduplicates, and drops self-loops; dropped counts are
    logged at WARNING. Raises MalformedInputError on out-of-range indices
    and DimensionError when features/labels disagree with ``num_nodes``.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    features = np.ascontiguousarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != num_nodes:
        raise DimensionError(
            f"features must be ({num_nodes}, d), got {features.shape}"
        )
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (num_nodes,):
            raise DimensionError(
                f"labels must have length {num_nodes}, got {labels.shape[0]}"
            )
    if pairs.size and (pairs.min() < 0 or pairs.max() >= num_nodes):
        bad = np.where((pairs < 0) | (pairs >= num_nodes))[0][0]
        raise MalformedInputError(
            f"edge endpoint out of range: {tuple(pairs[bad])} "
            f"with {num_nodes} nodes"
        )

    loops = int((pairs[:, 0] == pairs[:, 1]).sum()) if pairs.size else 0
    if loops:
        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    if pairs.size:
        lo = np.minimum(pairs[:, 0], pairs[:, 1])
        hi = np.maximum(pairs[:, 0], pairs[:, 1])
        canon = np.unique(np.stack([lo, hi], axis=1), axis=0)
        dups = pairs.shape[0] - canon.shape[0]
    else:
        canon = np.zeros((0, 2), dtype=np.int64)
        dups = 0
    if loops or dups:
        log.warning("dropped %d self-loop(s) and %d duplicate edge(s)",
                    loops, dups)

    edge_u = np.ascontiguousarray(canon[:, 0])
    edge_v = np.ascontiguousarray(canon[:, 1])
    rows = np.concatenate([edge_u, edge_v])
    cols = np.concatenate([edge_v, edge_u])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    indptr = np.zeros(num_nodes + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    np.cumsum(indptr, out=indptr)
    return Graph(num_nodes, edge_u, edge_v, indptr,
                 np.ascontiguousarray(cols), features, labels)


def homophily(graph: Graph, labels: np.ndarray) -> float:
    """Fraction of undirected edges whose endpoints share a label.

    Each edge counts once. Raises DimensionError for a label vector of the
    wrong length and ValueError for an edgeless graph (the ratio is
    undefined there).
    """
    labels = np.asarray(labels)
    if labels.shape != (graph.num_nodes,):
        raise DimensionError(
            f"labels must have length {graph.num_nodes}, "
            f"got {labels.shape}"
        )
    if graph.num_edges == 0:
        raise ValueError("homophily is undefined on a graph with no edges")
    same = labels[graph.edge_u] == labels[graph.edge_v]
    return float(same.sum()) / graph.num_edges


def bfs_distances(graph: Graph, source: int, cap: int) -> np.ndarray:
    """Hop distances from ``source``; nodes beyond ``cap`` get ``cap + 1``."""
    if not 0 <= source < graph.num_nodes:
        raise ValueError(f"source {source} out of range")
    return _kernels.bfs_distances(graph.indptr, graph.indices,
                                  np.int64(source), np.int64(cap))


def normalized_adjacency(graph: Graph) -> CsrMatrix:
    """Symmetrically normalized adjacency with self-loops.

    D^{-1/2} (A + I) D^{-1/2} where D counts the self-loop. Cached on the
    graph, so repeated calls are free.
    """
    if graph._norm_adj is not None:
        return graph._norm_adj
    n = graph.num_nodes
    rows = np.concatenate([graph.edge_u, graph.edge_v,
                           np.arange(n, dtype=np.int64)])
    cols = np.concatenate([graph.edge_v, graph.edge_u,
                           np.arange(n, dtype=np.int64)])
    deg = np.bincount(rows, minlength=n).astype(np.float64)
    inv_sqrt = 1.0 / np.sqrt(deg)
    vals = inv_sqrt[rows] * inv_sqrt[cols]
    adj = make_csr((n, n), rows, cols, vals)
    graph._norm_adj = adj
    return adj


# ---------------------------------------------------------------------------
# on-disk format
# ---------------------------------------------------------------------------

def load_graph(directory) -> Graph:
    """Read a graph directory (see module docstring for the layout)."""
    directory = Path(directory)
    feat_path = directory / "features.csv"
    edge_path = directory / "edges.tsv"
    for p in (feat_path, edge_path):
        if not p.is_file():
            raise IngestionError(f"missing required file: {p}")

    try:
        features = np.loadtxt(feat_path, delimiter=",", dtype=np.float64,
                              ndmin=2)
    except ValueError as exc:
        raise MalformedInputError(f"bad features.csv: {exc}") from exc
    num_nodes = features.shape[0]

    pairs = []
    with open(edge_path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise MalformedInputError(
                    f"expected two node indices, got {line.strip()!r}",
                    line_number=lineno)
            try:
                u, v = int(parts[0]), int(parts[1])
            except ValueError:
                raise MalformedInputError(
                    f"non-integer node index in {line.strip()!r}",
                    line_number=lineno)
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise MalformedInputError(
                    f"node index out of range in {line.strip()!r} "
                    f"(graph has {num_nodes} nodes)", line_number=lineno)
            pairs.append((u, v))
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)

    labels = None
    label_path = directory / "labels.txt"
    if label_path.is_file():
        raw = label_path.read_text().split()
        if len(raw) != num_nodes:
            raise DimensionError(
                f"labels.txt has {len(raw)} entries but features.csv "
                f"defines {num_nodes} nodes")
        try:
            labels = np.array([int(x) for x in raw], dtype=np.int64)
        except ValueError as exc:
            raise MalformedInputError(f"bad labels.txt: {exc}") from exc

    return build_graph(num_nodes, pairs, features, labels)


def save_graph(directory, graph: Graph) -> None:
    """Write a graph in the directory layout that ``load_graph`` reads."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "edges.tsv", "w") as fh:
        for u, v in zip(graph.edge_u, graph.edge_v):
            fh.write(f"{u}\t{v}\n")
    np.savetxt(directory / "features.csv", graph.features, delimiter=",",
               fmt="%.17g")
    if graph.labels is not None:
        with open(directory / "labels.txt", "w") as fh:
            fh.write("\n".join(str(int(x)) for x in graph.labels) + "\n")


# ---------------------------------------------------------------------------
# stochastic block model
# ---------------------------------------------------------------------------

def sbm_generate(block_sizes, p_in: float, p_out: float,
                 feature_noise: float, rng: RngStream) -> Graph:
    """Sample a stochastic block model graph.

    Node features are the one-hot block indicator plus Gaussian noise of
    scale ``feature_noise``; labels are the block ids. A parameter choice
    that yields zero edges is allowed but logged, since most downstream
    quantities need at least one edge.
    """
    block_sizes = [int(b) for b in block_sizes]
    if any(b <= 0 for b in block_sizes):
        raise ValueError("block sizes must be positive")
    for name, p in (("p_in", p_in), ("p_out", p_out)):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {p}")
    n = sum(block_sizes)
    blocks = np.repeat(np.arange(len(block_sizes)), block_sizes)

    iu, iv = np.triu_indices(n, k=1)
    prob = np.where(blocks[iu] == blocks[iv], p_in, p_out)
    keep = rng.uniform(size=iu.shape[0]) < prob
    pairs = np.stack([iu[keep], iv[keep]], axis=1)
    if pairs.shape[0] == 0:
        log.warning("sbm_generate: sampled zero edges "
                    "(p_in=%g, p_out=%g, n=%d)", p_in, p_out, n)

    features = np.zeros((n, len(block_sizes)))
    features[np.arange(n), blocks] = 1.0
    if feature_noise > 0:
        features += feature_noise * rng.standard_normal(features.shape)
    return build_graph(n, pairs, features, blocks)
