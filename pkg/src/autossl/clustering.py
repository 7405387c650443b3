"""k-means, soft cluster assignments, and the edge-smoothness objective.

The searchable quality signal of the whole package lives here:
``pseudo_homophily`` scores an embedding by how homophilous its k-means
partition is, and ``homophily_loss`` is the differentiable surrogate the
gradient-based search descends.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DimensionError
from .graph import Graph, homophily
from .numeric import softmax_rows
from .rng import RngStream


@dataclass(eq=False)
class ClusterModel:
    centroids: np.ndarray      # k x d
    hard_labels: np.ndarray    # n, int64
    inertia: float
    two_sigma_sq: float = 0.001


def _kmeans_pp_init(points: np.ndarray, k: int, rng: RngStream) -> np.ndarray:
    """k-means++ seeding: sample each next centroid with prob ~ D^2."""
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = points[first]
    closest = ((points - centroids[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # all points coincide with chosen centroids; any pick works
            centroids[c] = points[int(rng.integers(n))]
            continue
        r = rng.uniform(0.0, total)
        idx = int(np.searchsorted(np.cumsum(closest), r))
        idx = min(idx, n - 1)
        centroids[c] = points[idx]
        closest = np.minimum(closest,
                             ((points - centroids[c]) ** 2).sum(axis=1))
    return centroids


def _lloyd(points, centroids, max_iter):
    n, d = points.shape
    k = centroids.shape[0]
    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        new_labels, dists = _kernels.kmeans_assign(points, centroids)
        # re-seed empty clusters at the point farthest from its centroid
        counts = np.bincount(new_labels, minlength=k)
        for c in np.where(counts == 0)[0]:
            far = int(np.argmax(dists))
            centroids[c] = points[far]
            new_labels[far] = c
            dists[far] = 0.0
            counts = np.bincount(new_labels, minlength=k)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        sums = np.zeros((k, d))
        np.add.at(sums, labels, points)
        counts = np.bincount(labels, minlength=k).astype(np.float64)
        centroids = sums / np.maximum(counts, 1.0)[:, None]
    # exact inertia, evaluated directly rather than via the expansion trick
    inertia = float(((points - centroids[labels]) ** 2).sum())
    return centroids, labels, inertia


def _swap_polish(points, centroids, labels, max_moves):
    """Single-point reassignment descent applied after Lloyd has converged.

    Moves one point at a time to whichever cluster lowers the exact
    inertia the most, using the size-corrected Hartigan gain. Lloyd's
    fixed points are not all fixed points of this move, so it escapes
    some of Lloyd's local optima. Never empties a cluster.
    """
    n, d = points.shape
    k = centroids.shape[0]
    labels = labels.copy()
    for _ in range(max_moves):
        counts = np.bincount(labels, minlength=k).astype(np.float64)
        sums = np.zeros((k, d))
        np.add.at(sums, labels, points)
        means = sums / np.maximum(counts, 1.0)[:, None]
        best_gain = 1e-12
        best_move = None
        for i in range(n):
            a = labels[i]
            if counts[a] <= 1.0:
                continue
            d_a = ((points[i] - means[a]) ** 2).sum()
            removal = counts[a] / (counts[a] - 1.0) * d_a
            for b in range(k):
                if b == a:
                    continue
                d_b = ((points[i] - means[b]) ** 2).sum()
                gain = removal - counts[b] / (counts[b] + 1.0) * d_b
                if gain > best_gain:
                    best_gain = gain
                    best_move = (i, b)
        if best_move is None:
            break
        labels[best_move[0]] = best_move[1]
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    sums = np.zeros((k, d))
    np.add.at(sums, labels, points)
    centroids = sums / np.maximum(counts, 1.0)[:, None]
    inertia = float(((points - centroids[labels]) ** 2).sum())
    return centroids, labels, inertia


def kmeans(points: np.ndarray, k: int, rng: RngStream, max_iter: int = 100,
           restarts: int = 3) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding, best of ``restarts``.

    Tiny two-cluster instances take a deterministic path instead: Lloyd
    from every distinct point pair, each run finished with a
    single-point reassignment descent, keeping the lowest inertia.
    Random restarts demonstrably stall in local optima on some inputs
    this small, and the exhaustive seeding is at most 120 runs.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise DimensionError(f"points must be 2-d, got shape {points.shape}")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, num_points={n}], got {k}")
    best = None
    if k == 2 and n <= 16:
        for i, j in itertools.combinations(range(n), 2):
            centroids, labels, _ = _lloyd(points, points[[i, j]].copy(),
                                          max_iter)
            centroids, labels, inertia = _swap_polish(points, centroids,
                                                      labels, 4 * n)
            if best is None or inertia < best.inertia:
                best = ClusterModel(centroids, labels, inertia)
        return best
    for r in range(restarts):
        init = _kmeans_pp_init(points, k, rng.child(r))
        centroids, labels, inertia = _lloyd(points, init.copy(), max_iter)
        if best is None or inertia < best.inertia:
            best = ClusterModel(centroids, labels, inertia)
    return best


def pseudo_homophily(graph: Graph, embeddings: np.ndarray, k: int,
                     rng: RngStream, restarts: int = 3) -> float:
    """Homophily of the k-means partition of the embeddings."""
    model = kmeans(embeddings, k, rng, restarts=restarts)
    return homophily(graph, model.hard_labels)


def soft_assign(embeddings: np.ndarray, model: ClusterModel) -> np.ndarray:
    """Soft cluster posteriors from squared distances to the centroids.

    Row i is softmax over clusters of -||z_i - c||^2 / two_sigma_sq,
    computed with max subtraction. With the default temperature of 0.001
    the posteriors are nearly hard.
    """
    if embeddings.shape[1] != model.centroids.shape[1]:
        raise DimensionError(
            f"embeddings have dim {embeddings.shape[1]} but centroids "
            f"have dim {model.centroids.shape[1]}")
    sq = (
        (embeddings * embeddings).sum(axis=1)[:, None]
        - 2.0 * embeddings @ model.centroids.T
        + (model.centroids * model.centroids).sum(axis=1)[None, :]
    )
    np.clip(sq, 0.0, None, out=sq)
    return softmax_rows(-sq / model.two_sigma_sq)


def homophily_loss(graph: Graph, posteriors: np.ndarray,
                   ) -> tuple[float, np.ndarray]:
    """Mean L1 posterior gap across edges, and its subgradient.

    loss = sum_{clusters} sum_{edges} |p_u - p_c,v| / (k * |E|), each
    undirected edge once. Ties (p_u == p_v) get subgradient 0. Always in
    [0, 1] for rows that sum to one.
    """
    if posteriors.shape[0] != graph.num_nodes:
        raise DimensionError(
            f"posteriors must have {graph.num_nodes} rows, "
            f"got {posteriors.shape[0]}")
    if graph.num_edges == 0:
        raise ValueError("homophily loss is undefined with no edges")
    total, grad = _kernels.edge_l1_loss_grad(graph.edge_u, graph.edge_v,
                                             posteriors)
    scale = 1.0 / (posteriors.shape[1] * graph.num_edges)
    return total * scale, grad * scale


def homophily_loss_grad_embeddings(graph: Graph, embeddings: np.ndarray,
                                   model: ClusterModel,
                                   ) -> tuple[float, np.ndarray]:
    """Loss value and dLoss/dEmbeddings with centroids held fixed.

    Chains the edge-L1 subgradient through the softmax and the squared
    distances. Treating centroids as constants matches how the search
    uses the loss: clusters are re-estimated between steps, not through
    the gradient.
    """
    posteriors = soft_assign(embeddings, model)
    loss, g_post = homophily_loss(graph, posteriors)
    # softmax backward: dq = p * (g - sum(g * p))
    inner = (g_post * posteriors).sum(axis=1, keepdims=True)
    d_logits = posteriors * (g_post - inner)
    d_sq = -d_logits / model.two_sigma_sq
    grad = 2.0 * (d_sq.sum(axis=1, keepdims=True) * embeddings
                  - d_sq @ model.centroids)
    return loss, grad
