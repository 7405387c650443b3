"""Hot inner-loop kernels, compiled with numba when available.

Each kernel exists twice: a numba ``@njit`` version and a pure-numpy
version with identical signatures and semantics. The active backend is
picked once at import time from the ``AUTOSSL_BACKEND`` environment
variable (``numba`` or ``numpy``); the default is numba when it imports
cleanly, numpy otherwise. ``benchmarks/bench_kernels.py`` compares the two.

Kernels here are deliberately dumb about validation: callers check shapes
and dtypes. Everything takes C-contiguous float64 / int64 arrays.
"""
import os

import numpy as np

from .errors import ConfigError

_ENV_FLAG = "AUTOSSL_BACKEND"


# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------

def _csr_dense_matmul_numpy(indptr, indices, data, dense):
    n_rows = indptr.shape[0] - 1
    out = np.zeros((n_rows, dense.shape[1]), dtype=np.float64)
    if indices.shape[0] == 0:
        return out
    contrib = data[:, None] * dense[indices]
    row_ids = np.repeat(np.arange(n_rows), np.diff(indptr))
    np.add.at(out, row_ids, contrib)
    return out


def _bfs_distances_numpy(indptr, indices, source, cap):
    # unvisited sentinel is cap + 1, which is also the reported value for
    # nodes farther than cap hops
    n = indptr.shape[0] - 1
    dist = np.full(n, cap + 1, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    for d in range(1, cap + 1):
        if frontier.size == 0:
            break
        segs = [indices[indptr[u]:indptr[u + 1]] for u in frontier]
        if not segs:
            break
        nbrs = np.unique(np.concatenate(segs)) if segs else frontier[:0]
        nxt = nbrs[dist[nbrs] == cap + 1]
        if nxt.size == 0:
            break
        dist[nxt] = d
        frontier = nxt
    return dist


def _edge_l1_loss_grad_numpy(edge_u, edge_v, values):
    grad = np.zeros_like(values)
    if edge_u.shape[0] == 0:
        return 0.0, grad
    diff = values[edge_u] - values[edge_v]
    total = float(np.abs(diff).sum())
    sign = np.sign(diff)
    np.add.at(grad, edge_u, sign)
    np.add.at(grad, edge_v, -sign)
    return total, grad


def _kmeans_assign_numpy(points, centroids):
    # ||x - c||^2 expanded; tiny negatives from cancellation are clipped
    sq = (
        (points * points).sum(axis=1)[:, None]
        - 2.0 * points @ centroids.T
        + (centroids * centroids).sum(axis=1)[None, :]
    )
    np.clip(sq, 0.0, None, out=sq)
    labels = np.argmin(sq, axis=1).astype(np.int64)
    return labels, sq[np.arange(points.shape[0]), labels]


_NUMPY_IMPLS = {
    "csr_dense_matmul": _csr_dense_matmul_numpy,
    "bfs_distances": _bfs_distances_numpy,
    "edge_l1_loss_grad": _edge_l1_loss_grad_numpy,
    "kmeans_assign": _kmeans_assign_numpy,
}


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

def _build_numba_impls():
    from numba import njit

    @njit(cache=True)
    def csr_dense_matmul(indptr, indices, data, dense):
        n_rows = indptr.shape[0] - 1
        d = dense.shape[1]
        out = np.zeros((n_rows, d), dtype=np.float64)
        for i in range(n_rows):
            for p in range(indptr[i], indptr[i + 1]):
                j = indices[p]
                w = data[p]
                for c in range(d):
                    out[i, c] += w * dense[j, c]
        return out

    @njit(cache=True)
    def bfs_distances(indptr, indices, source, cap):
        n = indptr.shape[0] - 1
        dist = np.full(n, cap + 1, dtype=np.int64)
        queue = np.empty(n, dtype=np.int64)
        dist[source] = 0
        queue[0] = source
        head = 0
        tail = 1
        while head < tail:
            u = queue[head]
            head += 1
            du = dist[u]
            if du >= cap:
                continue
            for p in range(indptr[u], indptr[u + 1]):
                v = indices[p]
                if dist[v] == cap + 1:
                    dist[v] = du + 1
                    queue[tail] = v
                    tail += 1
        return dist

    @njit(cache=True)
    def edge_l1_loss_grad(edge_u, edge_v, values):
        m = edge_u.shape[0]
        k = values.shape[1]
        grad = np.zeros_like(values)
        total = 0.0
        for e in range(m):
            u = edge_u[e]
            v = edge_v[e]
            for c in range(k):
                diff = values[u, c] - values[v, c]
                if diff > 0.0:
                    total += diff
                    grad[u, c] += 1.0
                    grad[v, c] -= 1.0
                elif diff < 0.0:
                    total -= diff
                    grad[u, c] -= 1.0
                    grad[v, c] += 1.0
        return total, grad

    @njit(cache=True)
    def kmeans_assign(points, centroids):
        n, d = points.shape
        k = centroids.shape[0]
        labels = np.empty(n, dtype=np.int64)
        dists = np.empty(n, dtype=np.float64)
        for i in range(n):
            best = 0
            best_d = np.inf
            for c in range(k):
                s = 0.0
                for j in range(d):
                    t = points[i, j] - centroids[c, j]
                    s += t * t
                if s < best_d:
                    best_d = s
                    best = c
            labels[i] = best
            dists[i] = best_d
        return labels, dists

    return {
        "csr_dense_matmul": csr_dense_matmul,
        "bfs_distances": bfs_distances,
        "edge_l1_loss_grad": edge_l1_loss_grad,
        "kmeans_assign": kmeans_assign,
    }


def _select_backend():
    requested = os.environ.get(_ENV_FLAG, "").strip().lower()
    if requested not in ("", "numba", "numpy"):
        raise ConfigError(
            f"{_ENV_FLAG} must be 'numba' or 'numpy', got {requested!r}"
        )
    if requested == "numpy":
        return "numpy", _NUMPY_IMPLS
    try:
        impls = _build_numba_impls()
        return "numba", impls
    except ImportError:
        if requested == "numba":
            raise ConfigError(
                f"{_ENV_FLAG}=numba but numba is not importable"
            )
        return "numpy", _NUMPY_IMPLS


BACKEND, _ACTIVE = _select_backend()

csr_dense_matmul = _ACTIVE["csr_dense_matmul"]
bfs_distances = _ACTIVE["bfs_distances"]
edge_l1_loss_grad = _ACTIVE["edge_l1_loss_grad"]
kmeans_assign = _ACTIVE["kmeans_assign"]


def implementations():
    """Both backends keyed by name, for tests and benchmarks."""
    table = {"numpy": _NUMPY_IMPLS}
    try:
        table["numba"] = _build_numba_impls()
    except ImportError:
        pass
    return table
