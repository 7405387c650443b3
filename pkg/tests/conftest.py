import numpy as np
import pytest

from autossl.graph import build_graph, sbm_generate
from autossl.rng import RngStream


@pytest.fixture
def rng():
    return RngStream(1234)


@pytest.fixture
def triangle_graph():
    # 3-cycle with 1-d features
    return build_graph(3, np.array([[0, 1], [1, 2], [2, 0]]),
                       np.arange(3.0)[:, None], labels=[0, 0, 1])


@pytest.fixture
def random_graph():
    # fixed 10-node Erdos-Renyi-ish graph used by the gradient checks
    rng = RngStream(42)
    pairs = []
    r = rng.child(0)
    for i in range(10):
        for j in range(i + 1, 10):
            if r.uniform() < 0.35:
                pairs.append((i, j))
    feats = rng.child(1).standard_normal((10, 4))
    return build_graph(10, np.array(pairs), feats)


@pytest.fixture
def sbm_graph():
    # 2 well-separated blocks of 50
    return sbm_generate([50, 50], 0.2, 0.05, 0.1, RngStream(0).child(1))


def brute_bfs(graph, source):
    """Reference BFS on the CSR adjacency, plain python."""
    dist = {source: 0}
    frontier = [source]
    while frontier:
        nxt = []
        for u in frontier:
            for v in graph.indices[graph.indptr[u]:graph.indptr[u + 1]]:
                v = int(v)
                if v not in dist:
                    dist[v] = dist[u] + 1
                    nxt.append(v)
        frontier = nxt
    return dist
