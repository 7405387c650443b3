"""The five self-supervised pretext tasks and their hand-derived gradients.

Each task precomputes its pseudo-targets once (``make_tasks``), owns a
small linear head initialized per training run, and reports, for a given
embedding matrix, its loss plus gradients w.r.t. the embeddings and the
head. Only the contrastive task looks at a second, corrupted embedding
matrix (same encoder run on row-shuffled features), so the shared step
interface carries an optional corrupted matrix and per-step index draws.

Task roster:

* ``clu``      classify nodes into a balanced BFS-grown graph partition
* ``par``      classify nodes into k-means clusters of the raw features
* ``pairsim``  regress cosine feature similarity of node pairs from |z_u - z_v|
* ``pairdis``  classify hop-distance buckets of node pairs from [z_u, z_v]
* ``dgi``      contrast true node/summary pairs against corrupted ones
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .clustering import kmeans
from .errors import ConfigError, PreparationError
from .graph import Graph, bfs_distances
from .numeric import (ParamBlock, log_sigmoid, make_block,
                      softmax_cross_entropy)
from .rng import RngStream

TASK_NAMES = ("clu", "par", "pairsim", "pairdis", "dgi")


@dataclass
class TaskConfig:
    names: tuple = TASK_NAMES
    clu_parts: int = 10
    par_clusters: int = 10
    pairsim_pairs: int = 2000
    pairdis_pairs: int = 2000
    pairdis_cap: int = 4
    dgi_samples: int = 2000


@dataclass(eq=False)
class StepDraw:
    """Randomness drawn once per training step and shared by all tasks."""

    corrupt_perm: np.ndarray | None = None
    dgi_pos: np.ndarray | None = None
    dgi_neg: np.ndarray | None = None


@dataclass(eq=False)
class TaskResult:
    loss: float
    grad_embeddings: np.ndarray
    grad_corrupt: np.ndarray | None
    head_grads: list[np.ndarray] = field(default_factory=list)


def _glorot(rng: RngStream, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


# ---------------------------------------------------------------------------
# target construction helpers
# ---------------------------------------------------------------------------

def greedy_balanced_partition(graph: Graph, num_parts: int,
                              rng: RngStream) -> np.ndarray:
    """Partition nodes into near-equal parts by growing BFS regions.

    Part sizes differ by at most one. Seeds are taken from a random node
    order; a part grows breadth-first until it hits quota, which keeps
    parts locally contiguous on connected graphs.
    """
    n = graph.num_nodes
    if not 1 <= num_parts <= n:
        raise ValueError(f"num_parts must be in [1, {n}], got {num_parts}")
    quotas = [n // num_parts + (1 if i < n % num_parts else 0)
              for i in range(num_parts)]
    labels = np.full(n, -1, dtype=np.int64)
    order = rng.permutation(n)
    cursor = 0
    part = 0
    remaining = quotas[0]
    frontier: deque = deque()
    assigned = 0
    while assigned < n:
        if not frontier:
            while labels[order[cursor]] != -1:
                cursor += 1
            frontier.append(int(order[cursor]))
        u = frontier.popleft()
        if labels[u] != -1:
            continue
        labels[u] = part
        assigned += 1
        remaining -= 1
        if remaining == 0:
            part += 1
            remaining = quotas[part] if part < num_parts else 0
            frontier.clear()
        else:
            for v in graph.indices[graph.indptr[u]:graph.indptr[u + 1]]:
                if labels[v] == -1:
                    frontier.append(int(v))
    return labels


def _top_similarity_pairs(features: np.ndarray, m_top: int,
                          batch: int = 256):
    """The m_top most cosine-similar (u, v) pairs with u < v."""
    n = features.shape[0]
    norms = np.linalg.norm(features, axis=1)
    safe = np.maximum(norms, 1e-300)
    normed = np.where(norms[:, None] > 0.0, features / safe[:, None], 0.0)
    cand_u, cand_v, cand_s = [], [], []
    for start in range(0, n, batch):
        rows = normed[start:start + batch]
        sims = rows @ normed.T
        for bi in range(rows.shape[0]):
            sims[bi, :start + bi + 1] = -np.inf  # keep u < v only
        flat = sims.ravel()
        take = min(m_top, flat.size)
        if take == 0:
            continue
        idx = np.argpartition(flat, flat.size - take)[-take:]
        vals = flat[idx]
        ok = np.isfinite(vals)
        idx, vals = idx[ok], vals[ok]
        bu, bv = np.unravel_index(idx, sims.shape)
        cand_u.append(bu + start)
        cand_v.append(bv)
        cand_s.append(vals)
    if not cand_u:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0)
    u = np.concatenate(cand_u)
    v = np.concatenate(cand_v)
    s = np.concatenate(cand_s)
    # global top with a deterministic tie order
    order = np.lexsort((v, u, -s))[:m_top]
    return (np.stack([u[order], v[order]], axis=1).astype(np.int64),
            s[order])


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------

class PretextTask:
    """Shared shape: precomputed targets + a linear head."""

    name: str = ""
    needs_corrupt: bool = False

    def init_head(self, hidden: int, lr: float,
                  rng: RngStream) -> list[ParamBlock]:
        raise NotImplementedError

    def loss_and_grad(self, embeddings, corrupt, heads, draw) -> TaskResult:
        raise NotImplementedError


class _NodeClassTask(PretextTask):
    """Cross-entropy of a linear head against per-node pseudo-labels."""

    def __init__(self, labels: np.ndarray, num_classes: int):
        self.labels = labels
        self.num_classes = num_classes

    def init_head(self, hidden, lr, rng):
        w = _glorot(rng, hidden, self.num_classes,
                    (hidden, self.num_classes))
        b = np.zeros(self.num_classes)
        return [make_block(f"{self.name}.weight", w, lr),
                make_block(f"{self.name}.bias", b, lr)]

    def loss_and_grad(self, embeddings, corrupt, heads, draw):
        w, b = heads
        logits = embeddings @ w.value + b.value[None, :]
        loss, g_logits = softmax_cross_entropy(logits, self.labels)
        return TaskResult(
            loss=loss,
            grad_embeddings=g_logits @ w.value.T,
            grad_corrupt=None,
            head_grads=[embeddings.T @ g_logits, g_logits.sum(axis=0)],
        )


class ClusterPartitionTask(_NodeClassTask):
    """``clu``: labels come from a balanced BFS-grown partition."""

    name = "clu"

    def __init__(self, graph: Graph, num_parts: int, rng: RngStream):
        if graph.num_nodes < num_parts:
            raise PreparationError(
                f"clu needs at least {num_parts} nodes, "
                f"graph has {graph.num_nodes}")
        super().__init__(greedy_balanced_partition(graph, num_parts, rng),
                         num_parts)


class FeatureClusterTask(_NodeClassTask):
    """``par``: labels come from k-means on the raw features."""

    name = "par"

    def __init__(self, graph: Graph, num_clusters: int, rng: RngStream):
        if graph.num_nodes < num_clusters:
            raise PreparationError(
                f"par needs at least {num_clusters} nodes, "
                f"graph has {graph.num_nodes}")
        model = kmeans(graph.features, num_clusters, rng)
        super().__init__(model.hard_labels, num_clusters)


class PairSimilarityTask(PretextTask):
    """``pairsim``: regress feature cosine similarity from |z_u - z_v|.

    Half the pairs are the most feature-similar ones, half are uniform
    random; targets are cosine similarity of the raw features, with 0 for
    rows of zero norm.
    """

    name = "pairsim"

    def __init__(self, graph: Graph, num_pairs: int, rng: RngStream):
        n = graph.num_nodes
        if n < 2:
            raise PreparationError("pairsim needs at least 2 nodes")
        num_pairs = min(num_pairs, n * (n - 1) // 2)
        m_top = num_pairs // 2
        top_pairs, top_sims = _top_similarity_pairs(graph.features, m_top)
        seen = {(int(a), int(b)) for a, b in top_pairs}
        pairs = [tuple(p) for p in top_pairs]
        attempts = 0
        while len(pairs) < num_pairs and attempts < 200 * num_pairs:
            attempts += 1
            a = int(rng.integers(n))
            b = int(rng.integers(n))
            if a == b:
                continue
            key = (min(a, b), max(a, b))
            if key in seen:
                continue
            seen.add(key)
            pairs.append(key)
        self.pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        norms = np.linalg.norm(graph.features, axis=1)
        u, v = self.pairs[:, 0], self.pairs[:, 1]
        denom = norms[u] * norms[v]
        dots = (graph.features[u] * graph.features[v]).sum(axis=1)
        self.targets = np.where(denom > 0.0, dots / np.maximum(denom, 1e-300),
                                0.0)
        if m_top:
            # the precomputed top similarities must agree with the direct ones
            assert np.allclose(self.targets[:m_top], top_sims, atol=1e-9)

    def init_head(self, hidden, lr, rng):
        w = _glorot(rng, hidden, 1, (hidden,))
        b = np.zeros(1)
        return [make_block("pairsim.weight", w, lr),
                make_block("pairsim.bias", b, lr)]

    def loss_and_grad(self, embeddings, corrupt, heads, draw):
        w, b = heads
        u, v = self.pairs[:, 0], self.pairs[:, 1]
        diff = embeddings[u] - embeddings[v]
        abs_diff = np.abs(diff)
        pred = abs_diff @ w.value + b.value[0]
        resid = pred - self.targets
        m = self.pairs.shape[0]
        loss = float((resid * resid).mean())
        g_pred = 2.0 * resid / m
        g_abs = g_pred[:, None] * w.value[None, :]
        g_diff = g_abs * np.sign(diff)
        grad = np.zeros_like(embeddings)
        np.add.at(grad, u, g_diff)
        np.add.at(grad, v, -g_diff)
        return TaskResult(
            loss=loss,
            grad_embeddings=grad,
            grad_corrupt=None,
            head_grads=[abs_diff.T @ g_pred,
                        np.array([g_pred.sum()])],
        )


class PairDistanceTask(PretextTask):
    """``pairdis``: classify hop distance buckets {1, .., cap-1, >=cap}.

    Pairs are sampled by BFS from random anchors among reachable targets;
    a pair at true distance d gets bucket min(d, cap) - 1.
    """

    name = "pairdis"

    def __init__(self, graph: Graph, num_pairs: int, cap: int,
                 rng: RngStream):
        n = graph.num_nodes
        if n < 2:
            raise PreparationError("pairdis needs at least 2 nodes")
        if cap < 2:
            raise ConfigError(f"pairdis_cap must be >= 2, got {cap}")
        self.cap = cap
        per_anchor = min(16, n - 1)
        seen = set()
        pairs, labels = [], []
        max_attempts = max(64, (8 * num_pairs) // per_anchor + 1)
        attempts = 0
        while len(pairs) < num_pairs and attempts < max_attempts:
            attempts += 1
            anchor = int(rng.integers(n))
            dist = bfs_distances(graph, anchor, cap=n)
            reachable = np.where((dist >= 1) & (dist <= n))[0]
            if reachable.size == 0:
                continue
            take = min(per_anchor, reachable.size, num_pairs - len(pairs))
            chosen = rng.choice(reachable, size=take, replace=False)
            for v in np.sort(chosen):
                key = (min(anchor, int(v)), max(anchor, int(v)))
                if key in seen:
                    continue
                seen.add(key)
                pairs.append(key)
                labels.append(min(int(dist[v]), cap) - 1)
        if not pairs:
            raise PreparationError(
                "pairdis found no reachable node pairs (no edges?)")
        self.pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        self.labels = np.asarray(labels, dtype=np.int64)

    def init_head(self, hidden, lr, rng):
        w = _glorot(rng, 2 * hidden, self.cap, (2 * hidden, self.cap))
        b = np.zeros(self.cap)
        return [make_block("pairdis.weight", w, lr),
                make_block("pairdis.bias", b, lr)]

    def loss_and_grad(self, embeddings, corrupt, heads, draw):
        w, b = heads
        h = embeddings.shape[1]
        u, v = self.pairs[:, 0], self.pairs[:, 1]
        concat = np.concatenate([embeddings[u], embeddings[v]], axis=1)
        logits = concat @ w.value + b.value[None, :]
        loss, g_logits = softmax_cross_entropy(logits, self.labels)
        g_concat = g_logits @ w.value.T
        grad = np.zeros_like(embeddings)
        np.add.at(grad, u, g_concat[:, :h])
        np.add.at(grad, v, g_concat[:, h:])
        return TaskResult(
            loss=loss,
            grad_embeddings=grad,
            grad_corrupt=None,
            head_grads=[concat.T @ g_logits, g_logits.sum(axis=0)],
        )


class ContrastTask(PretextTask):
    """``dgi``: discriminate true embeddings from corrupted ones.

    The summary s = sigmoid(mean(Z)) comes from the clean embeddings; a
    bilinear head scores rows of Z (positives) and rows of the corrupted
    matrix (negatives); loss is mean binary cross-entropy. With a
    zero-weight head every score is 0 and the loss is exactly ln 2.
    """

    name = "dgi"
    needs_corrupt = True

    def __init__(self, graph: Graph, num_samples: int):
        self.num_samples = int(num_samples)

    def init_head(self, hidden, lr, rng):
        w = _glorot(rng, hidden, hidden, (hidden, hidden))
        return [make_block("dgi.weight", w, lr)]

    def loss_and_grad(self, embeddings, corrupt, heads, draw):
        if corrupt is None or draw.dgi_pos is None:
            raise ValueError("dgi requires corrupted embeddings and a draw")
        (w,) = heads
        pos = draw.dgi_pos
        neg = draw.dgi_neg
        n = embeddings.shape[0]
        mean = embeddings.mean(axis=0)
        summary = 1.0 / (1.0 + np.exp(-mean))
        key = w.value @ summary
        s_pos = embeddings[pos] @ key
        s_neg = corrupt[neg] @ key
        m = pos.shape[0] + neg.shape[0]
        loss = float(-(log_sigmoid(s_pos).sum()
                       + log_sigmoid(-s_neg).sum()) / m)
        g_pos = (1.0 / (1.0 + np.exp(-s_pos)) - 1.0) / m
        g_neg = (1.0 / (1.0 + np.exp(-s_neg))) / m

        grad = np.zeros_like(embeddings)
        np.add.at(grad, pos, g_pos[:, None] * key[None, :])
        grad_c = np.zeros_like(corrupt)
        np.add.at(grad_c, neg, g_neg[:, None] * key[None, :])

        # d/dW and the summary path back into the clean embeddings
        lhs = embeddings[pos].T @ g_pos + corrupt[neg].T @ g_neg
        g_w = np.outer(lhs, summary)
        g_summary = w.value.T @ lhs
        g_mean = g_summary * summary * (1.0 - summary)
        grad += g_mean[None, :] / n
        return TaskResult(loss=loss, grad_embeddings=grad,
                          grad_corrupt=grad_c, head_grads=[g_w])


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def make_tasks(graph: Graph, config: TaskConfig,
               rng: RngStream) -> list[PretextTask]:
    """Instantiate tasks with their pseudo-targets, one child stream each."""
    tasks = []
    for name in config.names:
        if name == "clu":
            tasks.append(ClusterPartitionTask(graph, config.clu_parts,
                                              rng.child(0)))
        elif name == "par":
            tasks.append(FeatureClusterTask(graph, config.par_clusters,
                                            rng.child(1)))
        elif name == "pairsim":
            tasks.append(PairSimilarityTask(graph, config.pairsim_pairs,
                                            rng.child(2)))
        elif name == "pairdis":
            tasks.append(PairDistanceTask(graph, config.pairdis_pairs,
                                          config.pairdis_cap, rng.child(3)))
        elif name == "dgi":
            tasks.append(ContrastTask(graph, config.dgi_samples))
        else:
            raise ConfigError(f"unknown task name: {name!r}")
    return tasks


def make_step_draw(graph: Graph, tasks: list[PretextTask], config: TaskConfig,
                   rng: RngStream) -> StepDraw:
    """Per-step index draws; empty unless a task needs corruption."""
    if not any(t.needs_corrupt for t in tasks):
        return StepDraw()
    n = graph.num_nodes
    k = min(config.dgi_samples, n)
    if k >= n:
        pos = np.arange(n, dtype=np.int64)
        neg = np.arange(n, dtype=np.int64)
    else:
        pos = np.sort(rng.choice(n, size=k, replace=False)).astype(np.int64)
        neg = np.sort(rng.choice(n, size=k, replace=False)).astype(np.int64)
    return StepDraw(corrupt_perm=rng.permutation(n).astype(np.int64),
                    dgi_pos=pos, dgi_neg=neg)
