"""Downstream evaluation: NMI, clustering agreement, and a linear probe."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import kmeans
from .errors import DimensionError
from .graph import Graph, homophily
from .numeric import softmax_cross_entropy
from .rng import RngStream


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def nmi(labels_a, labels_b) -> float:
    """Normalized mutual information, arithmetic-mean normalization.

    Returns 0 when either labeling is constant (zero entropy), so a
    degenerate clustering never scores well.
    """
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError(
            f"label vectors must match, got {a.shape} and {b.shape}")
    n = a.shape[0]
    _, a_ids = np.unique(a, return_inverse=True)
    _, b_ids = np.unique(b, return_inverse=True)
    ka, kb = a_ids.max() + 1, b_ids.max() + 1
    contingency = np.zeros((ka, kb))
    np.add.at(contingency, (a_ids, b_ids), 1.0)
    h_a = _entropy(contingency.sum(axis=1))
    h_b = _entropy(contingency.sum(axis=0))
    if h_a == 0.0 or h_b == 0.0:
        return 0.0
    joint = contingency / n
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    mask = joint > 0
    mi = float((joint[mask] * np.log(joint[mask]
                                     / (pa @ pb)[mask])).sum())
    return mi / ((h_a + h_b) / 2.0)


@dataclass(eq=False)
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray


def make_split(n: int, rng: RngStream,
               fractions=(0.1, 0.1, 0.8)) -> Split:
    """Random node split; sizes are floor(frac * n) with the test side
    absorbing the remainder."""
    if len(fractions) != 3 or min(fractions) < 0 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must be 3 nonnegatives summing to 1, "
                         f"got {fractions}")
    perm = rng.permutation(n)
    n_train = int(fractions[0] * n)
    n_val = int(fractions[1] * n)
    return Split(train=np.sort(perm[:n_train]),
                 val=np.sort(perm[n_train:n_train + n_val]),
                 test=np.sort(perm[n_train + n_val:]))


@dataclass
class ProbeResult:
    accuracy: float
    val_accuracy: float
    iterations: int
    converged: bool


def logistic_probe(embeddings: np.ndarray, labels: np.ndarray, split: Split,
                   l2: float = 1e-4, max_iter: int = 2000,
                   tol: float = 1e-5) -> ProbeResult:
    """Multinomial logistic regression on frozen embeddings.

    Deterministic by construction: zero-initialized weights, full-batch
    gradient descent with step size 1 / L where L upper-bounds the loss
    curvature, stopping at gradient norm <= tol or max_iter.
    """
    labels = np.asarray(labels, dtype=np.int64)
    classes = np.unique(labels)
    class_ids = np.searchsorted(classes, labels)
    num_classes = classes.shape[0]
    x = embeddings[split.train]
    y = class_ids[split.train]
    n, d = x.shape

    # softmax cross-entropy has Hessian bounded by 0.5 * X^T X / n
    gram_top = float(np.linalg.eigvalsh(x.T @ x)[-1])
    lr = 1.0 / (0.5 * gram_top / n + l2)

    w = np.zeros((d, num_classes))
    b = np.zeros(num_classes)
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        _, g_logits = softmax_cross_entropy(x @ w + b[None, :], y)
        g_w = x.T @ g_logits + l2 * w
        g_b = g_logits.sum(axis=0)
        gnorm = np.sqrt((g_w * g_w).sum() + (g_b * g_b).sum())
        if gnorm <= tol:
            converged = True
            break
        w -= lr * g_w
        b -= lr * g_b

    def acc(idx):
        if idx.size == 0:
            return 0.0
        pred = np.argmax(embeddings[idx] @ w + b[None, :], axis=1)
        return float((pred == class_ids[idx]).mean())

    return ProbeResult(accuracy=acc(split.test), val_accuracy=acc(split.val),
                       iterations=iterations, converged=converged)


def cluster_eval(embeddings: np.ndarray, labels, rng: RngStream,
                 k: int | None = None, restarts: int = 3) -> float:
    """NMI between a k-means clustering of the embeddings and the labels.

    k defaults to the number of distinct ground-truth classes.
    """
    labels = np.asarray(labels)
    if k is None:
        k = int(np.unique(labels).shape[0])
    model = kmeans(embeddings, k, rng, restarts=restarts)
    return nmi(model.hard_labels, labels)


def graph_stats(graph: Graph) -> dict:
    """Descriptive statistics for reports."""
    stats = {
        "num_nodes": graph.num_nodes,
        "num_edges": graph.num_edges,
        "feature_dim": int(graph.features.shape[1]),
        "max_degree": graph.max_degree,
    }
    if graph.labels is not None:
        stats["num_classes"] = int(np.unique(graph.labels).shape[0])
        if graph.num_edges:
            stats["homophily"] = homophily(graph, graph.labels)
    return stats
