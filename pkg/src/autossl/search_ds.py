"""Gradient-based search over task weights via a one-step meta-gradient.

One iteration: take the usual weighted Adam step on the encoder, cluster
the updated embeddings, measure the edge smoothness loss there, and push
the task weights along

    d_i = -lr_inner * <grad_theta smooth(theta_next), grad_theta loss_i(theta)>

which is the exact weight gradient of the smoothness loss through a
one-step plain-SGD model of the inner update. Weights move with an outer
Adam step and are clipped back to [0, 1]. A task whose gradient aligns
with descending the smoothness loss has d_i < 0, so its weight grows.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .clustering import (homophily_loss_grad_embeddings, kmeans)
from .encoder import (EncoderState, backward_from_cache, encode_features,
                      init_encoder)
from .evaluation import nmi
from .graph import Graph, homophily, normalized_adjacency
from .numeric import adam_init, adam_step
from .rng import RngStream
from .tasks import PretextTask
from .training import (TrainConfig, apply_inner_update,
                       encoder_grads_per_task, forward_pass, init_heads)


@dataclass
class DsConfig:
    outer_lr: float = 0.05
    lambda_init: float = 0.5
    k_clusters: int = 5
    eval_interval: int = 20
    two_sigma_sq: float = 0.001
    step_kmeans_restarts: int = 1   # per-iteration centroids
    eval_kmeans_restarts: int = 3   # periodic pseudo-homophily checkpoints


@dataclass(eq=False)
class DsRecord:
    iteration: int
    weights: np.ndarray
    combined_loss: float
    task_losses: np.ndarray
    smooth_loss: float
    meta_grad: np.ndarray
    pseudo_homophily: float  # nan between evaluation points
    nmi: float               # nan unless evaluated and labels exist
    ms: int


@dataclass(eq=False)
class DsResult:
    records: list
    final_weights: np.ndarray
    best_encoder: EncoderState | None
    best_pseudo_homophily: float
    best_iteration: int
    best_nmi: float


def run_ds(graph: Graph, tasks: list[PretextTask], ds_cfg: DsConfig,
           train_cfg: TrainConfig, rng: RngStream,
           on_record=None) -> DsResult:
    """Meta-gradient search for ``train_cfg.epochs`` iterations.

    The reported checkpoint is the encoder state at the best evaluated
    pseudo-homophily; evaluations happen at iteration 1, every
    ``eval_interval`` iterations, and at the last iteration.
    """
    adj = normalized_adjacency(graph)
    inner_lr = train_cfg.encoder.learning_rate
    enc = init_encoder(graph.features.shape[1], train_cfg.encoder,
                       rng.child(0))
    heads = init_heads(tasks, train_cfg.encoder.hidden, inner_lr,
                       rng.child(1))
    step_rng = rng.child(2)
    eval_rng = rng.child(3)
    centroid_rng = rng.child(4)

    weights = np.full(len(tasks), float(ds_cfg.lambda_init))
    weights_adam = adam_init("task_weights", weights.shape, ds_cfg.outer_lr)

    records: list[DsRecord] = []
    result = DsResult(records, weights, None, -np.inf, 0, np.nan)
    total = train_cfg.epochs
    for it in range(1, total + 1):
        started = time.perf_counter()

        fp = forward_pass(graph, tasks, heads, enc, train_cfg.tasks,
                          step_rng)
        task_grads = encoder_grads_per_task(fp, enc)
        combined_loss = apply_inner_update(fp, enc, heads, weights)

        z_next, cache_next = encode_features(adj, graph.features, enc)
        cluster = kmeans(z_next, ds_cfg.k_clusters, centroid_rng.child(it),
                         restarts=ds_cfg.step_kmeans_restarts)
        cluster.two_sigma_sq = ds_cfg.two_sigma_sq
        smooth, g_embed = homophily_loss_grad_embeddings(graph, z_next,
                                                         cluster)
        d_w, d_s = backward_from_cache(cache_next, enc, g_embed)
        g_smooth = np.concatenate([d_w.ravel(), d_s.ravel()])

        meta_grad = -inner_lr * np.array([float(g_smooth @ g_task)
                                          for g_task in task_grads])
        adam_step(weights, meta_grad, weights_adam)
        np.clip(weights, 0.0, 1.0, out=weights)

        ph = np.nan
        score = np.nan
        if it == 1 or it == total or it % ds_cfg.eval_interval == 0:
            eval_cluster = kmeans(z_next, ds_cfg.k_clusters,
                                  eval_rng.child(it),
                                  restarts=ds_cfg.eval_kmeans_restarts)
            ph = homophily(graph, eval_cluster.hard_labels)
            if graph.labels is not None:
                score = nmi(eval_cluster.hard_labels, graph.labels)
            if ph > result.best_pseudo_homophily:
                result.best_pseudo_homophily = float(ph)
                result.best_iteration = it
                result.best_encoder = enc.copy()
                result.best_nmi = float(score)

        rec = DsRecord(
            iteration=it,
            weights=weights.copy(),
            combined_loss=float(combined_loss),
            task_losses=np.array([r.loss for r in fp.results]),
            smooth_loss=float(smooth),
            meta_grad=meta_grad,
            pseudo_homophily=float(ph),
            nmi=float(score),
            ms=int(1000 * (time.perf_counter() - started)),
        )
        records.append(rec)
        if on_record is not None:
            on_record(rec)

    result.final_weights = weights.copy()
    return result
