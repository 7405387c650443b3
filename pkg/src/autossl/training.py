"""Shared training loop: weighted multi-task steps on the encoder.

Both searches drive this code. One step is: forward the encoder (twice
when a contrastive task needs a corrupted view), collect every task's
loss and gradients, combine the embedding gradients with the task
weights, backprop through the encoder, and apply Adam to the encoder and
to each active task head.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoder import (EncodeCache, EncoderConfig, EncoderState,
                      backward_from_cache, encode_features, init_encoder)
from .errors import ConfigError, NumericError
from .graph import Graph, normalized_adjacency
from .numeric import ParamBlock, adam_step
from .rng import RngStream
from .tasks import (PretextTask, StepDraw, TaskConfig, TaskResult,
                    make_step_draw, make_tasks)


@dataclass
class TrainConfig:
    epochs: int = 1000
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    tasks: TaskConfig = field(default_factory=TaskConfig)


@dataclass(eq=False)
class ForwardPass:
    """Everything computed at one parameter point, pre-update."""

    draw: StepDraw
    embeddings: np.ndarray
    cache: EncodeCache
    corrupt: np.ndarray | None
    cache_corrupt: EncodeCache | None
    results: list[TaskResult]


@dataclass(eq=False)
class TrainedModel:
    encoder: EncoderState
    heads: list[list[ParamBlock]]
    loss_history: np.ndarray       # combined loss per epoch
    task_loss_history: np.ndarray  # epochs x tasks


def check_weights(weights, num_tasks: int) -> np.ndarray:
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (num_tasks,):
        raise ConfigError(
            f"weights must have length {num_tasks}, got shape "
            f"{weights.shape}")
    if not np.all(np.isfinite(weights)):
        raise ConfigError("weights must be finite")
    return weights


def init_heads(tasks: list[PretextTask], hidden: int, lr: float,
               rng: RngStream) -> list[list[ParamBlock]]:
    return [task.init_head(hidden, lr, rng.child(i))
            for i, task in enumerate(tasks)]


def forward_pass(graph: Graph, tasks: list[PretextTask],
                 heads: list[list[ParamBlock]], enc: EncoderState,
                 task_cfg: TaskConfig, step_rng: RngStream) -> ForwardPass:
    adj = normalized_adjacency(graph)
    draw = make_step_draw(graph, tasks, task_cfg, step_rng)
    z, cache = encode_features(adj, graph.features, enc)
    corrupt = cache_c = None
    if draw.corrupt_perm is not None:
        corrupt, cache_c = encode_features(
            adj, graph.features[draw.corrupt_perm], enc)
    results = []
    for task, head in zip(tasks, heads):
        res = task.loss_and_grad(z, corrupt, head, draw)
        if not np.isfinite(res.loss):
            raise NumericError(f"task '{task.name}' produced a non-finite "
                               f"loss ({res.loss})")
        results.append(res)
    return ForwardPass(draw, z, cache, corrupt, cache_c, results)


def encoder_grad_flat(fp: ForwardPass, enc: EncoderState,
                      grad_z: np.ndarray,
                      grad_corrupt: np.ndarray | None) -> np.ndarray:
    """Flattened (weight, slope) gradient for an embedding-space gradient."""
    d_w, d_s = backward_from_cache(fp.cache, enc, grad_z)
    if grad_corrupt is not None and fp.cache_corrupt is not None:
        d_w2, d_s2 = backward_from_cache(fp.cache_corrupt, enc, grad_corrupt)
        d_w = d_w + d_w2
        d_s = d_s + d_s2
    return np.concatenate([d_w.ravel(), d_s.ravel()])


def encoder_grads_per_task(fp: ForwardPass,
                           enc: EncoderState) -> list[np.ndarray]:
    """Per-task encoder gradients, flattened; used by the meta-gradient."""
    return [encoder_grad_flat(fp, enc, res.grad_embeddings, res.grad_corrupt)
            for res in fp.results]


def apply_inner_update(fp: ForwardPass, enc: EncoderState,
                       heads: list[list[ParamBlock]],
                       weights: np.ndarray) -> float:
    """Adam-update encoder and heads from the weighted task gradients.

    Heads whose task weight is exactly 0 are left untouched (their
    gradient would be identically zero anyway). Returns the combined loss.
    """
    grad_z = np.zeros_like(fp.embeddings)
    grad_c = np.zeros_like(fp.corrupt) if fp.corrupt is not None else None
    total = 0.0
    for w, res in zip(weights, fp.results):
        total += w * res.loss
        if w == 0.0:
            continue
        grad_z += w * res.grad_embeddings
        if res.grad_corrupt is not None and grad_c is not None:
            grad_c += w * res.grad_corrupt
    d_weight, d_slope = backward_from_cache(fp.cache, enc, grad_z)
    if grad_c is not None and fp.cache_corrupt is not None:
        d_w2, d_s2 = backward_from_cache(fp.cache_corrupt, enc, grad_c)
        d_weight += d_w2
        d_slope += d_s2
    adam_step(enc.weight, d_weight, enc.adam_weight)
    adam_step(enc.prelu_slope, d_slope, enc.adam_slope)
    for w, res, head in zip(weights, fp.results, heads):
        if w == 0.0:
            continue
        for block, grad in zip(head, res.head_grads):
            adam_step(block.value, w * grad, block.adam)
    return total


def train_with_weights(graph: Graph, tasks: list[PretextTask],
                       weights, config: TrainConfig,
                       rng: RngStream) -> TrainedModel:
    """Train a fresh encoder for ``config.epochs`` steps at fixed weights.

    Child streams: 0 encoder init, 1 head init, 2 the per-step draws. Two
    calls with equal arguments produce bit-identical models.
    """
    weights = check_weights(weights, len(tasks))
    enc = init_encoder(graph.features.shape[1], config.encoder, rng.child(0))
    heads = init_heads(tasks, config.encoder.hidden,
                       config.encoder.learning_rate, rng.child(1))
    step_rng = rng.child(2)
    losses = np.empty(config.epochs)
    task_losses = np.empty((config.epochs, len(tasks)))
    for epoch in range(config.epochs):
        fp = forward_pass(graph, tasks, heads, enc, config.tasks, step_rng)
        losses[epoch] = apply_inner_update(fp, enc, heads, weights)
        task_losses[epoch] = [r.loss for r in fp.results]
    return TrainedModel(enc, heads, losses, task_losses)


__all__ = [
    "TrainConfig", "ForwardPass", "TrainedModel", "check_weights",
    "init_heads", "forward_pass", "encoder_grad_flat",
    "encoder_grads_per_task", "apply_inner_update", "train_with_weights",
    "make_tasks",
]
