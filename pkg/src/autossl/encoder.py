"""One-layer graph convolutional encoder with a per-channel PReLU.

Forward: Z = prelu(norm_adj @ X @ W). The backward pass is written by
hand (reverse mode) rather than autodiff so that the whole package stays a
plain numpy program; ``numeric.finite_diff_check`` pins it down in tests.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .graph import Graph, normalized_adjacency
from .numeric import AdamState, CsrMatrix, adam_init, spmm
from .rng import RngStream


@dataclass
class EncoderConfig:
    hidden: int = 512
    learning_rate: float = 0.001
    prelu_init: float = 0.25


@dataclass(eq=False)
class EncoderState:
    """Trainable encoder parameters plus their Adam accumulators."""

    weight: np.ndarray       # d_in x hidden
    prelu_slope: np.ndarray  # hidden, negative-side slope per channel
    adam_weight: AdamState
    adam_slope: AdamState

    @property
    def hidden(self) -> int:
        return int(self.weight.shape[1])

    def copy(self) -> "EncoderState":
        st = EncoderState(self.weight.copy(), self.prelu_slope.copy(),
                          self.adam_weight, self.adam_slope)
        return st


@dataclass(eq=False)
class EncodeCache:
    """Intermediates kept from a forward pass for the matching backward."""

    propagated: np.ndarray     # norm_adj @ X, N x d_in
    preactivation: np.ndarray  # propagated @ W, N x hidden
    embeddings: np.ndarray     # prelu(preactivation)


def init_encoder(d_in: int, config: EncoderConfig, rng: RngStream,
                 ) -> EncoderState:
    """Glorot-uniform weight, constant PReLU slope."""
    limit = np.sqrt(6.0 / (d_in + config.hidden))
    weight = rng.uniform(-limit, limit, size=(d_in, config.hidden))
    slope = np.full(config.hidden, config.prelu_init, dtype=np.float64)
    return EncoderState(
        weight=weight,
        prelu_slope=slope,
        adam_weight=adam_init("encoder.weight", weight.shape,
                              config.learning_rate),
        adam_slope=adam_init("encoder.prelu_slope", slope.shape,
                             config.learning_rate),
    )


def _prelu(pre: np.ndarray, slope: np.ndarray) -> np.ndarray:
    return np.where(pre > 0.0, pre, pre * slope[None, :])


def encode_features(adj: CsrMatrix, features: np.ndarray,
                    state: EncoderState) -> tuple[np.ndarray, EncodeCache]:
    """Forward pass on explicit (adjacency, features); returns (Z, cache)."""
    if features.shape[1] != state.weight.shape[0]:
        raise DimensionError(
            f"encoder expects {state.weight.shape[0]} input features, "
            f"got {features.shape[1]}")
    propagated = spmm(adj, features)
    pre = propagated @ state.weight
    z = _prelu(pre, state.prelu_slope)
    return z, EncodeCache(propagated, pre, z)


def encode(graph: Graph, state: EncoderState) -> np.ndarray:
    """Embeddings for the graph's own features."""
    z, _ = encode_features(normalized_adjacency(graph), graph.features, state)
    return z


def backward_from_cache(cache: EncodeCache, state: EncoderState,
                        grad_embeddings: np.ndarray,
                        ) -> tuple[np.ndarray, np.ndarray]:
    """Gradients (d_weight, d_slope) given dLoss/dZ from a cached forward."""
    pre = cache.preactivation
    pos = pre > 0.0
    # at exactly 0 the preactivation contributes nothing either way; the
    # negative branch is used so the slope subgradient stays consistent
    d_pre = np.where(pos, grad_embeddings,
                     grad_embeddings * state.prelu_slope[None, :])
    d_slope = np.where(pos, 0.0, grad_embeddings * pre).sum(axis=0)
    d_weight = cache.propagated.T @ d_pre
    return d_weight, d_slope


def encode_backward(graph: Graph, state: EncoderState,
                    grad_embeddings: np.ndarray,
                    ) -> tuple[np.ndarray, np.ndarray]:
    """Convenience wrapper: rerun the forward, then backprop through it."""
    _, cache = encode_features(normalized_adjacency(graph), graph.features,
                               state)
    return backward_from_cache(cache, state, grad_embeddings)


def save_checkpoint(path, state: EncoderState) -> None:
    """Persist weights losslessly (Adam slots are not part of a checkpoint)."""
    np.savez(path, weight=state.weight, prelu_slope=state.prelu_slope,
             weight_steps=np.int64(state.adam_weight.step_count),
             learning_rate=np.float64(state.adam_weight.lr))


def load_checkpoint(path) -> EncoderState:
    with np.load(path) as blob:
        weight = blob["weight"]
        slope = blob["prelu_slope"]
        steps = int(blob["weight_steps"])
        lr = float(blob["learning_rate"])
    state = EncoderState(
        weight=weight, prelu_slope=slope,
        adam_weight=adam_init("encoder.weight", weight.shape, lr),
        adam_slope=adam_init("encoder.prelu_slope", slope.shape, lr),
    )
    state.adam_weight.step_count = steps
    state.adam_slope.step_count = steps
    return state
