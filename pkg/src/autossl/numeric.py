"""Dense/sparse numeric primitives: CSR matrices, Adam, gradient checking."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DimensionError, NumericError


@dataclass(eq=False)
class CsrMatrix:
    """Read-only CSR sparse matrix with float64 data and int64 indexing."""

    shape: tuple[int, int]
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    @property
    def nnz(self) -> int:
        return int(self.indices.shape[0])

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=np.float64)
        for i in range(self.shape[0]):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            out[i, self.indices[lo:hi]] = self.data[lo:hi]
        return out


def make_csr(shape, rows, cols, vals) -> CsrMatrix:
    """Build a CsrMatrix from COO triplets. Duplicates must not occur."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    indptr = np.zeros(shape[0] + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    np.cumsum(indptr, out=indptr)
    return CsrMatrix(tuple(shape), indptr, np.ascontiguousarray(cols),
                     np.ascontiguousarray(vals))


def spmm(sparse: CsrMatrix, dense: np.ndarray) -> np.ndarray:
    """Sparse @ dense. Raises DimensionError on inner-dimension mismatch."""
    dense = np.ascontiguousarray(dense, dtype=np.float64)
    if dense.ndim != 2 or dense.shape[0] != sparse.shape[1]:
        raise DimensionError(
            f"spmm: sparse is {sparse.shape}, dense is {dense.shape}"
        )
    return _kernels.csr_dense_matmul(sparse.indptr, sparse.indices,
                                     sparse.data, dense)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class AdamState:
    """Per-parameter-block Adam accumulator (bias-corrected)."""

    name: str
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: np.ndarray = field(default=None, repr=False)
    v: np.ndarray = field(default=None, repr=False)


def adam_init(name: str, shape, lr: float, beta1=0.9, beta2=0.999,
              eps=1e-8) -> AdamState:
    return AdamState(name=name, lr=lr, beta1=beta1, beta2=beta2, eps=eps,
                     m=np.zeros(shape), v=np.zeros(shape))


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> None:
    """One in-place Adam update of ``params``.

    With beta1 = beta2 = 0 this degenerates to
    ``p -= lr * g / (|g| + eps)`` (a signed step of roughly ``lr``).
    """
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise DimensionError(
            f"adam_step[{state.name}]: params {params.shape}, "
            f"grads {grads.shape}, state {state.m.shape}"
        )
    if not np.all(np.isfinite(grads)):
        raise NumericError(
            f"non-finite gradient entries in parameter block '{state.name}'"
        )
    state.step_count += 1
    t = state.step_count
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** t)
    v_hat = state.v / (1.0 - state.beta2 ** t)
    params -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass(eq=False)
class ParamBlock:
    """A trainable array paired with its Adam accumulator."""

    name: str
    value: np.ndarray
    adam: AdamState


def make_block(name: str, value: np.ndarray, lr: float) -> ParamBlock:
    return ParamBlock(name, value, adam_init(name, value.shape, lr))


# ---------------------------------------------------------------------------
# stable softmax / cross-entropy building blocks
# ---------------------------------------------------------------------------

def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over rows and its gradient w.r.t. logits."""
    n = logits.shape[0]
    probs = softmax_rows(logits)
    picked = np.clip(probs[np.arange(n), labels], 1e-300, None)
    loss = float(-np.log(picked).mean())
    grad = probs
    grad[np.arange(n), labels] -= 1.0
    grad /= n
    return loss, grad


def log_sigmoid(x: np.ndarray) -> np.ndarray:
    # log(sigmoid(x)) = -softplus(-x), stable on both tails
    return -np.logaddexp(0.0, -x)


# ---------------------------------------------------------------------------
# finite-difference gradient checking
# ---------------------------------------------------------------------------

def finite_diff_check(loss_fn, params: np.ndarray, analytic_grad: np.ndarray,
                      delta: float = 1e-5) -> float:
    """Max relative error between central differences and ``analytic_grad``.

    ``loss_fn(params) -> float`` must be deterministic; this is verified by
    evaluating it twice at the base point before perturbing anything.
    Relative error for one entry is ``|fd - g| / max(|fd|, 1e-8)``, so a
    gradient that is wrong by a factor of two scores about 1.0 rather
    than hiding behind a large denominator.
    """
    params = np.asarray(params, dtype=np.float64)
    if params.shape != analytic_grad.shape:
        raise DimensionError(
            f"finite_diff_check: params {params.shape} vs "
            f"grad {analytic_grad.shape}"
        )
    base_a = loss_fn(params)
    base_b = loss_fn(params)
    if base_a != base_b:
        raise NumericError(
            "finite_diff_check: loss_fn is not deterministic "
            f"({base_a!r} != {base_b!r})"
        )
    flat = params.ravel()
    grad_flat = np.asarray(analytic_grad, dtype=np.float64).ravel()
    worst = 0.0
    for i in range(flat.shape[0]):
        orig = flat[i]
        flat[i] = orig + delta
        up = loss_fn(params)
        flat[i] = orig - delta
        down = loss_fn(params)
        flat[i] = orig
        fd = (up - down) / (2.0 * delta)
        err = abs(fd - grad_flat[i]) / max(abs(fd), 1e-8)
        if err > worst:
            worst = err
    return worst
