"""Dense 2-D tensors with reverse-mode gradients over a fixed op vocabulary.

Every op is a free function taking and returning Tensor objects; calling an
op appends a node to the implicit computation graph held by parent links.
``backward(loss)`` walks that graph once in reverse topological order and
accumulates gradients additively into every tensor that requires them.

The op set is deliberately closed: matmul, spmm, add, relu, scale,
scalar_mul, row_l2_normalize, softmax_rows, concat_cols, gather_rows,
row_dot, softplus_elem, weighted_sum, sum_all, dropout. Each one has a
finite-difference test.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as _sp

__all__ = [
    "Tensor",
    "SparseMatrix",
    "backward",
    "matmul",
    "spmm",
    "add",
    "relu",
    "scale",
    "scalar_mul",
    "row_l2_normalize",
    "softmax_rows",
    "concat_cols",
    "gather_rows",
    "row_dot",
    "softplus",
    "softplus_elem",
    "weighted_sum",
    "sum_all",
    "dropout",
]


class Tensor:
    """A 2-D float64 array with optional gradient tracking.

    Scalars are stored as (1, 1) tensors and 1-D input is promoted to a
    single row. ``grad`` is lazily allocated and accumulates across ops and
    across repeated backward passes; call ``zero_grad`` between steps.
    """

    __slots__ = ("values", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, values, requires_grad: bool = False):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim != 2:
            raise ValueError(f"tensors are 2-D, got ndim={arr.ndim}")
        self.values = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def item(self) -> float:
        if self.values.size != 1:
            raise ValueError(f"item() needs a scalar tensor, shape is {self.shape}")
        return float(self.values[0, 0])

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        self.grad += g

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _result(values: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    out = Tensor(values)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward_fn = backward_fn
    return out


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(tensor) into .grad for every reachable tensor."""
    if loss.values.size != 1:
        raise ValueError("backward expects a scalar loss tensor")
    # Iterative DFS topological order; graphs can be deep at many layers.
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    loss.accumulate_grad(np.ones_like(loss.values))
    for node in reversed(topo):
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)


@dataclass(frozen=True)
class SparseMatrix:
    """CSR sparse matrix (offsets, column indices, values) with fixed shape."""

    offsets: np.ndarray
    indices: np.ndarray
    values: np.ndarray
    shape: tuple[int, int]

    def __post_init__(self):
        offsets = np.asarray(self.offsets, dtype=np.int64)
        indices = np.asarray(self.indices, dtype=np.int64)
        values = np.asarray(self.values, dtype=np.float64)
        rows, cols = self.shape
        if offsets.shape != (rows + 1,):
            raise ValueError("offsets must have length rows+1")
        if offsets[0] != 0 or offsets[-1] != indices.size or np.any(np.diff(offsets) < 0):
            raise ValueError("offsets must be monotone from 0 to nnz")
        if values.shape != indices.shape:
            raise ValueError("values and indices must align")
        if indices.size and (indices.min() < 0 or indices.max() >= cols):
            raise ValueError("column index out of range")
        if not np.isfinite(values).all():
            raise ValueError("sparse values must be finite")
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "values", values)

    @cached_property
    def _mat(self):
        return _sp.csr_array((self.values, self.indices, self.offsets), shape=self.shape)

    @cached_property
    def _mat_t(self):
        return self._mat.T.tocsr()

    @classmethod
    def from_scipy(cls, mat) -> "SparseMatrix":
        csr = _sp.csr_array(mat)
        csr.sum_duplicates()
        csr.sort_indices()
        return cls(csr.indptr.copy(), csr.indices.copy(), csr.data.copy(), csr.shape)

    def to_dense(self) -> np.ndarray:
        return self._mat.toarray()


# ---------------------------------------------------------------------------
# ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Dense product a @ b, gradient-tracked in both arguments."""
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")
    vals = a.values @ b.values

    def grad_fn(g):
        if a.requires_grad:
            a.accumulate_grad(g @ b.values.T)
        if b.requires_grad:
            b.accumulate_grad(a.values.T @ g)

    return _result(vals, (a, b), grad_fn)


def spmm(s: SparseMatrix, x: Tensor) -> Tensor:
    """Sparse-dense product s @ x; gradient flows to x only."""
    if s.shape[1] != x.shape[0]:
        raise ValueError(f"spmm shape mismatch {s.shape} @ {x.shape}")
    vals = s._mat @ x.values

    def grad_fn(g):
        if x.requires_grad:
            x.accumulate_grad(s._mat_t @ g)

    return _result(vals, (x,), grad_fn)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; b may be a (1, cols) row bias broadcast over rows."""
    if a.shape == b.shape:
        bias = False
    elif b.shape == (1, a.shape[1]):
        bias = True
    else:
        raise ValueError(f"add shape mismatch {a.shape} + {b.shape}")
    vals = a.values + b.values

    def grad_fn(g):
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            b.accumulate_grad(g.sum(axis=0, keepdims=True) if bias else g)

    return _result(vals, (a, b), grad_fn)


def relu(x: Tensor) -> Tensor:
    """max(x, 0); the subgradient at exactly 0 is taken as 0."""
    mask = x.values > 0
    vals = np.where(mask, x.values, 0.0)

    def grad_fn(g):
        if x.requires_grad:
            x.accumulate_grad(g * mask)

    return _result(vals, (x,), grad_fn)


def scale(x: Tensor, c: float) -> Tensor:
    """Multiply by a python constant (not gradient-tracked in c)."""
    c = float(c)
    vals = x.values * c

    def grad_fn(g):
        if x.requires_grad:
            x.accumulate_grad(g * c)

    return _result(vals, (x,), grad_fn)


def scalar_mul(s: Tensor, x: Tensor) -> Tensor:
    """Multiply x by a learnable (1, 1) scalar tensor s."""
    if s.shape != (1, 1):
        raise ValueError("scalar_mul expects a (1, 1) scalar tensor")
    c = s.values[0, 0]
    vals = x.values * c

    def grad_fn(g):
        if s.requires_grad:
            s.accumulate_grad(np.array([[np.sum(g * x.values)]]))
        if x.requires_grad:
            x.accumulate_grad(g * c)

    return _result(vals, (s, x), grad_fn)


def row_l2_normalize(x: Tensor) -> Tensor:
    """Scale each row to unit L2 norm; all-zero rows stay zero with zero grad."""
    norms = np.linalg.norm(x.values, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    vals = x.values / safe

    def grad_fn(g):
        if x.requires_grad:
            inner = (g * vals).sum(axis=1, keepdims=True)
            gx = (g - vals * inner) / safe
            gx[norms[:, 0] == 0] = 0.0
            x.accumulate_grad(gx)

    return _result(vals, (x,), grad_fn)


def softmax_rows(x: Tensor) -> Tensor:
    """Numerically stable row-wise softmax."""
    shifted = x.values - x.values.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    vals = e / e.sum(axis=1, keepdims=True)

    def grad_fn(g):
        if x.requires_grad:
            inner = (g * vals).sum(axis=1, keepdims=True)
            x.accumulate_grad(vals * (g - inner))

    return _result(vals, (x,), grad_fn)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate two row-aligned tensors side by side."""
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"concat_cols row mismatch {a.shape} | {b.shape}")
    vals = np.hstack([a.values, b.values])
    split = a.shape[1]

    def grad_fn(g):
        if a.requires_grad:
            a.accumulate_grad(g[:, :split])
        if b.requires_grad:
            b.accumulate_grad(g[:, split:])

    return _result(vals, (a, b), grad_fn)


def gather_rows(x: Tensor, idx) -> Tensor:
    """Select rows x[idx]; duplicate indices accumulate gradient additively."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError("gather_rows takes a 1-D index array")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise IndexError("gather_rows index out of range")
    vals = x.values[idx]

    def grad_fn(g):
        if x.requires_grad:
            gx = np.zeros_like(x.values)
            np.add.at(gx, idx, g)
            x.accumulate_grad(gx)

    return _result(vals, (x,), grad_fn)


def row_dot(a: Tensor, b: Tensor) -> Tensor:
    """Per-row inner product, returned as an (n, 1) column."""
    if a.shape != b.shape:
        raise ValueError(f"row_dot shape mismatch {a.shape} vs {b.shape}")
    vals = (a.values * b.values).sum(axis=1, keepdims=True)

    def grad_fn(g):
        if a.requires_grad:
            a.accumulate_grad(g * b.values)
        if b.requires_grad:
            b.accumulate_grad(g * a.values)

    return _result(vals, (a, b), grad_fn)


def softplus(x: float) -> float:
    """Overflow-safe log(1 + exp(x)) for python scalars."""
    x = float(x)
    return max(x, 0.0) + float(np.log1p(np.exp(-abs(x))))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softplus_elem(x: Tensor) -> Tensor:
    """Elementwise overflow-safe softplus."""
    vals = np.maximum(x.values, 0.0) + np.log1p(np.exp(-np.abs(x.values)))

    def grad_fn(g):
        if x.requires_grad:
            x.accumulate_grad(g * _sigmoid(x.values))

    return _result(vals, (x,), grad_fn)


def weighted_sum(x: Tensor, w) -> Tensor:
    """Scalar sum(x * w) for a constant weight array shaped like x."""
    w = np.asarray(w, dtype=np.float64)
    if w.shape != x.shape:
        raise ValueError(f"weighted_sum weight shape {w.shape} != {x.shape}")
    vals = np.array([[np.sum(x.values * w)]])

    def grad_fn(g):
        if x.requires_grad:
            x.accumulate_grad(g[0, 0] * w)

    return _result(vals, (x,), grad_fn)


def sum_all(x: Tensor) -> Tensor:
    """Scalar sum of all entries."""
    vals = np.array([[x.values.sum()]])

    def grad_fn(g):
        if x.requires_grad:
            x.accumulate_grad(np.full_like(x.values, g[0, 0]))

    return _result(vals, (x,), grad_fn)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted-scaling dropout; rate 0 is the identity and draws nothing."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    if rate == 0.0:
        return x
    keep = rng.random(x.shape) >= rate
    factor = 1.0 / (1.0 - rate)
    vals = x.values * keep * factor

    def grad_fn(g):
        if x.requires_grad:
            x.accumulate_grad(g * keep * factor)

    return _result(vals, (x,), grad_fn)
