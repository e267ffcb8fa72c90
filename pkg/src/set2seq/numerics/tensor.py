"""Reverse-mode automatic differentiation over 2-D numpy matrices.

A Tensor wraps a float32/float64 matrix of shape (rows, cols) and records
the operation that produced it.  Calling backward() on a scalar-valued
Tensor walks the recorded graph in reverse creation order (creation order
is a valid topological order, since parents always exist before children)
and accumulates gradients into the leaf tensors that were created with
requires_grad=True.

The op set is deliberately small: just what an attention encoder, an LSTM
pointer decoder, and their losses need.  Scalars are (1, 1) matrices.
Masks are plain numpy bool arrays, never Tensors.
"""

from __future__ import annotations

import itertools
from contextlib import contextmanager
from typing import Callable, Sequence

import numpy as np

from .rng import SeededRng

_COUNTER = itertools.count()
_GRAD_ENABLED = True

# Finite stand-in for log(0) in masked log-softmax outputs: exp() underflows
# to exactly 0.0 in both float32 and float64, so probabilities stay exact
# zeros while matrix values stay finite.
NEG_CAP = -1.0e9


@contextmanager
def no_grad():
    """Disable graph recording inside the block (evaluation / decoding)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp", "_idx")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ValueError(f"Tensor data must be 2-D, got shape {arr.shape}")
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._vjp: Callable | None = None
        self._idx = next(_COUNTER)

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into each requires_grad leaf's .grad."""
        if self.data.size != 1:
            raise ValueError(f"backward() requires a scalar tensor, got shape {self.shape}")
        if not self.requires_grad:
            raise ValueError("backward() on a tensor that does not require grad")
        # Reachable subgraph, then reverse creation order.
        nodes: list[Tensor] = []
        seen = {id(self)}
        stack = [self]
        while stack:
            t = stack.pop()
            nodes.append(t)
            for p in t._parents:
                if p.requires_grad and id(p) not in seen:
                    seen.add(id(p))
                    stack.append(p)
        nodes.sort(key=lambda t: t._idx, reverse=True)

        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for t in nodes:
            g = grads.pop(id(t), None)
            if g is None:
                continue
            if t._vjp is None:
                # Leaf: accumulate into .grad.
                if t.grad is None:
                    t.grad = np.zeros_like(t.data)
                t.grad += g
                continue
            for p, pg in zip(t._parents, t._vjp(g)):
                if pg is None or not p.requires_grad:
                    continue
                prev = grads.get(id(p))
                # Never mutate stored arrays in place: vjp outputs may alias g.
                grads[id(p)] = pg if prev is None else prev + pg

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, _coerce(other, self.dtype))

    def __radd__(self, other):
        return add(_coerce(other, self.dtype), self)

    def __sub__(self, other):
        return sub(self, _coerce(other, self.dtype))

    def __rsub__(self, other):
        return sub(_coerce(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, _coerce(other, self.dtype))

    def __rmul__(self, other):
        return mul(_coerce(other, self.dtype), self)

    def __truediv__(self, other):
        return div(self, _coerce(other, self.dtype))

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}, requires_grad={self.requires_grad})"


def _coerce(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def _node(data: np.ndarray, parents: tuple[Tensor, ...], vjp: Callable) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._vjp = vjp
    return out


def _check_same_dtype(*ts: Tensor) -> None:
    d0 = ts[0].dtype
    for t in ts[1:]:
        if t.dtype != d0:
            raise ValueError(f"mixed dtypes in op: {d0} vs {t.dtype}")


def _unbroadcast(g: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Sum g over the axes that were broadcast up from `shape`."""
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    if g.shape != shape:
        raise ValueError(f"cannot reduce gradient of shape {g.shape} to {shape}")
    return g


def _check_broadcastable(a: Tensor, b: Tensor, op: str) -> None:
    ra, ca = a.shape
    rb, cb = b.shape
    if (ra != rb and 1 not in (ra, rb)) or (ca != cb and 1 not in (ca, cb)):
        raise ValueError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


# -- elementwise binary ops ---------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same_dtype(a, b)
    _check_broadcastable(a, b, "add")
    out = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _node(out, (a, b), vjp)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same_dtype(a, b)
    _check_broadcastable(a, b, "sub")
    out = a.data - b.data

    def vjp(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _node(out, (a, b), vjp)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_dtype(a, b)
    _check_broadcastable(a, b, "mul")
    out = a.data * b.data

    def vjp(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _node(out, (a, b), vjp)


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_same_dtype(a, b)
    _check_broadcastable(a, b, "div")
    out = a.data / b.data

    def vjp(g):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return ga, gb

    return _node(out, (a, b), vjp)


def neg(a: Tensor) -> Tensor:
    return _node(-a.data, (a,), lambda g: (-g,))


# -- matrix ops ----------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    _check_same_dtype(a, b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: inner dims differ, {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def vjp(g):
        return g @ b.data.T, a.data.T @ g

    return _node(out, (a, b), vjp)


def transpose(a: Tensor) -> Tensor:
    return _node(a.data.T.copy(), (a,), lambda g: (g.T.copy(),))


# -- elementwise unary ops ------------------------------------------------

def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _node(out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    out = np.log(a.data)
    return _node(out, (a,), lambda g: (g / a.data,))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _node(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _node(out, (a,), lambda g: (g * out * (1.0 - out),))


def relu(a: Tensor) -> Tensor:
    out = np.maximum(a.data, 0.0)
    return _node(out, (a,), lambda g: (g * (a.data > 0),))


def square(a: Tensor) -> Tensor:
    return _node(a.data * a.data, (a,), lambda g: (g * (2.0 * a.data),))


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return _node(out, (a,), lambda g: (g * (0.5 / out),))


def softplus(a: Tensor) -> Tensor:
    """log(1 + exp(x)), computed without overflow."""
    x = a.data
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))

    def vjp(g):
        s = np.empty_like(x)
        pos = x >= 0
        s[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        s[~pos] = ex / (1.0 + ex)
        return (g * s,)

    return _node(out, (a,), vjp)


# -- reductions ------------------------------------------------------------

def sum_all(a: Tensor) -> Tensor:
    out = np.array([[a.data.sum()]], dtype=a.dtype)
    return _node(out, (a,), lambda g: (np.full_like(a.data, g.reshape(-1)[0]),))


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    out = np.array([[a.data.mean()]], dtype=a.dtype)
    return _node(out, (a,), lambda g: (np.full_like(a.data, g.reshape(-1)[0] / n),))


def row_mean(a: Tensor) -> Tensor:
    """Per-row mean over columns: (r, c) -> (r, 1)."""
    c = a.shape[1]
    out = a.data.mean(axis=1, keepdims=True)
    return _node(out, (a,), lambda g: (np.repeat(g / c, c, axis=1),))


# -- structural ops ---------------------------------------------------------

def concat_rows(tensors: Sequence[Tensor]) -> Tensor:
    tensors = list(tensors)
    _check_same_dtype(*tensors)
    cols = tensors[0].shape[1]
    for t in tensors[1:]:
        if t.shape[1] != cols:
            raise ValueError(f"concat_rows: column mismatch {t.shape[1]} vs {cols}")
    out = np.concatenate([t.data for t in tensors], axis=0)
    splits = np.cumsum([t.shape[0] for t in tensors])[:-1]

    def vjp(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=0))

    return _node(out, tuple(tensors), vjp)


def concat_cols(tensors: Sequence[Tensor]) -> Tensor:
    tensors = list(tensors)
    _check_same_dtype(*tensors)
    rows = tensors[0].shape[0]
    for t in tensors[1:]:
        if t.shape[0] != rows:
            raise ValueError(f"concat_cols: row mismatch {t.shape[0]} vs {rows}")
    out = np.concatenate([t.data for t in tensors], axis=1)
    splits = np.cumsum([t.shape[1] for t in tensors])[:-1]

    def vjp(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, splits, axis=1))

    return _node(out, tuple(tensors), vjp)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    if not (0 <= start < stop <= a.shape[0]):
        raise ValueError(f"slice_rows: bad range [{start}, {stop}) for {a.shape[0]} rows")
    out = a.data[start:stop].copy()

    def vjp(g):
        buf = np.zeros_like(a.data)
        buf[start:stop] = g
        return (buf,)

    return _node(out, (a,), vjp)


def slice_cols(a: Tensor, start: int, stop: int) -> Tensor:
    if not (0 <= start < stop <= a.shape[1]):
        raise ValueError(f"slice_cols: bad range [{start}, {stop}) for {a.shape[1]} cols")
    out = a.data[:, start:stop].copy()

    def vjp(g):
        buf = np.zeros_like(a.data)
        buf[:, start:stop] = g
        return (buf,)

    return _node(out, (a,), vjp)


def take_rows(a: Tensor, indices) -> Tensor:
    idx = np.asarray(indices, dtype=np.intp).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise ValueError(f"take_rows: index out of range for {a.shape[0]} rows")
    out = a.data[idx].copy()

    def vjp(g):
        buf = np.zeros_like(a.data)
        np.add.at(buf, idx, g)
        return (buf,)

    return _node(out, (a,), vjp)


def repeat_rows(a: Tensor, times: int) -> Tensor:
    """Each row repeated `times` consecutive times: (r, c) -> (r*times, c)."""
    out = np.repeat(a.data, times, axis=0)
    r, c = a.shape
    return _node(out, (a,), lambda g: (g.reshape(r, times, c).sum(axis=1),))


def tile_rows(a: Tensor, times: int) -> Tensor:
    """Whole matrix stacked `times` times: (r, c) -> (times*r, c)."""
    out = np.tile(a.data, (times, 1))
    r, c = a.shape
    return _node(out, (a,), lambda g: (g.reshape(times, r, c).sum(axis=0),))


# -- masked attention ops ----------------------------------------------------

def _norm_mask(mask, shape: tuple[int, int]) -> np.ndarray:
    if mask is None:
        return np.ones(shape, dtype=bool)
    m = np.asarray(mask)
    if m.dtype != np.bool_:
        raise ValueError(f"mask must be boolean, got dtype {m.dtype}")
    if m.ndim == 1:
        if m.shape[0] != shape[1]:
            raise ValueError(f"mask length {m.shape[0]} != {shape[1]} columns")
        m = np.broadcast_to(m, shape)
    elif m.shape != shape:
        raise ValueError(f"mask shape {m.shape} != data shape {shape}")
    return m


def masked_softmax_rows(a: Tensor, mask) -> Tensor:
    """Row-wise softmax over unmasked columns; masked entries are exactly 0.

    mask: bool, shape (cols,) applied to every row, or (rows, cols).
    Raises if any row is fully masked (softmax over nothing is undefined).
    """
    m = _norm_mask(mask, a.shape)
    if not m.any(axis=1).all():
        raise ValueError("masked_softmax_rows: a row has no unmasked entries")
    xm = np.where(m, a.data, -np.inf)
    rowmax = xm.max(axis=1, keepdims=True)
    z = np.exp(xm - rowmax)  # exp(-inf) == 0 exactly at masked slots
    s = z.sum(axis=1, keepdims=True)
    out = z / s

    def vjp(g):
        inner = (g * out).sum(axis=1, keepdims=True)
        return (out * (g - inner),)

    return _node(out, (a,), vjp)


def masked_log_softmax_rows(a: Tensor, mask) -> Tensor:
    """Row-wise log-softmax over unmasked columns.

    Masked entries are set to a large negative finite value (NEG_CAP) whose
    exp underflows to exactly 0, so downstream probabilities of masked
    columns are exact zeros while all matrix values stay finite.
    """
    m = _norm_mask(mask, a.shape)
    if not m.any(axis=1).all():
        raise ValueError("masked_log_softmax_rows: a row has no unmasked entries")
    xm = np.where(m, a.data, -np.inf)
    rowmax = xm.max(axis=1, keepdims=True)
    u = xm - rowmax
    z = np.exp(u)
    s = z.sum(axis=1, keepdims=True)
    out = np.where(m, u - np.log(s), a.dtype.type(NEG_CAP))
    p = z / s
    mf = m.astype(a.dtype)

    def vjp(g):
        gsum = (g * mf).sum(axis=1, keepdims=True)
        return ((g - p * gsum) * mf,)

    return _node(out, (a,), vjp)


def dropout(a: Tensor, rate: float, rng: SeededRng) -> Tensor:
    """Inverted dropout: zero entries with prob `rate`, scale rest by 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return a
    keep = (rng.random(a.shape) >= rate).astype(a.dtype) / (1.0 - rate)
    return _node(a.data * keep, (a,), lambda g: (g * keep,))


# -- pairwise context reductions ---------------------------------------------
# The decoder precomputes one (n*n, d) matrix of pairwise quantities (row
# j*n + k holds the pair (j, k)) and then, at every decoding step, reduces it
# under the current candidate / selected masks.  Doing the reduction as a
# dedicated op keeps the per-step cost at O(n^2 * d) adds with no MLP re-runs.

def future_context(pairs: Tensor, cand_mask: np.ndarray, n: int) -> Tensor:
    """out[j] = mean over candidates k != j of pairs[j*n + k]; zeros when empty."""
    if pairs.shape[0] != n * n:
        raise ValueError(f"future_context: expected {n * n} pair rows, got {pairs.shape[0]}")
    m = np.asarray(cand_mask, dtype=bool).reshape(n)
    d = pairs.shape[1]
    w = np.broadcast_to(m.astype(pairs.dtype), (n, n)).copy()
    np.fill_diagonal(w, 0.0)
    cnt = w.sum(axis=1)
    denom = np.maximum(cnt, 1.0)
    P = pairs.data.reshape(n, n, d)
    out = np.einsum("jk,jkd->jd", w, P) / denom[:, None]
    out[cnt == 0] = 0.0

    def vjp(g):
        gp = (w / denom[:, None])[:, :, None] * g[:, None, :]
        return (gp.reshape(n * n, d),)

    return _node(out, (pairs,), vjp)


def history_context(pairs: Tensor, selected_mask: np.ndarray, n: int) -> Tensor:
    """out[j] = mean over selected u of pairs[u*n + j]; zeros when none selected."""
    if pairs.shape[0] != n * n:
        raise ValueError(f"history_context: expected {n * n} pair rows, got {pairs.shape[0]}")
    m = np.asarray(selected_mask, dtype=bool).reshape(n)
    d = pairs.shape[1]
    w = m.astype(pairs.dtype)
    cnt = w.sum()
    denom = max(cnt, 1.0)
    P = pairs.data.reshape(n, n, d)
    out = np.einsum("u,ujd->jd", w, P) / denom

    def vjp(g):
        gp = (w / denom)[:, None, None] * g[None, :, :]
        return (gp.reshape(n * n, d),)

    return _node(out, (pairs,), vjp)


# -- composite helpers ---------------------------------------------------------

def layer_norm_rows(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-row layer normalization with learned gain/bias (both 1 x cols)."""
    mu = row_mean(a)
    centered = sub(a, mu)
    var = row_mean(square(centered))
    std = sqrt(add(var, Tensor(np.full((var.shape[0], 1), eps, dtype=a.dtype.type))))
    normed = div(centered, std)
    return add(mul(normed, gain), bias)


def assert_all_finite(arr: np.ndarray, what: str = "matrix") -> None:
    if not np.isfinite(arr).all():
        raise ValueError(f"non-finite values in {what}")
