"""
Differentiable operations on 2-D float64 tensors.

Every operation validates shapes, refuses to produce NaN/Inf from finite
inputs, and records a backward closure on the active tape when one of its
inputs participates. Vectors are carried as 1 x n rows; the only implicit
broadcast is a bias row added to every row of a matrix.
"""

import math
from typing import Optional, Sequence

import numpy as np

from src.autograd.tensor import MASKED, Tensor, current_tape
from src.utils.exceptions import ContractError, DimensionError
from src.utils.validators import check_finite

LAYER_NORM_EPS = 1e-5
_GELU_K = math.sqrt(2.0 / math.pi)
_GELU_C = 0.044715


def _emit(op: str, data: np.ndarray, inputs: Sequence[Tensor], backward_fn, finite: bool = True):
    if finite:
        check_finite(op, data)
    out = Tensor.wrap(data)
    tape = current_tape()
    if tape is not None and any(tape.participates(t) for t in inputs):
        tape.record(op, inputs, out, backward_fn)
    return out


def _require_2d(op: str, *tensors: Tensor) -> None:
    for t in tensors:
        if t.ndim != 2:
            raise DimensionError(f"{op} expects 2-D tensors", t.shape)


def _require_same(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op} shape mismatch", a.shape, b.shape)


def constant(data) -> Tensor:
    """A tensor that never participates in differentiation."""
    return Tensor(data)


# ---------------------------------------------------------------------------
# Linear algebra
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of m x k and k x n tensors."""
    _require_2d("matmul", a, b)
    if a.shape[1] != b.shape[0]:
        raise DimensionError("matmul inner dimensions differ", a.shape, b.shape)
    av, bv = a.data, b.data

    def backward(g):
        return g @ bv.T, av.T @ g

    return _emit("matmul", av @ bv, (a, b), backward)


def transpose(x: Tensor) -> Tensor:
    _require_2d("transpose", x)
    return _emit("transpose", x.data.T.copy(), (x,), lambda g: (g.T,))


def add(a: Tensor, b: Tensor) -> Tensor:
    _require_same("add", a, b)
    return _emit("add", a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _require_same("sub", a, b)
    return _emit("sub", a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product."""
    _require_same("mul", a, b)
    av, bv = a.data, b.data
    return _emit("mul", av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(x: Tensor, factor: float) -> Tensor:
    return _emit("scale", x.data * factor, (x,), lambda g: (g * factor,))


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """Add a 1 x n bias row to every row of an m x n tensor."""
    _require_2d("add_bias", x)
    if bias.shape not in ((1, x.shape[1]), (x.shape[1],)):
        raise DimensionError("add_bias width mismatch", x.shape, bias.shape)
    bshape = bias.shape

    def backward(g):
        return g, g.sum(axis=0).reshape(bshape)

    return _emit("add_bias", x.data + bias.data.reshape(1, -1), (x, bias), backward)


def add_mask(scores: Tensor, mask: np.ndarray) -> Tensor:
    """Add a constant additive mask whose entries are 0 or the MASKED sentinel."""
    _require_2d("add_mask", scores)
    if mask.shape != scores.shape:
        raise DimensionError("mask does not match scores", scores.shape, mask.shape)
    check_finite("add_mask", scores.data)
    allowed = mask == 0.0
    if not np.all(allowed | (mask == MASKED)):
        raise ContractError("mask entries must be 0 or the masked sentinel")
    out = np.where(allowed, scores.data, MASKED)
    return _emit("add_mask", out, (scores,), lambda g: (np.where(allowed, g, 0.0),), finite=False)


# ---------------------------------------------------------------------------
# Activations and normalization
# ---------------------------------------------------------------------------


def gelu(x: Tensor) -> Tensor:
    """GELU, tanh formulation."""
    xv = x.data
    inner = _GELU_K * (xv + _GELU_C * xv**3)
    t = np.tanh(inner)
    out = 0.5 * xv * (1.0 + t)

    def backward(g):
        d_inner = _GELU_K * (1.0 + 3.0 * _GELU_C * xv**2)
        return (g * (0.5 * (1.0 + t) + 0.5 * xv * (1.0 - t**2) * d_inner),)

    return _emit("gelu", out, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    s = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return _emit("sigmoid", s, (x,), lambda g: (g * s * (1.0 - s),))


def tanh(x: Tensor) -> Tensor:
    t = np.tanh(x.data)
    return _emit("tanh", t, (x,), lambda g: (g * (1.0 - t**2),))


def layer_norm(
    x: Tensor,
    gain: Optional[Tensor] = None,
    bias: Optional[Tensor] = None,
    eps: float = LAYER_NORM_EPS,
) -> Tensor:
    """
    Normalize each row to zero mean and unit variance, then apply gain and bias.

    An all-zero row stays all-zero (before bias) because eps guards the variance.
    """
    _require_2d("layer_norm", x)
    n = x.shape[1]
    for p in (gain, bias):
        if p is not None and p.shape not in ((1, n), (n,)):
            raise DimensionError("layer_norm parameter width mismatch", x.shape, p.shape)

    xv = x.data
    mu = xv.mean(axis=1, keepdims=True)
    centered = xv - mu
    var = (centered**2).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    gv = gain.data.reshape(1, n) if gain is not None else np.ones((1, n))
    out = xhat * gv
    if bias is not None:
        out = out + bias.data.reshape(1, n)

    inputs = [x]
    if gain is not None:
        inputs.append(gain)
    if bias is not None:
        inputs.append(bias)

    def backward(g):
        dxhat = g * gv
        dx = inv_std * (
            dxhat
            - dxhat.mean(axis=1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)
        )
        grads = [dx]
        if gain is not None:
            grads.append((g * xhat).sum(axis=0).reshape(gain.shape))
        if bias is not None:
            grads.append(g.sum(axis=0).reshape(bias.shape))
        return grads

    return _emit("layer_norm", out, inputs, backward)


def softmax_rows(x: Tensor) -> Tensor:
    """
    Row-wise softmax, stabilized by subtracting the row maximum.

    Entries equal to the MASKED sentinel receive exactly zero weight. A row
    made only of sentinels is a contract violation.
    """
    _require_2d("softmax_rows", x)
    xv = x.data
    masked = xv == MASKED
    if not np.all(np.isfinite(xv) | masked):
        raise ContractError("softmax_rows input must be finite or the masked sentinel")
    full = masked.all(axis=1)
    if np.any(full):
        raise ContractError(f"fully masked row {int(np.argmax(full))}")

    row_max = np.where(masked, -np.inf, xv).max(axis=1, keepdims=True)
    shifted = np.where(masked, 0.0, xv - row_max)
    e = np.where(masked, 0.0, np.exp(shifted))
    p = e / e.sum(axis=1, keepdims=True)

    def backward(g):
        return (p * (g - (g * p).sum(axis=1, keepdims=True)),)

    return _emit("softmax_rows", p, (x,), backward)


# ---------------------------------------------------------------------------
# Structural operations
# ---------------------------------------------------------------------------


def concat_cols(tensors: Sequence[Tensor]) -> Tensor:
    """Concatenate along the last dimension."""
    if not tensors:
        raise ContractError("concat_cols needs at least one tensor")
    _require_2d("concat_cols", *tensors)
    rows = tensors[0].shape[0]
    for t in tensors:
        if t.shape[0] != rows:
            raise DimensionError("concat_cols row counts differ", tensors[0].shape, t.shape)
    bounds = np.cumsum([0] + [t.shape[1] for t in tensors])

    def backward(g):
        return [g[:, bounds[i] : bounds[i + 1]] for i in range(len(tensors))]

    return _emit(
        "concat_cols", np.concatenate([t.data for t in tensors], axis=1), tensors, backward
    )


def concat_rows(tensors: Sequence[Tensor]) -> Tensor:
    """Stack tensors vertically."""
    if not tensors:
        raise ContractError("concat_rows needs at least one tensor")
    _require_2d("concat_rows", *tensors)
    cols = tensors[0].shape[1]
    for t in tensors:
        if t.shape[1] != cols:
            raise DimensionError("concat_rows widths differ", tensors[0].shape, t.shape)
    bounds = np.cumsum([0] + [t.shape[0] for t in tensors])

    def backward(g):
        return [g[bounds[i] : bounds[i + 1], :] for i in range(len(tensors))]

    return _emit(
        "concat_rows", np.concatenate([t.data for t in tensors], axis=0), tensors, backward
    )


def mean_rows(x: Tensor) -> Tensor:
    """Average the rows of an m x n tensor into a 1 x n row."""
    _require_2d("mean_rows", x)
    m = x.shape[0]
    if m == 0:
        raise ContractError("mean_rows of an empty tensor")
    return _emit(
        "mean_rows",
        x.data.mean(axis=0, keepdims=True),
        (x,),
        lambda g: (np.repeat(g / m, m, axis=0),),
    )


def sum_all(x: Tensor) -> Tensor:
    """Sum every entry into a scalar."""
    shape = x.shape
    return _emit("sum_all", np.array(x.data.sum()), (x,), lambda g: (np.full(shape, float(g)),))


def take(x: Tensor, index: np.ndarray) -> Tensor:
    """
    Gather entries of the row-major flattened tensor.

    The output has the shape of `index`; repeated indices accumulate gradient.
    """
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= x.size):
        raise DimensionError("take index out of range", x.shape, index.shape)
    shape, size = x.shape, x.size

    def backward(g):
        flat = np.zeros(size, dtype=np.float64)
        np.add.at(flat, index.reshape(-1), g.reshape(-1))
        return (flat.reshape(shape),)

    return _emit("take", x.data.reshape(-1)[index], (x,), backward)


def rows(x: Tensor, indices: Sequence[int]) -> Tensor:
    """Select rows of a 2-D tensor (embedding lookup)."""
    _require_2d("rows", x)
    idx = np.asarray(indices, dtype=np.int64).reshape(-1, 1)
    n = x.shape[1]
    return take(x, idx * n + np.arange(n, dtype=np.int64).reshape(1, -1))


def cols(x: Tensor, start: int, stop: int) -> Tensor:
    """Select the column block [start, stop) of a 2-D tensor."""
    _require_2d("cols", x)
    m, n = x.shape
    if not 0 <= start <= stop <= n:
        raise DimensionError(f"column range [{start}, {stop}) outside width", x.shape)
    idx = np.arange(m, dtype=np.int64).reshape(-1, 1) * n + np.arange(start, stop).reshape(1, -1)
    return take(x, idx)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    if int(np.prod(shape)) != x.size:
        raise DimensionError("reshape changes the element count", x.shape, shape)
    original = x.shape
    return _emit("reshape", x.data.reshape(shape).copy(), (x,), lambda g: (g.reshape(original),))


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------


def cross_entropy(probs: Tensor, label: int) -> Tensor:
    """Negative log-probability of `label` in a 1 x C probability row."""
    if probs.ndim != 2 or probs.shape[0] != 1:
        raise DimensionError("cross_entropy expects a single probability row", probs.shape)
    if not 0 <= label < probs.shape[1]:
        raise ContractError(f"label {label} outside [0, {probs.shape[1]})")
    p = float(probs.data[0, label])

    def backward(g):
        grad = np.zeros_like(probs.data)
        grad[0, label] = -float(g) / p
        return (grad,)

    return _emit("cross_entropy", np.array(-math.log(p) if p > 0 else math.inf), (probs,), backward)
