"""Dense float tensors with a reverse-mode automatic differentiation tape.

Design constraints:

* float32 by default, float64 supported end to end (oracles re-check
  gradients in 64-bit);
* reductions go through numpy's fixed pairwise summation, so results are
  bit-reproducible for a given input;
* the tape is built per forward pass and freed with the loss value; the
  graph is a DAG of ``Tensor`` nodes, each holding its parents and a
  closure producing parent gradients.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, ShapeError

_FLOAT_DTYPES = (np.float32, np.float64)

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape construction inside the block (evaluation / sampling)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            raise ContractError("wrap raw arrays, not Tensors")
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn: Callable | None = None

    # -- introspection -----------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.size == 1 else _fail_item(self)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}{flag})"

    # -- operators ----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_coerce(other, self), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_coerce(other, self), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return pow_const(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    # -- autodiff -----------------------------------------------------------

    def backward(self) -> None:
        """Reverse-mode sweep populating .grad on every taped ancestor.

        The root must be scalar (size 1)."""
        if self.size != 1:
            raise ContractError(f"backward requires a scalar loss, got shape {self.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
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
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward_fn is None or node.grad is None:
                continue
            for parent, g in zip(node._parents, node._backward_fn(node.grad)):
                if g is None or not parent.requires_grad:
                    continue
                if parent.grad is None:
                    # Take ownership only of fresh, unaliased temporaries;
                    # pass-throughs of node.grad and views must be copied
                    # because parent.grad accumulates in place.
                    if g.dtype == parent.data.dtype and g.base is None and g is not node.grad:
                        parent.grad = g
                    else:
                        parent.grad = g.astype(parent.data.dtype, copy=True)
                else:
                    parent.grad += g

    def zero_grad(self) -> None:
        self.grad = None


def _fail_item(t: Tensor):
    raise ContractError(f"item() requires a scalar, got shape {t.shape}")


def _coerce(value, like: Tensor) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.data.dtype))


def _node(data: np.ndarray, parents: Sequence[Tensor], backward_fn) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient back to the pre-broadcast shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- elementwise arithmetic --------------------------------------------------


def add(a: Tensor, b) -> Tensor:
    b = _coerce(b, a)
    return _node(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: Tensor, b) -> Tensor:
    b = _coerce(b, a)
    return _node(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: Tensor, b) -> Tensor:
    b = _coerce(b, a)
    return _node(
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a: Tensor, b) -> Tensor:
    b = _coerce(b, a)
    return _node(
        a.data / b.data,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.data, a.shape),
            _unbroadcast(-g * a.data / (b.data * b.data), b.shape),
        ),
    )


def neg(a: Tensor) -> Tensor:
    return _node(-a.data, (a,), lambda g: (-g,))


def _fast_pow(x: np.ndarray, p: float) -> np.ndarray:
    # generic float pow is very slow in numpy; special-case the hot exponents
    if p == 2.0:
        return x * x
    if p == 3.0:
        return x * x * x
    if p == 1.0:
        return x.copy()
    if p == 0.5:
        return np.sqrt(x)
    if p == -1.0:
        return 1.0 / x
    return x**p


def pow_const(a: Tensor, p) -> Tensor:
    p = float(p)
    return _node(_fast_pow(a.data, p), (a,), lambda g: (g * p * _fast_pow(a.data, p - 1.0),))


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _node(out, (a,), lambda g: (g * out,))


def log(a: Tensor) -> Tensor:
    return _node(np.log(a.data), (a,), lambda g: (g / a.data,))


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)
    return _node(out, (a,), lambda g: (g * (0.5 / out),))


def absolute(a: Tensor) -> Tensor:
    return _node(np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _node(out, (a,), lambda g: (g * (1.0 - out * out),))


def sigmoid(a: Tensor) -> Tensor:
    out = 1.0 / (1.0 + np.exp(-a.data))
    return _node(out, (a,), lambda g: (g * out * (1.0 - out),))


def silu(a: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-a.data))
    out = a.data * s
    return _node(out, (a,), lambda g: (g * s * (1.0 + a.data * (1.0 - s)),))


_GELU_C = 0.7978845608028654  # sqrt(2/pi)
_GELU_A = 0.044715


def gelu(a: Tensor) -> Tensor:
    """tanh-approximation GELU."""
    x = a.data
    x2 = x * x
    u = _GELU_C * (x + _GELU_A * x2 * x)
    th = np.tanh(u)
    out = 0.5 * x * (1.0 + th)

    def backward(g):
        du = _GELU_C * (1.0 + 3.0 * _GELU_A * x2)
        return (g * (0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du),)

    return _node(out, (a,), backward)


def cos(a: Tensor) -> Tensor:
    return _node(np.cos(a.data), (a,), lambda g: (-g * np.sin(a.data),))


def sin(a: Tensor) -> Tensor:
    return _node(np.sin(a.data), (a,), lambda g: (g * np.cos(a.data),))


# -- linear algebra -----------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul requires rank >= 2 operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner extents disagree: {a.shape} @ {b.shape}")

    if b.ndim == 2 and a.ndim > 2:
        # stacked vectors x 2D weights: collapse the batch into one GEMM
        lead = a.shape[:-1]
        a2 = a.data.reshape(-1, a.shape[-1])
        out = (a2 @ b.data).reshape(lead + (b.shape[-1],))

        def backward2(g):
            g2 = g.reshape(-1, g.shape[-1])
            ga = np.empty(a.shape, dtype=g2.dtype)
            np.matmul(g2, b.data.T, out=ga.reshape(-1, a.shape[-1]))
            gb = a2.T @ g2
            return (ga, gb)

        return _node(out, (a, b), backward2)

    def backward(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return (_unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape))

    return _node(np.matmul(a.data, b.data), (a, b), backward)


# -- shape manipulation --------------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    return _node(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def permute(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _node(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),))


def swapaxes(a: Tensor, ax1: int, ax2: int) -> Tensor:
    return _node(np.swapaxes(a.data, ax1, ax2), (a,), lambda g: (np.swapaxes(g, ax1, ax2),))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        return tuple(
            np.take(g, np.arange(offsets[i], offsets[i + 1]), axis=axis)
            for i in range(len(tensors))
        )

    return _node(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    index = [slice(None)] * a.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)

    def backward(g):
        ga = np.zeros(a.shape, dtype=g.dtype)
        ga[index] = g
        return (ga,)

    return _node(a.data[index], (a,), backward)


# -- reductions ----------------------------------------------------------------


def _reduce_grad(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g, shape)
    if not keepdims:
        axes = axis if isinstance(axis, tuple) else (axis,)
        axes = tuple(a % len(shape) for a in axes)
        g = np.expand_dims(g, axes)
    return np.broadcast_to(g, shape)


def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    return _node(
        a.data.sum(axis=axis, keepdims=keepdims),
        (a,),
        lambda g: (_reduce_grad(g, a.shape, axis, keepdims).astype(g.dtype, copy=False),),
    )


def tmean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    count = a.size if axis is None else np.prod(
        [a.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))]
    )
    inv = 1.0 / float(count)
    return _node(
        a.data.mean(axis=axis, keepdims=keepdims),
        (a,),
        lambda g: ((_reduce_grad(g, a.shape, axis, keepdims) * inv).astype(g.dtype, copy=False),),
    )


# -- fused neural-net primitives ------------------------------------------------


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        return ((g - dot) * out,)

    return _node(out, (a,), backward)


def layer_norm(x: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize the last axis to zero mean, unit (biased) variance.

    No learned scale or shift; eps keeps zero-variance slices finite."""
    if x.shape[-1] < 2:
        raise ShapeError(f"layer_norm needs at least 2 channels, got {x.shape}")
    if eps <= 0:
        raise ContractError("layer_norm eps must be positive")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + np.asarray(eps, dtype=x.data.dtype))
    out = centered * inv

    def backward(g):
        gm = g.mean(axis=-1, keepdims=True)
        gy = (g * out).mean(axis=-1, keepdims=True)
        return ((g - gm - out * gy) * inv,)

    return _node(out, (x,), backward)


def modulated_layer_norm(x: Tensor, shift: Tensor, scale: Tensor, eps: float = 1e-6) -> Tensor:
    """layer_norm(x) * (1 + scale) + shift as a single tape node.

    shift/scale broadcast against the normalized activations (conditioning
    path of the transformer blocks)."""
    if x.shape[-1] < 2:
        raise ShapeError(f"modulated_layer_norm needs >= 2 channels, got {x.shape}")
    if eps <= 0:
        raise ContractError("modulated_layer_norm eps must be positive")
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + np.asarray(eps, dtype=x.data.dtype))
    ln = centered * inv
    gain = scale.data + 1.0
    out = ln * gain + shift.data

    def backward(g):
        gl = g * gain
        gm = gl.mean(axis=-1, keepdims=True)
        gy = (gl * ln).mean(axis=-1, keepdims=True)
        gx = (gl - gm - ln * gy) * inv
        return (
            gx,
            _unbroadcast(g, shift.shape),
            _unbroadcast(g * ln, scale.shape),
        )

    return _node(out, (x, shift, scale), backward)


def gated_residual(x: Tensor, gate: Tensor, branch: Tensor) -> Tensor:
    """x + gate * branch as a single tape node."""

    def backward(g):
        return (
            _unbroadcast(g, x.shape),
            _unbroadcast(g * branch.data, gate.shape),
            _unbroadcast(g * gate.data, branch.shape),
        )

    return _node(x.data + gate.data * branch.data, (x, gate, branch), backward)


def attention_core(q: Tensor, k: Tensor, v: Tensor, num_heads: int) -> Tensor:
    """Scaled dot-product multi-head attention over (B, N, D) stacks.

    Splits D into num_heads, attends, and re-merges, all in one tape node."""
    b, n, d = q.shape
    if d % num_heads != 0:
        raise ShapeError(f"model dim {d} not divisible by {num_heads} heads")
    hd = d // num_heads
    scale = np.asarray(1.0 / np.sqrt(hd), dtype=q.data.dtype)

    def split(a):
        return a.reshape(b, n, num_heads, hd).swapaxes(1, 2)  # (B, H, N, hd)

    qh, kh, vh = split(q.data), split(k.data), split(v.data)
    logits = np.matmul(qh * scale, kh.swapaxes(-1, -2))
    logits -= logits.max(axis=-1, keepdims=True)
    weights = np.exp(logits)
    weights /= weights.sum(axis=-1, keepdims=True)
    out = np.matmul(weights, vh)  # (B, H, N, hd)

    def backward(g):
        gh = split(np.ascontiguousarray(g))
        gv = np.matmul(weights.swapaxes(-1, -2), gh)
        gw = np.matmul(gh, vh.swapaxes(-1, -2))
        dot = (gw * weights).sum(axis=-1, keepdims=True)
        gl = (gw - dot) * weights
        gq = np.matmul(gl, kh) * scale
        gk = np.matmul(gl.swapaxes(-1, -2), qh * scale)

        def merge(a):
            return np.ascontiguousarray(a.swapaxes(1, 2)).reshape(b, n, d)

        return (merge(gq), merge(gk), merge(gv))

    merged = np.ascontiguousarray(out.swapaxes(1, 2)).reshape(b, n, d)
    return _node(merged, (q, k, v), backward)


def embedding(table: Tensor, indices: np.ndarray) -> Tensor:
    indices = np.asarray(indices)
    if indices.min(initial=0) < 0 or indices.max(initial=0) >= table.shape[0]:
        raise ContractError(
            f"embedding index out of range [0, {table.shape[0]}): {indices}"
        )

    def backward(g):
        gt = np.zeros(table.shape, dtype=g.dtype)
        np.add.at(gt, indices, g)
        return (gt,)

    return _node(table.data[indices], (table,), backward)
