"""AdamW with decoupled weight decay, plus global-norm gradient clipping."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError
from .tensor import Tensor


@dataclass
class AdamState:
    """Per-parameter first/second moments and the shared step counter."""

    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.95
    eps: float = 1e-8
    weight_decay: float = 0.0
    step: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)
    scratch: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float | None = None,
) -> AdamState:
    """One bias-corrected update, in place on the parameter buffers.

    p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)

    `lr` overrides the stored rate for schedule support. All arithmetic runs
    through per-parameter scratch buffers to avoid large temporaries."""
    state.step += 1
    rate = state.lr if lr is None else lr
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        m = state.first_moment.get(name)
        if m is None:
            m = state.first_moment[name] = np.zeros_like(p)
        v = state.second_moment.get(name)
        if v is None:
            v = state.second_moment[name] = np.zeros_like(p)
        s = state.scratch.get(name)
        if s is None or s.shape != p.shape:
            s = state.scratch[name] = np.empty_like(p)
        np.multiply(g, g, out=s)
        v *= b2
        s *= 1.0 - b2
        v += s
        m *= b1
        np.multiply(g, 1.0 - b1, out=s)
        m += s
        # m_hat/(sqrt(v_hat)+eps) computed as m / (c1*(sqrt(v/c2)+eps))
        np.multiply(v, 1.0 / c2, out=s)
        np.sqrt(s, out=s)
        s += state.eps
        s *= c1
        np.divide(m, s, out=s)
        if state.weight_decay:
            s += state.weight_decay * p
        s *= rate
        p -= s
    return state


def grad_clip(grads: dict[str, np.ndarray], max_norm: float) -> dict[str, np.ndarray]:
    """Scale all gradients by max_norm/norm when the global L2 norm exceeds it."""
    if max_norm <= 0:
        raise ConfigError(f"max_norm must be positive, got {max_norm}")
    total = 0.0
    for g in grads.values():
        gd = g.astype(np.float64)
        total += float(np.sum(gd * gd))
    norm = float(np.sqrt(total))
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return grads


def grad_clip_flat(flat: np.ndarray, max_norm: float) -> np.ndarray:
    """grad_clip for a single flattened gradient buffer."""
    if max_norm <= 0:
        raise ConfigError(f"max_norm must be positive, got {max_norm}")
    gd = flat.astype(np.float64)
    norm = float(np.sqrt(np.dot(gd, gd)))
    if norm > max_norm:
        flat *= max_norm / norm
    return flat


def ema_update(ema: dict[str, np.ndarray], params: dict[str, np.ndarray], beta: float) -> dict[str, np.ndarray]:
    """ema <- beta * ema + (1 - beta) * params, in place on the ema buffers."""
    if not 0.0 <= beta <= 1.0:
        raise ConfigError(f"EMA beta must lie in [0, 1], got {beta}")
    for name, p in params.items():
        arr = p.data if isinstance(p, Tensor) else p
        buf = ema[name]
        if buf.shape != arr.shape:
            raise ShapeError(f"EMA shape {buf.shape} != parameter shape {arr.shape} for {name}")
        buf *= np.float32(beta)
        buf += np.float32(1.0 - beta) * arr
    return ema


def ema_update_flat(ema: np.ndarray, params: np.ndarray, beta: float) -> np.ndarray:
    """ema_update for single flattened buffers."""
    if not 0.0 <= beta <= 1.0:
        raise ConfigError(f"EMA beta must lie in [0, 1], got {beta}")
    ema *= np.float32(beta)
    ema += np.float32(1.0 - beta) * params
    return ema


def collect_grads(params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    """Pull gradient buffers off taped parameters; missing grads become zeros."""
    out = {}
    for name, p in params.items():
        out[name] = p.grad if p.grad is not None else np.zeros_like(p.data)
    return out


def zero_grads(params: dict[str, Tensor]) -> None:
    for p in params.values():
        p.grad = None


class FlatParams:
    """All parameters re-homed into one contiguous buffer.

    Each parameter Tensor's .data becomes a view into the flat buffer, so a
    single-array optimizer update moves the whole model. Keeps Adam, EMA and
    clipping at one ufunc sweep each instead of one per parameter."""

    def __init__(self, params: dict[str, Tensor]):
        self.names = list(params.keys())
        self.tensors = params
        self.slices: dict[str, tuple[int, int, tuple[int, ...]]] = {}
        total = sum(p.size for p in params.values())
        self.flat = np.zeros(total, dtype=np.float32)
        offset = 0
        for name, p in params.items():
            size = p.size
            view = self.flat[offset : offset + size].reshape(p.shape)
            view[...] = p.data
            p.data = view
            self.slices[name] = (offset, size, p.shape)
            offset += size

    def gather_grads(self, out: np.ndarray | None = None) -> np.ndarray:
        if out is None:
            out = np.zeros_like(self.flat)
        for name, p in self.tensors.items():
            offset, size, _ = self.slices[name]
            dst = out[offset : offset + size]
            if p.grad is None:
                dst[...] = 0.0
            else:
                dst[...] = p.grad.reshape(-1)
            p.grad = None
        return out

    def arrays(self) -> dict[str, np.ndarray]:
        """Copies of the parameters under their dotted names."""
        return {name: p.data.copy() for name, p in self.tensors.items()}

    def load(self, tensors: dict[str, np.ndarray]) -> None:
        """Copy values in without breaking the view linkage."""
        for name, p in self.tensors.items():
            p.data[...] = tensors[name]

    def unflatten(self, flat: np.ndarray) -> dict[str, np.ndarray]:
        out = {}
        for name, (offset, size, shape) in self.slices.items():
            out[name] = flat[offset : offset + size].reshape(shape).copy()
        return out
