"""Minimal module system and transformer building blocks.

Modules register parameters as attributes; `named_parameters` walks the
attribute tree and yields flat dotted names, which double as the checkpoint
tensor names.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ShapeError
from .rng import Rng
from .tensor import (
    Tensor,
    attention_core,
    concat,
    embedding,
    gated_residual,
    gelu,
    layer_norm,
    matmul,
    modulated_layer_norm,
    narrow,
    reshape,
    silu,
)

__all__ = [
    "Module", "Linear", "Mlp", "Attention", "FourierTimeEmbed", "LabelEmbed",
    "ConditionedBlock", "PlainBlock", "FinalLayer", "modulate", "param",
    "zeros_param", "prepend_token",
]


class Module:
    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for key, value in self.__dict__.items():
            name = f"{prefix}{key}"
            if isinstance(value, Tensor) and value.requires_grad:
                out[name] = value
            elif isinstance(value, Module):
                out.update(value.named_parameters(f"{name}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{name}.{i}."))
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def parameter_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def load_state(self, tensors: dict[str, np.ndarray], prefix: str = "") -> None:
        params = self.named_parameters()
        for name, p in params.items():
            key = prefix + name
            if key not in tensors:
                raise ShapeError(f"missing tensor {key}")
            if tensors[key].shape != p.shape:
                raise ShapeError(
                    f"tensor {key}: stored shape {tensors[key].shape} != model shape {p.shape}"
                )
            p.data = tensors[key].astype(p.data.dtype, copy=True)

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters().items()}


def param(rng: Rng, shape, std: float | None = None) -> Tensor:
    """Normal-initialized parameter; std defaults to 1/sqrt(fan_in)."""
    if std is None:
        fan_in = shape[0] if len(shape) > 1 else shape[-1]
        std = 1.0 / math.sqrt(fan_in)
    data = rng.standard_normal(shape, dtype=np.float32) * np.float32(std)
    return Tensor(data, requires_grad=True)


def zeros_param(shape) -> Tensor:
    return Tensor(np.zeros(shape, dtype=np.float32), requires_grad=True)


class Linear(Module):
    def __init__(self, rng: Rng, d_in: int, d_out: int, std: float | None = None, bias: bool = True):
        self.w = param(rng, (d_in, d_out), std)
        self.b = zeros_param((d_out,)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = matmul(x, self.w)
        if self.b is not None:
            out = out + self.b
        return out


class Mlp(Module):
    def __init__(self, rng: Rng, dim: int, hidden: int):
        self.fc1 = Linear(rng, dim, hidden)
        self.fc2 = Linear(rng, hidden, dim)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(gelu(self.fc1(x)))


class Attention(Module):
    """Multi-head self-attention over (B, N, D) token stacks."""

    def __init__(self, rng: Rng, dim: int, num_heads: int):
        if dim % num_heads != 0:
            raise ShapeError(f"dim {dim} not divisible by num_heads {num_heads}")
        self.num_heads = num_heads
        self.head_dim = dim // num_heads
        self.wq = Linear(rng, dim, dim)
        self.wk = Linear(rng, dim, dim)
        self.wv = Linear(rng, dim, dim)
        self.wo = Linear(rng, dim, dim)

    def __call__(self, x: Tensor) -> Tensor:
        out = attention_core(self.wq(x), self.wk(x), self.wv(x), self.num_heads)
        return self.wo(out)


class FourierTimeEmbed(Module):
    """Gaussian Fourier features of scalar time, then a small projection MLP.

    Frequencies are drawn once at init and frozen; only the projection
    learns. Feature order is [cos(2*pi*W*t), sin(2*pi*W*t)]."""

    def __init__(self, rng: Rng, dim: int, num_freqs: int = 64, freq_scale: float = 10.0):
        self.freqs = rng.standard_normal((num_freqs,), dtype=np.float64) * freq_scale  # frozen
        self.proj1 = Linear(rng, 2 * num_freqs, dim)
        self.proj2 = Linear(rng, dim, dim)

    def features(self, t: np.ndarray) -> np.ndarray:
        """Pre-projection Fourier features; pure numpy, no gradient to t."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        angles = 2.0 * math.pi * t[:, None] * self.freqs[None, :]
        return np.concatenate([np.cos(angles), np.sin(angles)], axis=1).astype(np.float32)

    def __call__(self, t: np.ndarray) -> Tensor:
        feats = Tensor(self.features(t))
        return self.proj2(silu(self.proj1(feats)))


class LabelEmbed(Module):
    """Class-label table with a trailing null label at index label_count."""

    def __init__(self, rng: Rng, label_count: int, dim: int):
        self.label_count = label_count
        self.table = param(rng, (label_count + 1, dim), std=0.02)

    def __call__(self, labels: np.ndarray) -> Tensor:
        return embedding(self.table, np.asarray(labels, dtype=np.int64))


def modulate(x: Tensor, shift: Tensor, scale: Tensor) -> Tensor:
    return x * (scale + 1.0) + shift


class ConditionedBlock(Module):
    """Pre-norm attention + MLP block with adaptive-norm conditioning.

    The conditioning vector may be per sample (B, D) or per token (B, N, D);
    modulation parameters are produced by one linear map of silu(cond)."""

    def __init__(self, rng: Rng, dim: int, num_heads: int, mlp_ratio: int = 4, mod_std: float = 0.02):
        self.dim = dim
        self.attn = Attention(rng, dim, num_heads)
        self.mlp = Mlp(rng, dim, mlp_ratio * dim)
        self.mod = Linear(rng, dim, 6 * dim, std=mod_std)

    def _chunks(self, cond: Tensor, num: int) -> list[Tensor]:
        m = self.mod(silu(cond))
        if m.ndim == 2:
            m = reshape(m, (m.shape[0], 1, m.shape[1]))
        return [narrow(m, -1, i * self.dim, self.dim) for i in range(num)]

    def __call__(self, x: Tensor, cond: Tensor) -> Tensor:
        s1, g1, h1, s2, g2, h2 = self._chunks(cond, 6)
        x = gated_residual(x, h1, self.attn(modulated_layer_norm(x, s1, g1)))
        x = gated_residual(x, h2, self.mlp(modulated_layer_norm(x, s2, g2)))
        return x


class PlainBlock(Module):
    """Unconditioned pre-norm transformer block (decoder ViT)."""

    def __init__(self, rng: Rng, dim: int, num_heads: int, mlp_ratio: int = 4):
        self.attn = Attention(rng, dim, num_heads)
        self.mlp = Mlp(rng, dim, mlp_ratio * dim)

    def __call__(self, x: Tensor) -> Tensor:
        x = x + self.attn(layer_norm(x))
        x = x + self.mlp(layer_norm(x))
        return x


class FinalLayer(Module):
    """Modulated final norm plus output projection."""

    def __init__(self, rng: Rng, dim: int, d_out: int, mod_std: float = 0.02, out_std: float = 0.02):
        self.dim = dim
        self.mod = Linear(rng, dim, 2 * dim, std=mod_std)
        self.proj = Linear(rng, dim, d_out, std=out_std)

    def __call__(self, x: Tensor, cond: Tensor) -> Tensor:
        m = self.mod(silu(cond))
        if m.ndim == 2:
            m = reshape(m, (m.shape[0], 1, m.shape[1]))
        shift = narrow(m, -1, 0, self.dim)
        scale = narrow(m, -1, self.dim, self.dim)
        return self.proj(modulated_layer_norm(x, shift, scale))


def prepend_token(tokens: Tensor, cls: Tensor) -> Tensor:
    """Broadcast a (1, 1, D) learned token across the batch and prepend it."""
    b = tokens.shape[0]
    tile = concat([cls] * b, axis=0)
    return concat([tile, tokens], axis=1)
