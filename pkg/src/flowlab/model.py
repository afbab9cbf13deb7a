"""Diffusion transformer backbone with time/label conditioning, plus the
wide-and-shallow denoising head variant.

The plain backbone projects n-channel tokens down to its working width and
back up at the end, so a backbone narrower than the token dimension is
rank-limited exactly as the spectral bound describes. The headed variant
re-embeds the noisy input at the (wide) head width, conditioned per token on
the backbone output, which restores full rank without widening the trunk.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ContractError
from .nn import (
    ConditionedBlock,
    FinalLayer,
    FourierTimeEmbed,
    LabelEmbed,
    Linear,
    Module,
    param,
)
from .rng import Rng
from .tensor import Tensor, reshape


@dataclass(frozen=True)
class HeadConfig:
    depth: int = 2
    width: int = 2048

    def __post_init__(self):
        if self.depth <= 0 or self.width <= 0:
            raise ConfigError(f"head depth/width must be positive, got {self}")


@dataclass(frozen=True)
class ModelConfig:
    dim: int
    num_heads: int
    depth: int
    token_dim: int = 768
    num_tokens: int = 256
    patch_size: int = 1
    label_count: int = 1000
    head: HeadConfig | None = None
    mlp_ratio: int = 4
    num_freqs: int = 64

    def __post_init__(self):
        positive = (
            self.dim, self.num_heads, self.depth, self.token_dim,
            self.num_tokens, self.patch_size, self.mlp_ratio, self.num_freqs,
        )
        if any(v <= 0 for v in positive):
            raise ConfigError(f"all extents must be positive: {self}")
        if self.label_count < 0:
            raise ConfigError(f"label_count must be >= 0, got {self.label_count}")
        if self.dim % self.num_heads != 0:
            raise ConfigError(f"dim {self.dim} not divisible by num_heads {self.num_heads}")

    @property
    def null_label(self) -> int:
        return self.label_count

    def with_head(self, depth: int = 2, width: int = 2048) -> "ModelConfig":
        return replace(self, head=HeadConfig(depth=depth, width=width))


# (dim, num_heads, depth). The named sizes follow the standard scaling table;
# the d* entries are small desk-scale shapes (depth 4) for bound experiments.
_PRESETS: dict[str, tuple[int, int, int]] = {
    "S": (384, 6, 12),
    "B": (768, 12, 12),
    "L": (1024, 16, 24),
    "XL": (1152, 16, 28),
    "XXL": (1280, 16, 32),
    "H": (1536, 16, 32),
    "G": (2048, 16, 40),
    "T": (2688, 21, 40),
    "d16": (16, 1, 4),
    "d32": (32, 2, 4),
    "d64": (64, 4, 4),
    "d96": (96, 6, 4),
    "d128": (128, 8, 4),
}


def preset_config(
    name: str,
    token_dim: int = 768,
    num_tokens: int = 256,
    label_count: int = 1000,
    head: HeadConfig | None = None,
) -> ModelConfig:
    if name not in _PRESETS:
        raise ConfigError(f"unknown model preset {name!r}; known: {sorted(_PRESETS)}")
    dim, heads, depth = _PRESETS[name]
    return ModelConfig(
        dim=dim, num_heads=heads, depth=depth,
        token_dim=token_dim, num_tokens=num_tokens, label_count=label_count, head=head,
    )


def heads_for_width(width: int) -> int:
    """Head count giving 16-dim heads where possible."""
    return width // 16 if width % 16 == 0 and width >= 16 else 1


class DenoisingHead(Module):
    """Shallow, wide transformer head predicting velocity from the noisy
    input, conditioned per token on backbone features and on time."""

    def __init__(self, rng: Rng, cfg: ModelConfig):
        head = cfg.head
        w = head.width
        self.embed_x = Linear(rng, cfg.token_dim, w)  # no positional embedding here
        self.bridge = Linear(rng, cfg.dim, w) if cfg.dim != w else None
        self.t_embed = FourierTimeEmbed(rng, w, num_freqs=cfg.num_freqs)
        self.blocks = [
            ConditionedBlock(rng, w, heads_for_width(w), cfg.mlp_ratio)
            for _ in range(head.depth)
        ]
        self.final = FinalLayer(rng, w, cfg.token_dim)

    def __call__(self, tokens: Tensor, features: Tensor, t: np.ndarray) -> Tensor:
        cond = self.bridge(features) if self.bridge is not None else features
        t_vec = self.t_embed(t)
        cond = cond + reshape(t_vec, (t_vec.shape[0], 1, t_vec.shape[1]))
        h = self.embed_x(tokens)
        for block in self.blocks:
            h = block(h, cond)
        return self.final(h, cond)


class DiT(Module):
    """Velocity-prediction transformer over latent token stacks."""

    def __init__(self, cfg: ModelConfig, rng: Rng):
        self.cfg = cfg
        self.embed_in = Linear(rng, cfg.token_dim, cfg.dim)
        self.pos = param(rng, (1, cfg.num_tokens, cfg.dim), std=0.02)
        self.t_embed = FourierTimeEmbed(rng, cfg.dim, num_freqs=cfg.num_freqs)
        self.y_embed = LabelEmbed(rng, cfg.label_count, cfg.dim)
        self.blocks = [
            ConditionedBlock(rng, cfg.dim, cfg.num_heads, cfg.mlp_ratio)
            for _ in range(cfg.depth)
        ]
        if cfg.head is None:
            self.final = FinalLayer(rng, cfg.dim, cfg.token_dim)
            self.head = None
        else:
            self.final = None
            self.head = DenoisingHead(rng, cfg)

    def _check_inputs(self, tokens: Tensor, t: np.ndarray, labels: np.ndarray):
        cfg = self.cfg
        if tokens.ndim != 3 or tokens.shape[1] != cfg.num_tokens or tokens.shape[2] != cfg.token_dim:
            raise ContractError(
                f"tokens must be (B, {cfg.num_tokens}, {cfg.token_dim}), got {tokens.shape}"
            )
        if len(t) != tokens.shape[0]:
            raise ContractError(f"time batch {len(t)} != token batch {tokens.shape[0]}")
        labels = np.asarray(labels, dtype=np.int64)
        if labels.min(initial=0) < 0 or labels.max(initial=0) > cfg.label_count:
            raise ContractError(
                f"labels must lie in [0, {cfg.label_count}] (null = {cfg.label_count})"
            )
        return labels

    def __call__(self, tokens: Tensor, t, labels) -> Tensor:
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        if t.shape[0] == 1 and tokens.shape[0] > 1:
            t = np.repeat(t, tokens.shape[0])
        labels = self._check_inputs(tokens, t, labels)
        cond = self.t_embed(t) + self.y_embed(labels)
        h = self.embed_in(tokens) + self.pos
        for block in self.blocks:
            h = block(h, cond)
        if self.head is None:
            return self.final(h, cond)
        return self.head(tokens, h, t)


def build_model(cfg: ModelConfig, seed: int, stream: int = 0) -> DiT:
    return DiT(cfg, Rng(seed, stream))


def parameter_count(cfg: ModelConfig) -> int:
    """Exact learnable-scalar count for a config, without instantiating it.

    Must agree with DiT(cfg).parameter_count(); tested against construction
    at small sizes, trusted in closed form for the large presets."""
    d, n, f = cfg.dim, cfg.token_dim, cfg.num_freqs

    def linear(d_in, d_out):
        return d_in * d_out + d_out

    def time_embed(width):
        return linear(2 * f, width) + linear(width, width)

    def block(width):
        attn = 4 * linear(width, width)
        mlp = linear(width, cfg.mlp_ratio * width) + linear(cfg.mlp_ratio * width, width)
        mod = linear(width, 6 * width)
        return attn + mlp + mod

    def final(width, out):
        return linear(width, 2 * width) + linear(width, out)

    total = linear(n, d)  # input embedding
    total += cfg.num_tokens * d  # positional table
    total += time_embed(d)
    total += (cfg.label_count + 1) * d  # label table
    total += cfg.depth * block(d)
    if cfg.head is None:
        total += final(d, n)
    else:
        w = cfg.head.width
        total += linear(n, w)  # head input embedding
        if d != w:
            total += linear(d, w)  # bridge
        total += time_embed(w)
        total += cfg.head.depth * block(w)
        total += final(w, n)
    return total
