"""Desk-scale representation autoencoder: a frozen synthetic encoder with
per-token normalization, and a trainable transformer decoder with decoupled
patch size and noise-augmented training.

The encoder stands in for a pretrained representation model: a patchify
linear map with orthogonal init, one frozen tanh mixing layer (residual so
the map stays injective), then per-token normalization. It is pure numpy,
deterministic per seed, and never participates in gradients.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError, EncoderMutatedError, ShapeError
from .nn import Linear, Module, PlainBlock, param, prepend_token
from .optim import AdamState, FlatParams, adam_step
from .rng import STREAM_AUGMENT, STREAM_BATCH, Rng, stream_key
from .tensor import Tensor, absolute, layer_norm, narrow, no_grad, permute, reshape, tmean
from .train import learning_rate


def normalize_tokens(tokens: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Per-token zero mean / unit variance over channels (no affine)."""
    mu = tokens.mean(axis=-1, keepdims=True)
    centered = tokens - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    return centered / np.sqrt(var + eps)


class FrozenEncoder:
    """Deterministic frozen tokenizer from pixels to normalized tokens."""

    def __init__(self, patch_size: int = 4, token_dim: int = 64, seed: int = 11):
        if patch_size <= 0 or token_dim <= 0:
            raise ConfigError(f"patch_size/token_dim must be positive: {patch_size}, {token_dim}")
        self.patch_size = patch_size
        self.token_dim = token_dim
        self.seed = seed
        rng = Rng(seed, 0)
        in_dim = 3 * patch_size * patch_size
        self.w_patch = rng.orthogonal(in_dim, token_dim) * np.float32(
            np.sqrt(max(1.0, token_dim / in_dim))
        )
        self.w_mix = rng.orthogonal(token_dim, token_dim)
        self.b_mix = (0.1 * rng.standard_normal((token_dim,), np.float32)).astype(np.float32)
        for arr in (self.w_patch, self.w_mix, self.b_mix):
            arr.setflags(write=False)

    def token_count(self, height: int, width: int) -> int:
        return (height // self.patch_size) * (width // self.patch_size)

    def patchify(self, images: np.ndarray) -> np.ndarray:
        b, c, h, w = images.shape
        p = self.patch_size
        if h % p or w % p:
            raise ShapeError(f"resolution {h}x{w} not divisible by patch size {p}")
        gh, gw = h // p, w // p
        x = images.reshape(b, c, gh, p, gw, p)
        x = x.transpose(0, 2, 4, 1, 3, 5)  # (B, gh, gw, C, p, p)
        return x.reshape(b, gh * gw, c * p * p)

    def encode(self, images: np.ndarray) -> np.ndarray:
        """(B, 3, H, W) pixels -> (B, N, d) normalized tokens."""
        images = np.asarray(images, dtype=np.float32)
        if images.ndim != 4 or images.shape[1] != 3:
            raise ShapeError(f"expected (B, 3, H, W) images, got {images.shape}")
        h = self.patchify(images) @ self.w_patch
        h = h + np.tanh(h @ self.w_mix + self.b_mix)
        return normalize_tokens(h).astype(np.float32)

    def weights_hash(self) -> str:
        digest = hashlib.sha256()
        for arr in (self.w_patch, self.w_mix, self.b_mix):
            digest.update(np.ascontiguousarray(arr).tobytes())
        return digest.hexdigest()


@dataclass(frozen=True)
class DecoderConfig:
    token_dim: int = 64
    num_tokens: int = 64
    patch_size: int = 4  # output patch; equal to the encoder's for same-size output
    width: int = 64
    depth: int = 2
    num_heads: int = 4
    use_cls: bool = True
    upsample_head: bool = False  # adds a second head at twice the patch size

    def __post_init__(self):
        if self.patch_size < 1:
            raise ConfigError(f"patch_size must be >= 1, got {self.patch_size}")
        side = int(round(self.num_tokens**0.5))
        if side * side != self.num_tokens:
            raise ShapeError(f"token count {self.num_tokens} is not a square grid")


@dataclass(frozen=True)
class NoiseAugConfig:
    """Latent smoothing: per-sample sigma ~ |N(0, tau^2)|, then additive
    Gaussian noise of that scale. tau=0 disables augmentation."""

    tau: float = 0.8

    def __post_init__(self):
        if self.tau < 0:
            raise ConfigError(f"tau must be >= 0, got {self.tau}")


def noise_augment(latents: np.ndarray, cfg: NoiseAugConfig, rng: Rng) -> np.ndarray:
    """Smooth the latent distribution; inputs are never modified in place."""
    if cfg.tau == 0.0:
        return latents
    b = latents.shape[0]
    sigma = np.abs(rng.standard_normal((b, 1, 1), np.float32)) * np.float32(cfg.tau)
    return latents + sigma * rng.standard_normal(latents.shape, np.float32)


class Decoder(Module):
    """Transformer decoder from latent tokens back to pixels.

    A learnable class token is prepended for global context and discarded
    before unpatchifying. The optional second head emits patches at twice
    the base patch size from the same trunk, giving 2x upsampled output."""

    def __init__(self, cfg: DecoderConfig, rng: Rng):
        self.cfg = cfg
        self.embed = Linear(rng, cfg.token_dim, cfg.width)
        extra = 1 if cfg.use_cls else 0
        self.pos = param(rng, (1, cfg.num_tokens + extra, cfg.width), std=0.02)
        self.cls = param(rng, (1, 1, cfg.width), std=0.02) if cfg.use_cls else None
        self.blocks = [PlainBlock(rng, cfg.width, cfg.num_heads) for _ in range(cfg.depth)]
        self.head = Linear(rng, cfg.width, 3 * cfg.patch_size**2, std=0.02)
        self.head_up = (
            Linear(rng, cfg.width, 3 * (2 * cfg.patch_size) ** 2, std=0.02)
            if cfg.upsample_head
            else None
        )

    def _trunk(self, tokens: Tensor) -> Tensor:
        cfg = self.cfg
        if tokens.ndim != 3 or tokens.shape[1] != cfg.num_tokens or tokens.shape[2] != cfg.token_dim:
            raise ShapeError(
                f"expected (B, {cfg.num_tokens}, {cfg.token_dim}) tokens, got {tokens.shape}"
            )
        h = self.embed(tokens)
        if self.cls is not None:
            h = prepend_token(h, self.cls)
        h = h + self.pos
        for block in self.blocks:
            h = block(h)
        h = layer_norm(h)
        if self.cls is not None:
            h = narrow(h, 1, 1, cfg.num_tokens)  # discard the class token
        return h

    def _unpatchify(self, patches: Tensor, patch: int) -> Tensor:
        b, n, _ = patches.shape
        side = int(round(n**0.5))
        x = reshape(patches, (b, side, side, 3, patch, patch))
        x = permute(x, (0, 3, 1, 4, 2, 5))
        return reshape(x, (b, 3, side * patch, side * patch))

    def decode(self, tokens: Tensor) -> Tensor:
        return self._unpatchify(self.head(self._trunk(tokens)), self.cfg.patch_size)

    def decode_upsampled(self, tokens: Tensor) -> Tensor:
        if self.head_up is None:
            raise ConfigError("decoder was built without the upsampling head")
        return self._unpatchify(self.head_up(self._trunk(tokens)), 2 * self.cfg.patch_size)

    def decode_arrays(self, tokens: np.ndarray, upsampled: bool = False) -> np.ndarray:
        with no_grad():
            t = Tensor(np.asarray(tokens, dtype=np.float32))
            out = self.decode_upsampled(t) if upsampled else self.decode(t)
        return out.data


@dataclass(frozen=True)
class ReconLossWeights:
    """Loss-combination weights; perceptual and adversarial terms plug in as
    callables and default to absent."""

    perceptual: float = 1.0
    adversarial: float = 0.75


def reconstruction_loss(
    decoded: Tensor,
    target: np.ndarray,
    weights: ReconLossWeights = ReconLossWeights(),
    perceptual_fn=None,
    adversarial_fn=None,
    gan_weight: float = 1.0,
) -> Tensor:
    """L1 plus weighted pluggable perceptual/adversarial terms.

    loss = w_p * perceptual + L1 + w_g * gan_weight * adversarial."""
    if decoded.shape != target.shape:
        raise ContractError(f"shape mismatch: {decoded.shape} vs {target.shape}")
    loss = tmean(absolute(decoded - Tensor(np.asarray(target, dtype=decoded.dtype))))
    if perceptual_fn is not None:
        loss = loss + weights.perceptual * perceptual_fn(decoded, target)
    if adversarial_fn is not None:
        loss = loss + (weights.adversarial * gan_weight) * adversarial_fn(decoded, target)
    return loss


def adaptive_gan_weight(grad_norm_rec: float, grad_norm_adv: float, eps: float = 1e-4) -> float:
    """Balance reconstruction and adversarial gradients at the decoder output:
    the norm quotient, clamped to [0, 1e4]."""
    if grad_norm_rec < 0 or grad_norm_adv < 0:
        raise ContractError("gradient norms must be nonnegative")
    if eps <= 0:
        raise ContractError("eps must be positive")
    return float(min(grad_norm_rec / (grad_norm_adv + eps), 1e4))


@dataclass
class DecoderTrainConfig:
    steps: int = 600
    batch_size: int = 32
    lr: float = 1e-3
    lr_schedule: str = "linear_decay"
    lr_min: float = 1e-4
    warmup_steps: int = 0
    beta1: float = 0.5
    beta2: float = 0.9
    weight_decay: float = 0.0
    eval_points: int = 10  # geometric (doubling) evaluation marks
    eval_count: int = 64
    joint_upsample: bool = False
    # Staged-start epochs for the pluggable loss terms; retained as knobs,
    # unused while those terms default to absent.
    perceptual_start_step: int = 0
    adversarial_start_step: int = 0


def eval_marks(steps: int, points: int = 10) -> list[int]:
    """Doubling evaluation schedule ending at `steps`; early marks catch the
    fast improvement phase so the eval curve trends monotonically."""
    return sorted({max(1, int(round(steps * 2.0 ** (i - points + 1)))) for i in range(points)})


@dataclass
class DecoderTrainResult:
    loss_history: list[float] = field(default_factory=list)
    eval_steps: list[int] = field(default_factory=list)
    eval_l1: list[float] = field(default_factory=list)


def eval_l1(decoder: Decoder, latents: np.ndarray, images: np.ndarray) -> float:
    """Mean per-pixel L1 of clean-latent reconstructions."""
    out = decoder.decode_arrays(latents)
    return float(np.mean(np.abs(out - images)))


def _nearest_upsample(images: np.ndarray) -> np.ndarray:
    return images.repeat(2, axis=2).repeat(2, axis=3)


def train_decoder(
    images: np.ndarray,
    encoder: FrozenEncoder,
    decoder: Decoder,
    noise_cfg: NoiseAugConfig,
    cfg: DecoderTrainConfig,
    seed: int,
    perceptual_fn=None,
    adversarial_fn=None,
) -> DecoderTrainResult:
    """Fit the decoder on noise-augmented encodings of `images`.

    The encoder is hashed before and after; any drift raises. When loss
    plug-ins are supplied, the adversarial term is balanced by the adaptive
    weight computed from decoder-output gradient norms each step."""
    hash_before = encoder.weights_hash()
    latents = encoder.encode(images)  # clean latents, never mutated
    flat = FlatParams(decoder.named_parameters())
    adam = AdamState(
        lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, weight_decay=cfg.weight_decay
    )
    grad_buf = np.zeros_like(flat.flat)
    result = DecoderTrainResult()
    eval_n = min(cfg.eval_count, images.shape[0])
    marks = set(eval_marks(cfg.steps, cfg.eval_points)) if cfg.eval_points else set()
    weights = ReconLossWeights()

    for k in range(cfg.steps):
        idx = Rng(seed, stream_key(STREAM_BATCH, k)).integers(images.shape[0], (cfg.batch_size,))
        z = noise_augment(latents[idx], noise_cfg, Rng(seed, stream_key(STREAM_AUGMENT, k)))
        x = images[idx]
        decoded = decoder.decode(Tensor(z))
        gan_weight = 1.0
        if adversarial_fn is not None:
            gan_weight = _adaptive_weight_from_grads(
                decoder, decoded, x, weights, perceptual_fn, adversarial_fn
            )
        loss = reconstruction_loss(
            decoded, x, weights, perceptual_fn, adversarial_fn, gan_weight
        )
        if cfg.joint_upsample:
            up = decoder.decode_upsampled(Tensor(z))
            loss = loss + tmean(absolute(up - Tensor(_nearest_upsample(x))))
        loss.backward()
        adam_step(
            {"flat": flat.flat},
            {"flat": flat.gather_grads(grad_buf)},
            adam,
            lr=learning_rate_decoder(cfg, k),
        )
        result.loss_history.append(loss.item())
        if (k + 1) in marks:
            result.eval_steps.append(k + 1)
            result.eval_l1.append(eval_l1(decoder, latents[:eval_n], images[:eval_n]))

    if encoder.weights_hash() != hash_before:
        raise EncoderMutatedError("frozen encoder weights changed during decoder training")
    return result


def learning_rate_decoder(cfg: DecoderTrainConfig, step: int) -> float:
    if cfg.lr_schedule == "constant":
        return cfg.lr
    if step < cfg.warmup_steps:
        return cfg.lr
    span = max(1, cfg.steps - cfg.warmup_steps)
    frac = min(1.0, (step - cfg.warmup_steps) / span)
    return cfg.lr + (cfg.lr_min - cfg.lr) * frac


def _adaptive_weight_from_grads(
    decoder: Decoder,
    decoded: Tensor,
    target: np.ndarray,
    weights: ReconLossWeights,
    perceptual_fn,
    adversarial_fn,
) -> float:
    """VQGAN-style balancing: gradient norms of the two loss families with
    respect to the decoder output, then the clamped quotient."""
    rec = reconstruction_loss(decoded, target, weights, perceptual_fn, None)
    rec.backward()
    g_rec = float(np.linalg.norm(decoded.grad)) if decoded.grad is not None else 0.0
    _clear_graph_grads(decoded)
    adv = adversarial_fn(decoded, target)
    adv.backward()
    g_adv = float(np.linalg.norm(decoded.grad)) if decoded.grad is not None else 0.0
    _clear_graph_grads(decoded)
    for p in decoder.parameters():
        p.grad = None
    return adaptive_gan_weight(g_rec, g_adv)


def _clear_graph_grads(root: Tensor) -> None:
    stack = [root]
    seen = set()
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        node.grad = None
        stack.extend(node._parents)
