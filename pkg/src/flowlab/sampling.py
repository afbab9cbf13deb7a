"""ODE sampling with Euler integration on the (optionally shifted) time
grid, plus classifier-free guidance with an interval gate and weak-model
guidance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError, SamplingError
from .flow import ScheduleShift, shift_timestep
from .rng import STREAM_SAMPLE, Rng, stream_key
from .tensor import Tensor, no_grad


@dataclass(frozen=True)
class SamplerConfig:
    steps: int = 50
    shift: ScheduleShift | None = None  # applied to the grid knots when set

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")


@dataclass(frozen=True)
class GuidanceConfig:
    mode: str = "none"  # none | cfg_interval | autoguidance
    scale: float = 1.5
    t_lo: float = 0.0
    t_hi: float = 1.0

    def __post_init__(self):
        if self.mode not in ("none", "cfg_interval", "autoguidance"):
            raise ConfigError(f"unknown guidance mode {self.mode!r}")
        if self.scale < 0:
            raise ConfigError(f"guidance scale must be >= 0, got {self.scale}")
        if not 0.0 <= self.t_lo <= self.t_hi <= 1.0:
            raise ConfigError(f"interval must satisfy 0 <= lo <= hi <= 1, got {self}")


def time_grid(steps: int, shift: ScheduleShift | None = None) -> np.ndarray:
    """steps+1 knots from t=1 down to t=0; uniform, then shifted if given."""
    knots = np.linspace(1.0, 0.0, steps + 1)
    if shift is not None:
        knots = shift_timestep(knots, shift)
    return knots


def euler_sample(velocity_fn, x1: np.ndarray, cfg: SamplerConfig) -> np.ndarray:
    """Integrate dx = v(x, t) dt from t=1 to t=0 with forward Euler.

    velocity_fn maps (state array, scalar t) -> velocity array."""
    if not np.all(np.isfinite(x1)):
        raise ContractError("initial state contains NaN or infinity")
    x = np.array(x1, dtype=np.float32)
    knots = time_grid(cfg.steps, cfg.shift)
    for k in range(cfg.steps):
        v = np.asarray(velocity_fn(x, float(knots[k])))
        if not np.all(np.isfinite(v)):
            raise SamplingError("velocity produced NaN/inf", step=k)
        dt = np.float32(knots[k + 1] - knots[k])
        x = x + v.astype(np.float32) * dt
    return x


def cfg_velocity(
    v_cond: np.ndarray,
    v_uncond: np.ndarray,
    scale: float,
    t: float,
    interval: tuple[float, float] = (0.0, 1.0),
) -> np.ndarray:
    """Classifier-free extrapolation, gated to an interval of times.

    Inside [lo, hi]: v_uncond + scale * (v_cond - v_uncond); outside, the
    conditional velocity alone."""
    if v_cond.shape != v_uncond.shape:
        raise ContractError(f"shape mismatch: {v_cond.shape} vs {v_uncond.shape}")
    lo, hi = interval
    if lo <= t <= hi:
        return v_uncond + scale * (v_cond - v_uncond)
    return v_cond


def autoguidance_velocity(v_strong: np.ndarray, v_weak: np.ndarray, scale: float) -> np.ndarray:
    """Extrapolate a strong model away from a weak one."""
    if v_strong.shape != v_weak.shape:
        raise ContractError(f"shape mismatch: {v_strong.shape} vs {v_weak.shape}")
    return v_weak + scale * (v_strong - v_weak)


def model_velocity_fn(model, labels: np.ndarray):
    """Adapt a token model to the sampler's (array, t) -> array interface."""
    labels = np.asarray(labels, dtype=np.int64)

    def fn(x: np.ndarray, t: float) -> np.ndarray:
        with no_grad():
            tt = np.full((x.shape[0],), t, dtype=np.float64)
            return model(Tensor(x), tt, labels).data

    return fn


def guided_velocity_fn(model, labels: np.ndarray, guidance: GuidanceConfig, weak_model=None):
    """Velocity closure for the configured guidance mode."""
    labels = np.asarray(labels, dtype=np.int64)
    cond = model_velocity_fn(model, labels)
    if guidance.mode == "none":
        return cond
    if guidance.mode == "cfg_interval":
        null = np.full_like(labels, model.cfg.null_label)
        uncond = model_velocity_fn(model, null)

        def fn_cfg(x, t):
            return cfg_velocity(
                cond(x, t), uncond(x, t), guidance.scale, t, (guidance.t_lo, guidance.t_hi)
            )

        return fn_cfg
    if weak_model is None:
        raise ConfigError("autoguidance requires a weak model")
    weak = model_velocity_fn(weak_model, labels)

    def fn_ag(x, t):
        return autoguidance_velocity(cond(x, t), weak(x, t), guidance.scale)

    return fn_ag


def generate_latents(
    model,
    labels: np.ndarray,
    sampler: SamplerConfig,
    guidance: GuidanceConfig,
    seed: int,
    weak_model=None,
) -> np.ndarray:
    """Draw x1 ~ N(0, I) per label and integrate down to clean latents."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min(initial=0) < 0 or labels.max(initial=0) > model.cfg.label_count:
        raise ContractError(
            f"labels must lie in [0, {model.cfg.label_count}] (null = {model.cfg.label_count})"
        )
    shape = (len(labels), model.cfg.num_tokens, model.cfg.token_dim)
    x1 = Rng(seed, stream_key(STREAM_SAMPLE)).standard_normal(shape, np.float32)
    fn = guided_velocity_fn(model, labels, guidance, weak_model)
    return euler_sample(fn, x1, sampler)


def generate(
    model,
    decoder,
    labels: np.ndarray,
    sampler: SamplerConfig,
    guidance: GuidanceConfig,
    seed: int,
    weak_model=None,
    batch_size: int = 64,
) -> np.ndarray:
    """Latents from the velocity model, decoded to images.

    Sampling is batched to bound memory; each batch derives its own noise
    stream so results are independent of batch_size only per (seed, index)
    layout, and fully deterministic for a fixed configuration."""
    labels = np.asarray(labels, dtype=np.int64)
    outputs = []
    for start in range(0, len(labels), batch_size):
        chunk = labels[start : start + batch_size]
        latents = generate_latents(
            model, chunk, sampler, guidance, seed + start, weak_model
        )
        outputs.append(decoder.decode_arrays(latents))
    return np.concatenate(outputs, axis=0)
