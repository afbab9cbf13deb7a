"""Training loop for velocity models: stateless per-step random streams,
EMA tracking, learning-rate schedules, optional gradient clipping.

All per-step randomness is keyed by (seed, purpose, step), so resuming from
a checkpoint reproduces the uninterrupted run bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ExperimentError
from .flow import ScheduleShift, interpolate, sample_training_time, velocity_target
from .model import DiT
from .optim import AdamState, FlatParams, adam_step, ema_update_flat, grad_clip_flat
from .rng import (
    STREAM_BATCH,
    STREAM_DROPOUT,
    STREAM_NOISE,
    STREAM_TIME,
    Rng,
    stream_key,
)
from .tensor import Tensor, tmean


@dataclass
class TrainConfig:
    steps: int = 1000
    batch_size: int = 32
    lr: float = 2e-4
    lr_schedule: str = "constant"  # constant | linear_decay
    lr_min: float = 2e-5
    warmup_steps: int = 0  # constant-rate hold before the decay begins
    beta1: float = 0.9
    beta2: float = 0.95
    weight_decay: float = 0.0
    adam_eps: float = 1e-8
    grad_clip: float = 0.0  # 0 disables
    ema_beta: float = 0.0  # 0 disables
    label_dropout: float = 0.0

    def __post_init__(self):
        if self.lr_schedule not in ("constant", "linear_decay"):
            raise ConfigError(f"unknown lr schedule {self.lr_schedule!r}")
        if not 0.0 <= self.label_dropout < 1.0:
            raise ConfigError(f"label_dropout must be in [0, 1), got {self.label_dropout}")


def learning_rate(cfg: TrainConfig, step: int) -> float:
    """Rate for 0-based step. Constant, or hold for warmup then decay linearly."""
    if cfg.lr_schedule == "constant":
        return cfg.lr
    if step < cfg.warmup_steps:
        return cfg.lr
    span = max(1, cfg.steps - cfg.warmup_steps)
    frac = min(1.0, (step - cfg.warmup_steps) / span)
    return cfg.lr + (cfg.lr_min - cfg.lr) * frac


@dataclass
class TrainState:
    params: dict[str, Tensor]
    flat: FlatParams
    adam: AdamState
    grad_buf: np.ndarray
    step: int = 0
    ema: np.ndarray | None = None  # flat EMA buffer
    loss_history: list[float] = field(default_factory=list)

    def ema_arrays(self) -> dict[str, np.ndarray] | None:
        return None if self.ema is None else self.flat.unflatten(self.ema)


def init_train_state(model: DiT, cfg: TrainConfig) -> TrainState:
    params = model.named_parameters()
    flat = FlatParams(params)
    adam = AdamState(
        lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2,
        eps=cfg.adam_eps, weight_decay=cfg.weight_decay,
    )
    ema = flat.flat.copy() if cfg.ema_beta > 0.0 else None
    return TrainState(
        params=params, flat=flat, adam=adam,
        grad_buf=np.zeros_like(flat.flat), ema=ema,
    )


def train_step(
    model: DiT,
    state: TrainState,
    latents: np.ndarray,
    labels: np.ndarray | None,
    cfg: TrainConfig,
    seed: int,
    shift: ScheduleShift | None = None,
) -> float:
    """One optimization step; returns the (float32-exact) batch loss."""
    k = state.step
    b = cfg.batch_size
    idx = Rng(seed, stream_key(STREAM_BATCH, k)).integers(latents.shape[0], (b,))
    x = latents[idx]
    if labels is None:
        y = np.full((b,), model.cfg.null_label, dtype=np.int64)
    else:
        y = labels[idx].astype(np.int64)
        if cfg.label_dropout > 0.0:
            drop = Rng(seed, stream_key(STREAM_DROPOUT, k)).uniform((b,), dtype=np.float64)
            y = np.where(drop < cfg.label_dropout, model.cfg.null_label, y)
    eps = Rng(seed, stream_key(STREAM_NOISE, k)).standard_normal(x.shape, dtype=np.float32)
    t = sample_training_time(Rng(seed, stream_key(STREAM_TIME, k)), shift, size=(b,))
    x_t = interpolate(x, eps, t)
    target = velocity_target(x, eps)

    v = model(Tensor(x_t), t, y)
    diff = v - Tensor(target)
    loss = tmean(diff * diff)
    loss.backward()

    grads = state.flat.gather_grads(state.grad_buf)
    if cfg.grad_clip > 0.0:
        grad_clip_flat(grads, cfg.grad_clip)
    adam_step({"flat": state.flat.flat}, {"flat": grads}, state.adam, lr=learning_rate(cfg, k))
    if state.ema is not None:
        ema_update_flat(state.ema, state.flat.flat, cfg.ema_beta)
    state.step += 1

    value = loss.item()
    if not np.isfinite(value):
        raise ExperimentError(f"loss diverged at step {k}: {value}")
    state.loss_history.append(value)
    return value


def train_flow_model(
    model: DiT,
    latents: np.ndarray,
    labels: np.ndarray | None,
    cfg: TrainConfig,
    seed: int,
    shift: ScheduleShift | None = None,
    state: TrainState | None = None,
    snapshot_step: int | None = None,
) -> tuple[TrainState, dict[str, np.ndarray] | None]:
    """Run cfg.steps optimization steps (continuing from `state` if given).

    Returns the final state and, when `snapshot_step` is hit, a copy of the
    evaluation weights at that step (EMA when enabled, raw otherwise)."""
    if state is None:
        state = init_train_state(model, cfg)
    snapshot = None
    while state.step < cfg.steps:
        train_step(model, state, latents, labels, cfg, seed, shift)
        if snapshot_step is not None and state.step == snapshot_step:
            snapshot = eval_weights(state)
    return state, snapshot


def eval_weights(state: TrainState) -> dict[str, np.ndarray]:
    """Weights used for evaluation: EMA when tracked, raw otherwise."""
    if state.ema is not None:
        return state.flat.unflatten(state.ema)
    return state.flat.arrays()
