"""Flow-matching interpolation, the dimension-dependent schedule shift, and
the closed-form Gaussian velocity oracle.

The noising path is the linear interpolant x_t = (1-t) x + t eps with
eps ~ N(0, I); the regression target is the constant conditional velocity
eps - x. Time runs in [0, 1] with t=1 pure noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ContractError, DomainError
from .rng import Rng
from .tensor import Tensor, tmean

_T_SLACK = 1e-9


def _check_time(t) -> np.ndarray:
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr < -_T_SLACK) or np.any(arr > 1.0 + _T_SLACK):
        raise DomainError(f"time must lie in [0, 1], got {arr}")
    return np.clip(arr, 0.0, 1.0)


@dataclass
class ScheduleShift:
    """Timestep remap t -> alpha*t / (1 + (alpha-1)*t), alpha = sqrt(m/n_base).

    `m` is the effective data dimension (tokens x channels); alpha > 1 pushes
    training mass toward the noisy end."""

    m: int
    n_base: int = 4096
    alpha: float = field(init=False)

    def __post_init__(self):
        if self.m <= 0 or self.n_base <= 0:
            raise ConfigError(f"dimensions must be positive, got m={self.m}, n_base={self.n_base}")
        self.alpha = math.sqrt(self.m / self.n_base)

    def inverse(self) -> "ScheduleShift":
        """Shift with alpha -> 1/alpha; undoes this shift."""
        return ScheduleShift(m=self.n_base, n_base=self.m)


def effective_dim(num_tokens: int, token_dim: int) -> int:
    """Token count times channel width: the dimension that drives the shift."""
    if num_tokens <= 0 or token_dim <= 0:
        raise ConfigError(
            f"num_tokens and token_dim must be positive, got {num_tokens}, {token_dim}"
        )
    return num_tokens * token_dim


def shift_timestep(t, shift: ScheduleShift):
    """Apply the dimension-dependent remap; identity when alpha == 1."""
    arr = _check_time(t)
    a = shift.alpha
    out = a * arr / (1.0 + (a - 1.0) * arr)
    if np.isscalar(t) or np.ndim(t) == 0:
        return float(out)
    return out


def interpolate(x: np.ndarray, eps: np.ndarray, t) -> np.ndarray:
    """x_t = (1-t) x + t eps; t scalar or per-sample vector."""
    if x.shape != eps.shape:
        raise ContractError(f"shape mismatch: x {x.shape} vs eps {eps.shape}")
    tt = _check_time(t).astype(x.dtype)
    if tt.ndim > 0:
        tt = tt.reshape(tt.shape + (1,) * (x.ndim - tt.ndim))
    return (1.0 - tt) * x + tt * eps


def velocity_target(x: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """Conditional velocity eps - x (constant along the interpolant)."""
    if x.shape != eps.shape:
        raise ContractError(f"shape mismatch: x {x.shape} vs eps {eps.shape}")
    return eps - x


@dataclass
class FlowSample:
    """One draw of the noising process with its regression target."""

    x: np.ndarray
    eps: np.ndarray
    t: float
    x_t: np.ndarray
    target: np.ndarray


def make_flow_sample(x: np.ndarray, eps: np.ndarray, t: float) -> FlowSample:
    return FlowSample(x=x, eps=eps, t=float(t), x_t=interpolate(x, eps, t), target=velocity_target(x, eps))


def sample_training_time(
    rng: Rng, shift: ScheduleShift | None = None, size=()
) -> np.ndarray | float:
    """t ~ Uniform[0,1], then shifted when a schedule shift is configured."""
    u = rng.uniform(shape=size, dtype=np.float64)
    if shift is not None:
        u = shift_timestep(u, shift)
    return u


def analytic_gaussian_velocity(x_t: np.ndarray, t) -> np.ndarray:
    """Exact velocity field E[eps - x | x_t] for x ~ N(0, I).

    Both x and eps are standard normal, so the posterior is linear in x_t:
    (2t-1) x_t / ((1-t)^2 + t^2). Serves as the sampler/model oracle."""
    tt = _check_time(t)
    coef = (2.0 * tt - 1.0) / ((1.0 - tt) ** 2 + tt**2)
    coef = np.asarray(coef, dtype=x_t.dtype)
    if coef.ndim > 0:
        coef = coef.reshape(coef.shape + (1,) * (x_t.ndim - coef.ndim))
    return coef * x_t


def flow_matching_loss(velocity: Tensor, target: np.ndarray) -> Tensor:
    """Mean squared velocity error, normalized per dimension.

    Per-dimension averaging makes the rank-bound read (n-d)/n directly."""
    if velocity.size == 0:
        raise ContractError("empty batch")
    diff = velocity - Tensor(np.asarray(target, dtype=velocity.dtype))
    return tmean(diff * diff)


def model_flow_loss(model, batch_x: np.ndarray, eps: np.ndarray, t, labels, target=None) -> Tensor:
    """Forward a velocity model on interpolated inputs and score it."""
    x_t = interpolate(batch_x, eps, t)
    if target is None:
        target = velocity_target(batch_x, eps)
    v = model(Tensor(x_t), np.asarray(t, dtype=np.float64), labels)
    return flow_matching_loss(v, target)
