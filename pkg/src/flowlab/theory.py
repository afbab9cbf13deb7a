"""Width-bound verification: train narrow velocity models on a point mass
and compare their floor against the spectral prediction.

For a fixed latent x0, the velocity target eps - x0 has identity covariance,
so a backbone of width d must plateau at per-dimension loss (n-d)/n or above,
while any width >= n can drive the loss toward zero. The experiment runs the
point-mass protocol over a grid of widths/depths, several targets and seeds,
and issues PASS/FAIL verdicts against configured tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .model import DiT, ModelConfig, heads_for_width
from .rng import STREAM_TARGET, Rng, stream_key
from .train import TrainConfig, train_flow_model


@dataclass
class WidthBoundSettings:
    token_dim: int = 64
    num_tokens: int = 4
    widths: tuple[int, ...] = (16, 32, 64, 96)
    depths: tuple[int, ...] = (4,)
    steps: int = 1200
    batch_size: int = 32
    lr: float = 2e-4
    num_targets: int = 3
    seeds_per_target: int = 3
    target_scale: float = 0.25
    final_window: int = 100
    tol_under: float = 0.02  # runs may undershoot the bound by at most this
    tol_over: float = 0.15  # narrow models must land within this of the bound
    tol_wide: float = 0.10  # wide models must reach at least this loss
    base_seed: int = 0

    def __post_init__(self):
        if self.num_targets <= 0 or self.seeds_per_target <= 0:
            raise ConfigError("need at least one target and one seed")


@dataclass
class WidthBoundRun:
    token_dim: int
    width: int
    depth: int
    seed: int
    bound: float
    final_loss: float
    undershoot_ok: bool


@dataclass
class WidthBoundCell:
    token_dim: int
    width: int
    depth: int
    bound: float
    mean_final_loss: float
    verdict: str
    runs: list[WidthBoundRun] = field(default_factory=list)


@dataclass
class WidthBoundReport:
    settings: WidthBoundSettings
    cells: list[WidthBoundCell]

    @property
    def all_pass(self) -> bool:
        return all(c.verdict == "PASS" for c in self.cells)


def delta_latent(token_dim: int, num_tokens: int, target_seed: int, scale: float) -> np.ndarray:
    """Point-mass latent: one normalized n-vector replicated across tokens.

    Identical tokens keep the target covariance exactly isotropic, so the
    per-dimension floor is (n-d)/n with no cross-token correction. The
    modest scale keeps the mean component learnable inside the pinned
    step budget."""
    raw = Rng(target_seed, stream_key(STREAM_TARGET)).standard_normal((token_dim,), np.float32)
    raw = (raw - raw.mean()) / raw.std()
    x0 = (scale * raw).astype(np.float32)
    return np.tile(x0, (1, num_tokens, 1))


def run_seed(seed: int, target_index: int, base_seed: int = 0) -> int:
    """Flatten (target, seed) into one run seed so report rows carry it."""
    return base_seed + 1000 * (target_index + 1) + seed


def overfit_point_mass(
    width: int,
    depth: int,
    settings: WidthBoundSettings,
    target_index: int,
    seed_index: int,
) -> WidthBoundRun:
    seed = run_seed(seed_index, target_index, settings.base_seed)
    latent = delta_latent(
        settings.token_dim, settings.num_tokens, seed + 500_000, settings.target_scale
    )
    cfg = ModelConfig(
        dim=width,
        num_heads=heads_for_width(width),
        depth=depth,
        token_dim=settings.token_dim,
        num_tokens=settings.num_tokens,
        label_count=0,
    )
    model = DiT(cfg, Rng(seed, 0))
    train_cfg = TrainConfig(
        steps=settings.steps, batch_size=settings.batch_size, lr=settings.lr,
    )  # constant rate, no EMA, no clipping: the point-mass protocol
    state, _ = train_flow_model(model, latent, None, train_cfg, seed=seed)
    window = min(settings.final_window, len(state.loss_history))
    final = float(np.mean(state.loss_history[-window:]))
    n = settings.token_dim
    bound = max(0.0, (n - width) / n)
    return WidthBoundRun(
        token_dim=n, width=width, depth=depth, seed=seed, bound=bound,
        final_loss=final, undershoot_ok=final >= bound - settings.tol_under,
    )


def verify_width_bound(settings: WidthBoundSettings | None = None) -> WidthBoundReport:
    """Run the full grid and judge each (width, depth) cell.

    PASS iff no run undershoots bound - tol_under, and the cell-mean loss
    lands within tol_over above the bound (narrow) or below tol_wide (wide)."""
    settings = settings or WidthBoundSettings()
    n = settings.token_dim
    cells: list[WidthBoundCell] = []
    for depth in settings.depths:
        for width in settings.widths:
            runs = [
                overfit_point_mass(width, depth, settings, ti, si)
                for ti in range(settings.num_targets)
                for si in range(settings.seeds_per_target)
            ]
            mean_final = float(np.mean([r.final_loss for r in runs]))
            bound = max(0.0, (n - width) / n)
            ok_under = all(r.undershoot_ok for r in runs)
            if width < n:
                ok_upper = mean_final <= bound + settings.tol_over
            else:
                ok_upper = mean_final <= settings.tol_wide
            cells.append(
                WidthBoundCell(
                    token_dim=n, width=width, depth=depth, bound=bound,
                    mean_final_loss=mean_final,
                    verdict="PASS" if (ok_under and ok_upper) else "FAIL",
                    runs=runs,
                )
            )
    return WidthBoundReport(settings=settings, cells=cells)
