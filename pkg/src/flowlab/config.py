"""Experiment configuration: nested dataclasses parsed from a line-based
``key = value`` text format with ``#`` comments and dotted section keys.

Every key has a default, unknown keys are rejected with the offending line
number, and serialize -> parse round-trips to an equal config.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields

from .errors import ConfigError, ConfigParseError

EXPERIMENT_KINDS = (
    "overfit_sweep",
    "schedule_ablation",
    "noiseaug_ablation",
    "pipeline",
    "generate",
    "verify_theory",
    "metrics",
    "convert_data",
)


@dataclass
class ShiftSection:
    enabled: bool = False
    m: int = 0  # 0 = derive from num_tokens x token_dim
    n_base: int = 4096


@dataclass
class FlowSection:
    shift: ShiftSection = field(default_factory=ShiftSection)


@dataclass
class HeadSection:
    enabled: bool = False
    depth: int = 2
    width: int = 2048


@dataclass
class ModelSection:
    preset: str = "S"
    width: int = 0  # 0 = take from preset
    depth: int = 0
    heads: int = 0
    token_dim: int = 64
    num_tokens: int = 64
    label_count: int = 10
    label_dropout: float = 0.1
    head: HeadSection = field(default_factory=HeadSection)


@dataclass
class RaeSection:
    enc_patch: int = 4
    enc_seed: int = 11
    token_dim: int = 64
    tau: float = 0.8
    dec_width: int = 64
    dec_depth: int = 2
    dec_heads: int = 4
    dec_patch: int = 4
    upsample_head: bool = False
    steps: int = 600
    batch: int = 32
    lr: float = 1e-3
    lr_min: float = 1e-4
    perceptual_start_step: int = 0
    adversarial_start_step: int = 0


@dataclass
class SamplerSection:
    steps: int = 50
    shift_grid: bool = True  # apply the schedule shift to the inference grid


@dataclass
class GuidanceSection:
    mode: str = "none"
    scale: float = 1.5
    t_lo: float = 0.0
    t_hi: float = 1.0


@dataclass
class OptimSection:
    lr: float = 2e-4
    schedule: str = "constant"
    lr_min: float = 2e-5
    warmup_steps: int = 0
    beta1: float = 0.9
    beta2: float = 0.95
    weight_decay: float = 0.0
    ema: float = 0.9999
    ema_enabled: bool = True
    grad_clip: float = 0.0


@dataclass
class TrainSection:
    steps: int = 1500
    batch: int = 16


@dataclass
class DataSection:
    classes: int = 10
    per_class: int = 40
    ref_per_class: int = 40
    image_size: int = 32
    seed: int = 1
    path: str = ""  # empty = procedural dataset


@dataclass
class TheorySection:
    token_dim: int = 64
    num_tokens: int = 4
    widths: tuple[int, ...] = (16, 32, 64, 96)
    depths: tuple[int, ...] = (4,)
    steps: int = 1200
    batch: int = 32
    lr: float = 2e-4
    targets: int = 3
    seeds_per_target: int = 3
    target_scale: float = 0.25
    final_window: int = 100
    tol_under: float = 0.02
    tol_over: float = 0.15
    tol_wide: float = 0.10


@dataclass
class MetricsSection:
    feature_dim: int = 64
    feature_seed: int = 7
    dataset_a: str = ""
    dataset_b: str = ""


@dataclass
class PipelineSection:
    gen_per_class: int = 24
    early_fraction: float = 0.15  # step fraction for the weak/early snapshot
    sample_batch: int = 64


@dataclass
class ConvertSection:
    src: str = ""
    dst: str = "dataset.bin"


@dataclass
class RunSection:
    checkpoint: str = ""  # for the generate subcommand


@dataclass
class ExperimentConfig:
    experiment: str = "pipeline"
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    out: str = "out"
    model: ModelSection = field(default_factory=ModelSection)
    flow: FlowSection = field(default_factory=FlowSection)
    rae: RaeSection = field(default_factory=RaeSection)
    sampler: SamplerSection = field(default_factory=SamplerSection)
    guidance: GuidanceSection = field(default_factory=GuidanceSection)
    optim: OptimSection = field(default_factory=OptimSection)
    train: TrainSection = field(default_factory=TrainSection)
    data: DataSection = field(default_factory=DataSection)
    theory: TheorySection = field(default_factory=TheorySection)
    metrics: MetricsSection = field(default_factory=MetricsSection)
    pipeline: PipelineSection = field(default_factory=PipelineSection)
    convert: ConvertSection = field(default_factory=ConvertSection)
    run: RunSection = field(default_factory=RunSection)


# dataclass field types arrive as strings under `from __future__ import
# annotations`; resolve them once against this module's namespace
def _resolved_fields(cls):
    import typing

    hints = typing.get_type_hints(cls)
    return [(f.name, hints[f.name]) for f in fields(cls)]


def build_schema(cls=ExperimentConfig, prefix: str = "") -> dict[str, object]:
    schema: dict[str, object] = {}
    for name, tp in _resolved_fields(cls):
        key = f"{prefix}{name}"
        if dataclasses.is_dataclass(tp):
            schema.update(build_schema(tp, f"{key}."))
        else:
            schema[key] = tp
    return schema


_SCHEMA = build_schema()


def _parse_value(text: str, tp, line: int):
    text = text.strip()
    if tp is bool:
        low = text.lower()
        if low in ("true", "1", "yes", "on"):
            return True
        if low in ("false", "0", "no", "off"):
            return False
        raise ConfigParseError(f"expected a boolean, got {text!r}", line)
    if tp is int:
        try:
            return int(text)
        except ValueError:
            raise ConfigParseError(f"expected an integer, got {text!r}", line) from None
    if tp is float:
        try:
            return float(text)
        except ValueError:
            raise ConfigParseError(f"expected a number, got {text!r}", line) from None
    if tp is str:
        return text
    if tp == tuple[int, ...]:
        if not text:
            raise ConfigParseError("expected a comma-separated integer list", line)
        try:
            return tuple(int(part.strip()) for part in text.split(","))
        except ValueError:
            raise ConfigParseError(
                f"expected a comma-separated integer list, got {text!r}", line
            ) from None
    raise ConfigParseError(f"unsupported config type {tp}", line)


def _set_dotted(cfg: ExperimentConfig, key: str, value) -> None:
    parts = key.split(".")
    target = cfg
    for part in parts[:-1]:
        target = getattr(target, part)
    setattr(target, parts[-1], value)


def _get_dotted(cfg: ExperimentConfig, key: str):
    target = cfg
    for part in key.split("."):
        target = getattr(target, part)
    return target


def parse_config(text: str) -> ExperimentConfig:
    """Parse config text; defaults fill everything not mentioned."""
    cfg = ExperimentConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _SCHEMA:
            raise ConfigParseError(f"unknown key {key!r}", lineno)
        _set_dotted(cfg, key, _parse_value(value, _SCHEMA[key], lineno))
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    if cfg.experiment not in EXPERIMENT_KINDS:
        raise ConfigError(f"unknown experiment {cfg.experiment!r}; known: {EXPERIMENT_KINDS}")
    if not cfg.seeds:
        raise ConfigError("seed list must be nonempty")
    if cfg.optim.schedule not in ("constant", "linear_decay"):
        raise ConfigError(f"unknown lr schedule {cfg.optim.schedule!r}")
    if cfg.guidance.mode not in ("none", "cfg_interval", "autoguidance"):
        raise ConfigError(f"unknown guidance mode {cfg.guidance.mode!r}")
    if not 0.0 <= cfg.optim.ema <= 1.0:
        raise ConfigError(f"EMA beta must lie in [0, 1], got {cfg.optim.ema}")


def serialize_config(cfg: ExperimentConfig) -> str:
    """Emit sorted key = value lines; parse(serialize(cfg)) == cfg."""
    lines = []
    for key in sorted(_SCHEMA):
        value = _get_dotted(cfg, key)
        if isinstance(value, tuple):
            rendered = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, float):
            rendered = repr(value)
        else:
            rendered = str(value)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"


def apply_overrides(cfg: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    """Apply repeatable --override key=value pairs on top of a config."""
    for i, item in enumerate(overrides, start=1):
        if "=" not in item:
            raise ConfigParseError(f"override must be key=value, got {item!r}", i)
        key, _, value = item.partition("=")
        key = key.strip()
        if key not in _SCHEMA:
            raise ConfigParseError(f"unknown key {key!r}", i)
        _set_dotted(cfg, key, _parse_value(value, _SCHEMA[key], i))
    validate_config(cfg)
    return cfg


def default_config(experiment: str = "pipeline") -> ExperimentConfig:
    cfg = ExperimentConfig()
    cfg.experiment = experiment
    validate_config(cfg)
    return cfg
