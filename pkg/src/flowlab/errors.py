"""Exception taxonomy shared across the package."""


class FlowLabError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(FlowLabError, ValueError):
    """Tensor extents incompatible with the requested operation."""


class ContractError(FlowLabError, ValueError):
    """An operation was called outside its documented contract."""


class ConfigError(FlowLabError, ValueError):
    """Invalid configuration value or combination."""


class DomainError(FlowLabError, ValueError):
    """Scalar argument outside its mathematical domain."""


class DataError(FlowLabError, ValueError):
    """Input data violates a statistical precondition (NaN, too few rows, non-PSD)."""


class SamplingError(FlowLabError, RuntimeError):
    """Numerical failure during ODE sampling. Carries the failing step index."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class ExperimentError(FlowLabError, RuntimeError):
    """A training/evaluation run diverged or could not complete."""


class CheckpointError(FlowLabError, ValueError):
    """Checkpoint file is corrupt or truncated. Carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class ConfigParseError(FlowLabError, ValueError):
    """Config text could not be parsed. Carries the 1-based line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EncoderMutatedError(FlowLabError, RuntimeError):
    """Frozen encoder weights changed during a training run."""
