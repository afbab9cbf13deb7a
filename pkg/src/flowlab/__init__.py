"""Desk-scale laboratory for flow-matching diffusion transformers on
autoencoder latents, with numerical oracles for the spectral loss bounds."""

import ctypes
import ctypes.util


def _tune_allocator() -> None:
    """Raise glibc's mmap threshold so training-step temporaries stay on the
    heap; the default threshold causes an mmap/munmap storm on hot loops."""
    try:
        libc = ctypes.CDLL(ctypes.util.find_library("c"), use_errno=True)
        m_mmap_threshold = -3
        libc.mallopt(m_mmap_threshold, 16 * 1024 * 1024)
    except (OSError, AttributeError, TypeError):
        pass  # non-glibc platform: allocation stays correct, just slower


_tune_allocator()

from .errors import (  # noqa: E402
    CheckpointError,
    ConfigError,
    ConfigParseError,
    ContractError,
    DataError,
    DomainError,
    EncoderMutatedError,
    ExperimentError,
    FlowLabError,
    SamplingError,
    ShapeError,
)
from .rng import Rng  # noqa: E402
from .tensor import Tensor, no_grad  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "Tensor", "Rng", "no_grad", "FlowLabError", "ShapeError", "ContractError",
    "ConfigError", "DomainError", "DataError", "SamplingError",
    "ExperimentError", "CheckpointError", "ConfigParseError",
    "EncoderMutatedError", "__version__",
]
