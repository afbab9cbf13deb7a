"""Deterministic counter-based random streams.

Every stream is fully identified by a ``(seed, stream)`` pair of 64-bit
integers, so independent streams can be derived without coordination and a
training run can be resumed mid-way by re-deriving the stream for any step.
Backed by numpy's Philox counter generator.
"""

from __future__ import annotations

import numpy as np

# Purpose tags for derived streams. Combined with a step index via
# stream_key() so per-step randomness is stateless and resumable.
STREAM_INIT = 0
STREAM_DATA = 1
STREAM_BATCH = 2
STREAM_NOISE = 3
STREAM_TIME = 4
STREAM_DROPOUT = 5
STREAM_SAMPLE = 6
STREAM_AUGMENT = 7
STREAM_TARGET = 8


def stream_key(purpose: int, step: int = 0) -> int:
    """Pack a purpose tag and step index into one 64-bit stream id."""
    if not 0 <= purpose < 2**16:
        raise ValueError(f"purpose tag out of range: {purpose}")
    if not 0 <= step < 2**48:
        raise ValueError(f"step out of range: {step}")
    return (purpose << 48) | step


class Rng:
    """Seedable random stream with derivable independent sub-streams."""

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & (2**64 - 1)
        self.stream = int(stream) & (2**64 - 1)
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def derive(self, stream: int) -> "Rng":
        """Fresh stream for the same seed; independent of this one."""
        return Rng(self.seed, stream)

    def standard_normal(self, shape=(), dtype=np.float32) -> np.ndarray:
        return self._gen.standard_normal(size=shape, dtype=dtype)

    def uniform(self, shape=(), dtype=np.float32) -> np.ndarray:
        return self._gen.random(size=shape, dtype=dtype)

    def integers(self, high: int, shape=()) -> np.ndarray:
        return self._gen.integers(0, high, size=shape, dtype=np.int64)

    def normal(self, loc: float, scale: float, shape=(), dtype=np.float32) -> np.ndarray:
        out = self._gen.standard_normal(size=shape, dtype=dtype)
        return (out * dtype(scale) + dtype(loc)).astype(dtype, copy=False)

    def orthogonal(self, rows: int, cols: int, dtype=np.float32) -> np.ndarray:
        """Matrix with orthonormal rows (rows <= cols) or columns (rows >= cols)."""
        big, small = max(rows, cols), min(rows, cols)
        a = self._gen.standard_normal(size=(big, small))
        q, r = np.linalg.qr(a)
        q = q * np.sign(np.diag(r))  # fix sign convention for determinism
        out = q if rows >= cols else q.T
        return out.astype(dtype)
