"""Central finite-difference gradient oracle.

The checker never looks at the tape: it re-evaluates the supplied scalar
function at perturbed inputs, so it stays independent of the reverse-mode
path it verifies. Functions are rebuilt with float64 leaves when `dtype`
says so, giving the high-precision recheck."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def finite_difference_gradients(
    fn: Callable[[Sequence[Tensor]], Tensor],
    inputs: Sequence[np.ndarray],
    h: float = 1e-3,
) -> list[np.ndarray]:
    """Central differences of a scalar function, evaluated in float64."""
    base = [np.array(x, dtype=np.float64) for x in inputs]  # copies: inputs may alias

    def value(arrays) -> float:
        leaves = [Tensor(a.astype(np.float64)) for a in arrays]
        return float(fn(leaves).data)

    grads = []
    for i, x in enumerate(base):
        g = np.zeros_like(x)
        flat_x = x.reshape(-1)
        flat_g = g.reshape(-1)
        for j in range(flat_x.size):
            orig = flat_x[j]
            flat_x[j] = orig + h
            up = value(base)
            flat_x[j] = orig - h
            down = value(base)
            flat_x[j] = orig
            flat_g[j] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def analytic_gradients(
    fn: Callable[[Sequence[Tensor]], Tensor],
    inputs: Sequence[np.ndarray],
    dtype=np.float32,
) -> list[np.ndarray]:
    """Reverse-mode gradients of the same function at the requested precision."""
    leaves = [Tensor(np.array(x, dtype=dtype), requires_grad=True) for x in inputs]
    loss = fn(leaves)
    loss.backward()
    return [
        leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
        for leaf in leaves
    ]


def relative_error(analytic: np.ndarray, reference: np.ndarray) -> float:
    """Max absolute difference normalized by the reference gradient scale."""
    scale = float(np.max(np.abs(reference)))
    if scale == 0.0:
        return float(np.max(np.abs(analytic), initial=0.0))
    return float(np.max(np.abs(analytic.astype(np.float64) - reference)) / scale)


def check_gradients(
    fn: Callable[[Sequence[Tensor]], Tensor],
    inputs: Sequence[np.ndarray],
    tol32: float = 1e-3,
    tol64: float = 1e-6,
    h32: float = 1e-3,
    h64: float = 1e-5,
) -> tuple[float, float]:
    """Two-precision check; returns (worst rel. error fp32, fp64).

    Raises AssertionError when either tolerance is violated."""
    fd32 = finite_difference_gradients(fn, inputs, h=h32)
    an32 = analytic_gradients(fn, inputs, dtype=np.float32)
    err32 = max(relative_error(a, r) for a, r in zip(an32, fd32))

    fd64 = finite_difference_gradients(fn, inputs, h=h64)
    an64 = analytic_gradients(fn, inputs, dtype=np.float64)
    err64 = max(relative_error(a, r) for a, r in zip(an64, fd64))

    assert err32 < tol32, f"float32 gradient error {err32} >= {tol32}"
    assert err64 < tol64, f"float64 gradient error {err64} >= {tol64}"
    return err32, err64
