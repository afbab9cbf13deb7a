"""Spectra of velocity-target covariances and the rank-bound calculators.

Everything here runs in 64-bit: these are the oracles the trained models are
judged against, so they must be more precise than the system under test.

The central quantity is the covariance of W = eps - x. A velocity model
whose internal width is d can only realize outputs in a d-dimensional
subspace (plus an offset), so its expected squared error is at least the
energy of W outside the best rank-d subspace: the sum of the n-d smallest
covariance eigenvalues (best subspace = top-d eigenvectors, which is the
Ky-Fan maximum principle).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DomainError, ShapeError


def jacobi_eigh(matrix: np.ndarray, tol: float = 1e-14, max_sweeps: int = 60):
    """Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.

    Returns (eigenvalues descending, eigenvectors as columns), float64.
    Rotations repeat until the off-diagonal Frobenius mass falls below
    tol * ||A||_F."""
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got {a.shape}")
    if not np.allclose(a, a.T, atol=1e-10 * max(1.0, float(np.abs(a).max()))):
        raise DataError("matrix is not symmetric")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    vecs = np.eye(n)
    norm = np.linalg.norm(a)
    if norm == 0.0:
        return np.zeros(n), vecs
    threshold = tol * norm
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                rot_p = a[:, p].copy()
                rot_q = a[:, q].copy()
                a[:, p] = c * rot_p - s * rot_q
                a[:, q] = s * rot_p + c * rot_q
                rot_p = a[p, :].copy()
                rot_q = a[q, :].copy()
                a[p, :] = c * rot_p - s * rot_q
                a[q, :] = s * rot_p + c * rot_q
                vec_p = vecs[:, p].copy()
                vecs[:, p] = c * vec_p - s * vecs[:, q]
                vecs[:, q] = s * vec_p + c * vecs[:, q]
    eigvals = np.diag(a).copy()
    order = np.argsort(-eigvals, kind="stable")
    return eigvals[order], vecs[:, order]


@dataclass
class SpectralSummary:
    """Descending covariance eigenvalues; the currency of the rank bounds."""

    eigenvalues: np.ndarray
    dimension: int

    def __post_init__(self):
        vals = np.asarray(self.eigenvalues, dtype=np.float64)
        if vals.ndim != 1 or len(vals) != self.dimension:
            raise ShapeError(f"expected {self.dimension} eigenvalues, got shape {vals.shape}")
        if np.any(np.diff(vals) > 1e-12):
            raise DataError("eigenvalues must be sorted in descending order")
        if np.any(vals < -1e-8):
            raise DataError(f"covariance must be PSD; smallest eigenvalue {vals.min()}")
        self.eigenvalues = vals

    @property
    def trace(self) -> float:
        return float(self.eigenvalues.sum())


def empirical_covariance(samples: np.ndarray, center: bool = True) -> np.ndarray:
    """Mean-centered 1/M covariance in float64."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"expected samples of shape (M, n), got {x.shape}")
    if x.shape[0] < 2:
        raise DataError(f"need at least 2 samples, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise DataError("samples contain NaN or infinity")
    if center:
        x = x - x.mean(axis=0, keepdims=True)
    return (x.T @ x) / x.shape[0]


def covariance_eigenvalues(samples: np.ndarray, center: bool = True) -> SpectralSummary:
    """Spectrum of the empirical covariance via the symmetric eigensolver."""
    cov = empirical_covariance(samples, center=center)
    vals, _ = jacobi_eigh(cov)
    return SpectralSummary(eigenvalues=vals, dimension=cov.shape[0])


def training_loss_lower_bound(spec: SpectralSummary, d: int) -> float:
    """Sum of the n-d smallest eigenvalues: the floor for a width-d model.

    Zero when d >= n (the family then contains the unconditional optimum)."""
    if d < 0:
        raise DomainError(f"width must be nonnegative, got {d}")
    if d >= spec.dimension:
        return 0.0
    return float(spec.eigenvalues[d:].sum())


def kyfan_projection_residual(data: np.ndarray, d: int, is_covariance: bool | None = None) -> float:
    """Residual energy of the best rank-d projection: Sum_{i>d} lambda_i.

    Accepts raw samples (M, n) or a covariance matrix; square symmetric
    input is treated as a covariance unless `is_covariance` says otherwise."""
    arr = np.asarray(data, dtype=np.float64)
    if is_covariance is None:
        is_covariance = (
            arr.ndim == 2
            and arr.shape[0] == arr.shape[1]
            and np.allclose(arr, arr.T, atol=1e-10)
        )
    cov = arr if is_covariance else empirical_covariance(arr)
    if d < 0 or d > cov.shape[0]:
        raise DomainError(f"rank must lie in [0, {cov.shape[0]}], got {d}")
    vals, _ = jacobi_eigh(cov)
    return float(vals[d:].sum()) if d < cov.shape[0] else 0.0


def explicit_projection_residual(samples: np.ndarray, d: int) -> float:
    """Independent route: project centered samples onto the top-d eigenvectors
    and measure the mean squared residual directly."""
    x = np.asarray(samples, dtype=np.float64)
    cov = empirical_covariance(x)
    _, vecs = jacobi_eigh(cov)
    centered = x - x.mean(axis=0, keepdims=True)
    basis = vecs[:, :d]
    residual = centered - (centered @ basis) @ basis.T
    return float(np.mean(np.sum(residual * residual, axis=1)))


def projection_residual(samples: np.ndarray, basis: np.ndarray) -> float:
    """Mean squared residual after projecting centered samples on `basis`
    (columns orthonormal). Used to verify optimality of the eigenbasis."""
    x = np.asarray(samples, dtype=np.float64)
    centered = x - x.mean(axis=0, keepdims=True)
    residual = centered - (centered @ basis) @ basis.T
    return float(np.mean(np.sum(residual * residual, axis=1)))


def inference_deviation_bound(spec: SpectralSummary, d: int, lipschitz: float) -> float:
    """Endpoint-deviation floor for sampling with a width-d model.

    (1 - exp(-L))/L times the training-loss bound; L is the Lipschitz
    constant of the exact velocity field, supplied by the caller."""
    if lipschitz <= 0:
        raise DomainError(f"Lipschitz constant must be positive, got {lipschitz}")
    factor = -np.expm1(-lipschitz) / lipschitz
    return float(factor * training_loss_lower_bound(spec, d))
