"""Generation metrics at desk scale: a Gaussian-moment Fréchet distance over
a frozen random feature map, and the label-sampling plans (class-balanced
versus uniform) whose scoring gap the harness reports."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, ShapeError
from .rng import Rng
from .spectral import jacobi_eigh


class FeatureMap:
    """Frozen random-projection network from images to k-dim features.

    Two fixed linear maps with a tanh in between; weights are pinned by the
    seed and never trained. Stands in for a pretrained feature extractor."""

    def __init__(self, image_shape: tuple[int, int, int] = (3, 32, 32), k: int = 64,
                 hidden: int = 128, seed: int = 7):
        self.image_shape = tuple(image_shape)
        self.k = k
        rng = Rng(seed, 0)
        d = int(np.prod(image_shape))
        self.w1 = (rng.standard_normal((d, hidden), np.float32) / np.float32(np.sqrt(d) / 2.0))
        self.b1 = 0.2 * rng.standard_normal((hidden,), np.float32)
        self.w2 = rng.standard_normal((hidden, k), np.float32) / np.float32(np.sqrt(hidden))
        for arr in (self.w1, self.b1, self.w2):
            arr.setflags(write=False)

    def __call__(self, images: np.ndarray) -> np.ndarray:
        images = np.asarray(images, dtype=np.float32)
        single = images.ndim == 3
        if single:
            images = images[None]
        if images.shape[1:] != self.image_shape:
            raise ShapeError(f"expected images of shape {self.image_shape}, got {images.shape[1:]}")
        flat = images.reshape(images.shape[0], -1)
        feats = np.tanh(flat @ self.w1 + self.b1) @ self.w2
        return feats[0] if single else feats


@dataclass
class GaussianMoments:
    mean: np.ndarray
    cov: np.ndarray
    count: int

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.cov = np.asarray(self.cov, dtype=np.float64)
        if self.count < 2:
            raise DataError(f"moments need at least 2 samples, got {self.count}")
        if self.cov.shape != (len(self.mean), len(self.mean)):
            raise ShapeError(f"cov shape {self.cov.shape} does not match mean {self.mean.shape}")
        if not np.allclose(self.cov, self.cov.T, atol=1e-8):
            raise DataError("covariance must be symmetric")


def fit_moments(features: np.ndarray) -> GaussianMoments:
    """Sample mean and (unbiased) covariance of feature rows."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"expected (M, k) features, got {x.shape}")
    if x.shape[0] < 2:
        raise DataError(f"need at least 2 feature rows, got {x.shape[0]}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = (centered.T @ centered) / (x.shape[0] - 1)
    cov = 0.5 * (cov + cov.T)
    return GaussianMoments(mean=mean, cov=cov, count=x.shape[0])


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    vals, vecs = jacobi_eigh(matrix)
    if np.any(vals < -1e-8 * max(1.0, float(vals.max(initial=0.0)))):
        raise DataError(f"matrix is not PSD; min eigenvalue {vals.min()}")
    root = np.sqrt(np.clip(vals, 0.0, None))
    return (vecs * root) @ vecs.T


def frechet_distance(a: GaussianMoments, b: GaussianMoments) -> float:
    """||mu_a - mu_b||^2 + Tr(Ca + Cb - 2 (Ca Cb)^(1/2)).

    The cross term uses the symmetrized product sqrt(Ca) Cb sqrt(Ca), whose
    eigenvalues give Tr((Ca Cb)^(1/2)) without forming a nonsymmetric root."""
    if a.mean.shape != b.mean.shape:
        raise ShapeError(f"feature dims disagree: {a.mean.shape} vs {b.mean.shape}")
    sa = _psd_sqrt(a.cov)
    inner = sa @ b.cov @ sa
    inner = 0.5 * (inner + inner.T)
    vals, _ = jacobi_eigh(inner)
    tr_cross = float(np.sqrt(np.clip(vals, 0.0, None)).sum())
    diff = a.mean - b.mean
    dist = float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * tr_cross)
    return max(dist, 0.0)


@dataclass(frozen=True)
class LabelPlan:
    labels: np.ndarray
    strategy: str  # balanced | uniform

    def counts(self, num_classes: int) -> np.ndarray:
        return np.bincount(self.labels, minlength=num_classes)


def balanced_labels(num_classes: int, per_class: int) -> LabelPlan:
    """Every class exactly per_class times, class-major order."""
    if num_classes <= 0 or per_class <= 0:
        raise ConfigError(f"num_classes and per_class must be positive: {num_classes}, {per_class}")
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), per_class)
    return LabelPlan(labels=labels, strategy="balanced")


def uniform_labels(num_classes: int, total: int, rng: Rng) -> LabelPlan:
    """total i.i.d. uniform class draws."""
    if num_classes <= 0 or total <= 0:
        raise ConfigError(f"num_classes and total must be positive: {num_classes}, {total}")
    return LabelPlan(labels=rng.integers(num_classes, (total,)), strategy="uniform")


def frechet_between(features_a: np.ndarray, features_b: np.ndarray) -> float:
    return frechet_distance(fit_moments(features_a), fit_moments(features_b))
