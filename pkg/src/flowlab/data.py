"""Image dataset I/O and the procedural desk-scale dataset.

On-disk format: a planar float32 binary with an 8-byte magic, then four
little-endian uint32 header words (count, C, H, W), then count*C*H*W raw
float32 values in row-major (N, C, H, W) order. The ingestion helper turns
common 8-bit image grids (.npy stacks, image files) into it.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from .errors import DataError, ShapeError
from .rng import Rng

DATASET_MAGIC = b"IMGPLNF4"


def write_image_dataset(path: str | os.PathLike, images: np.ndarray) -> None:
    images = np.asarray(images, dtype=np.float32)
    if images.ndim != 4:
        raise ShapeError(f"expected (N, C, H, W) images, got {images.shape}")
    n, c, h, w = images.shape
    tmp = Path(path).with_suffix(Path(path).suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(DATASET_MAGIC)
        f.write(struct.pack("<IIII", n, c, h, w))
        f.write(images.astype("<f4").tobytes(order="C"))
    os.replace(tmp, path)


def read_image_dataset(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != DATASET_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}")
        header = f.read(16)
        if len(header) != 16:
            raise DataError(f"{path}: truncated header")
        n, c, h, w = struct.unpack("<IIII", header)
        body = f.read(n * c * h * w * 4)
        if len(body) != n * c * h * w * 4:
            raise DataError(f"{path}: truncated body")
        if f.read(1):
            raise DataError(f"{path}: trailing bytes after image data")
    return np.frombuffer(body, dtype="<f4").reshape(n, c, h, w).copy()


def _images_from_u8(stack: np.ndarray) -> np.ndarray:
    if stack.ndim != 4:
        raise ShapeError(f"expected a 4-d uint8 grid, got {stack.shape}")
    if stack.shape[-1] in (1, 3) and stack.shape[1] not in (1, 3):
        stack = stack.transpose(0, 3, 1, 2)  # NHWC -> NCHW
    return (stack.astype(np.float32) / 255.0).astype(np.float32)


def ingest_images(src: str | os.PathLike, dst: str | os.PathLike) -> int:
    """Convert 8-bit image grids into the planar dataset format.

    Accepts a .npy stack (NHWC or NCHW uint8) or a directory of image files
    (requires Pillow). Returns the number of images written."""
    src = Path(src)
    if src.is_file() and src.suffix == ".npy":
        stack = np.load(src)
        if stack.dtype != np.uint8:
            raise DataError(f"{src}: expected uint8 data, got {stack.dtype}")
        images = _images_from_u8(stack)
    elif src.is_dir():
        try:
            from PIL import Image
        except ImportError as exc:
            raise DataError(
                "directory ingestion requires Pillow (pip install flowlab[images])"
            ) from exc
        files = sorted(
            p for p in src.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp")
        )
        if not files:
            raise DataError(f"{src}: no image files found")
        frames = []
        for p in files:
            arr = np.asarray(Image.open(p).convert("RGB"), dtype=np.uint8)
            frames.append(arr)
        shapes = {a.shape for a in frames}
        if len(shapes) != 1:
            raise DataError(f"{src}: images disagree on shape: {shapes}")
        images = _images_from_u8(np.stack(frames))
    else:
        raise DataError(f"{src}: expected a .npy stack or a directory of images")
    write_image_dataset(dst, images)
    return images.shape[0]


# -- procedural desk-scale dataset --------------------------------------------


def _class_recipe(k: int, num_classes: int):
    angle = np.pi * k / num_classes
    freq = 2.0 + (k % 3)
    cx = 0.5 + 0.3 * np.cos(2 * np.pi * k / num_classes)
    cy = 0.5 + 0.3 * np.sin(2 * np.pi * k / num_classes)
    hue = k / num_classes
    return angle, freq, cx, cy, hue


def make_toy_dataset(
    rng: Rng, num_classes: int = 10, per_class: int = 40, image_size: int = 32
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded 10-class shape/texture images in [0, 1], (N, 3, S, S).

    Each class pairs an oriented grating with a class-anchored blob and a
    class hue; per-sample jitter varies phase, blob position and amplitude."""
    s = image_size
    ys, xs = np.meshgrid(np.linspace(0, 1, s), np.linspace(0, 1, s), indexing="ij")
    images = np.zeros((num_classes * per_class, 3, s, s), dtype=np.float32)
    labels = np.zeros(num_classes * per_class, dtype=np.int64)
    i = 0
    for k in range(num_classes):
        angle, freq, cx, cy, hue = _class_recipe(k, num_classes)
        direction = np.cos(angle) * xs + np.sin(angle) * ys
        channel_gain = 0.5 + 0.5 * np.cos(2 * np.pi * (hue + np.arange(3) / 3.0))
        for _ in range(per_class):
            phase = float(rng.uniform()) * 2 * np.pi
            amp = 0.7 + 0.3 * float(rng.uniform())
            jx = 0.08 * float(rng.standard_normal())
            jy = 0.08 * float(rng.standard_normal())
            grating = 0.5 + 0.5 * np.sin(2 * np.pi * freq * direction + phase)
            blob = np.exp(-(((xs - cx - jx) ** 2 + (ys - cy - jy) ** 2) / 0.02))
            base = 0.6 * grating + 0.8 * blob
            noise = 0.02 * rng.standard_normal((3, s, s))
            img = 0.12 + amp * 0.55 * base[None, :, :] * channel_gain[:, None, None] + noise
            images[i] = np.clip(img, 0.0, 1.0)
            labels[i] = k
            i += 1
    return images, labels
