"""Procedural labeled image dataset.

Eight grayscale pattern families on a small square canvas, each drawn with
randomized phase or position plus additive Gaussian noise, so a classifier
has something non-trivial to learn while generation stays deterministic
per seed and needs no downloads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

CLASS_NAMES = (
    "h-bars",
    "v-bars",
    "diag-stripes",
    "checker",
    "blob",
    "ring",
    "cross",
    "square",
)


@dataclass
class ShapeDataset:
    """Images (n, size, size) float64 in [0,1] with uint32 class labels."""

    images: np.ndarray
    labels: np.ndarray
    n_classes: int
    noise: float
    seed: int

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.uint32)
        if self.images.ndim != 3 or self.images.shape[0] != self.labels.shape[0]:
            raise InvalidArgumentError(
                f"images {self.images.shape} and labels {self.labels.shape} disagree"
            )

    @property
    def n_samples(self) -> int:
        return self.images.shape[0]

    @property
    def size(self) -> int:
        return self.images.shape[1]


def _coords(size: int) -> tuple[np.ndarray, np.ndarray]:
    r = np.arange(size, dtype=np.float64)
    return r[:, None], r[None, :]


def _h_bars(rng, size):
    r, _ = _coords(size)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    return 0.5 + 0.5 * np.sin(2.0 * math.pi * r / 4.0 + phase) * np.ones((size, size))


def _v_bars(rng, size):
    _, c = _coords(size)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    return 0.5 + 0.5 * np.sin(2.0 * math.pi * c / 4.0 + phase) * np.ones((size, size))


def _diag_stripes(rng, size):
    r, c = _coords(size)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    return 0.5 + 0.5 * np.sin(2.0 * math.pi * (r + c) / 8.0 + phase)


def _checker(rng, size):
    r, c = _coords(size)
    dr = rng.integers(0, 4)
    dc = rng.integers(0, 4)
    return ((((r + dr) // 2) + ((c + dc) // 2)) % 2).astype(np.float64)


def _blob(rng, size):
    r, c = _coords(size)
    cr = rng.uniform(size * 0.25, size * 0.75)
    cc = rng.uniform(size * 0.25, size * 0.75)
    sigma = rng.uniform(size * 0.09, size * 0.16)
    return np.exp(-((r - cr) ** 2 + (c - cc) ** 2) / (2.0 * sigma * sigma))


def _ring(rng, size):
    r, c = _coords(size)
    cr = rng.uniform(size * 0.3, size * 0.7)
    cc = rng.uniform(size * 0.3, size * 0.7)
    radius = rng.uniform(size * 0.22, size * 0.32)
    d = np.sqrt((r - cr) ** 2 + (c - cc) ** 2)
    return np.exp(-((d - radius) ** 2) / (2.0 * (size * 0.04) ** 2))


def _cross(rng, size):
    img = np.zeros((size, size))
    cr = int(rng.integers(size // 4, size - size // 4))
    cc = int(rng.integers(size // 4, size - size // 4))
    img[max(cr - 1, 0) : cr + 1, :] = 1.0
    img[:, max(cc - 1, 0) : cc + 1] = 1.0
    return img


def _square(rng, size):
    img = np.zeros((size, size))
    side = max(size * 3 // 8, 2)
    top = int(rng.integers(1, size - side - 1))
    left = int(rng.integers(1, size - side - 1))
    img[top : top + side, left : left + side] = 1.0
    return img


_GENERATORS = (
    _h_bars,
    _v_bars,
    _diag_stripes,
    _checker,
    _blob,
    _ring,
    _cross,
    _square,
)


def make_dataset(
    n_samples: int,
    n_classes: int = 8,
    size: int = 16,
    noise: float = 0.05,
    seed: int = 0,
) -> ShapeDataset:
    """Generate a class-balanced dataset, deterministic for a fixed seed.

    Labels cycle through the classes and are shuffled. Every image gets its
    own randomized pattern parameters, a random contrast/brightness ramp
    (so raw intensity statistics do not give the class away), and additive
    Gaussian noise, then is clipped to [0,1].
    """
    if n_samples < 1:
        raise InvalidArgumentError(f"n_samples must be >= 1, got {n_samples}")
    if not (1 <= n_classes <= len(_GENERATORS)):
        raise InvalidArgumentError(
            f"n_classes must be in 1..{len(_GENERATORS)}, got {n_classes}"
        )
    if size < 8:
        raise InvalidArgumentError(f"size must be >= 8, got {size}")
    if noise < 0:
        raise InvalidArgumentError(f"noise must be >= 0, got {noise}")
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n_samples) % n_classes).astype(np.uint32)
    images = np.empty((n_samples, size, size), dtype=np.float64)
    for i, label in enumerate(labels):
        base = _GENERATORS[label](rng, size)
        contrast = rng.uniform(0.5, 1.0)
        brightness = rng.uniform(0.0, 1.0 - contrast)
        base = contrast * base + brightness
        if noise > 0:
            base = base + rng.normal(0.0, noise, (size, size))
        images[i] = np.clip(base, 0.0, 1.0)
    return ShapeDataset(images, labels, n_classes, noise, seed)
