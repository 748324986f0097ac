"""Gaussian kernel density of BMU locations on the map grid.

BMU coordinates are treated as 2-D points and smoothed with a product
Gaussian kernel evaluated at every cell center, then normalized to unit
mass over the grid (cell area 1). Evaluation is flat by default, matching
the usual KDE-library rendering of such maps; the periodic wrap can be
switched on, and neighbor checks in attractor finding always wrap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericError


@dataclass
class DensityMap:
    """Normalized density per grid cell: values sum to 1 over the m*n cells."""

    values: np.ndarray
    bandwidth: tuple[float, float]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise InvalidArgumentError(
                f"density values must be 2-D, got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise NumericError("density values must be finite and non-negative")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class Attractor:
    """A cell whose density is >= all 8 wrapped neighbors; rank 1 is densest."""

    row: int
    col: int
    density: float
    rank: int


def _as_points(assignments) -> np.ndarray:
    points = np.array([(a.row, a.col) for a in assignments], dtype=np.float64)
    if points.ndim != 2:
        raise InvalidArgumentError("assignments must be a non-empty sequence")
    return points


def scott_bandwidth(points: np.ndarray) -> tuple[float, float]:
    """Per-axis bandwidth n^(-1/6) * sample standard deviation."""
    n = points.shape[0]
    factor = n ** (-1.0 / 6.0)
    stds = points.std(axis=0, ddof=1)
    return float(factor * stds[0]), float(factor * stds[1])


def kde_density(
    assignments,
    shape: tuple[int, int],
    bandwidth: float | tuple[float, float] | None = None,
    wrap: bool = False,
) -> DensityMap:
    """Gaussian KDE of BMU coordinates, evaluated at every cell center.

    ``bandwidth`` defaults to Scott's rule per axis; pass a scalar or an
    (row, col) pair to fix it. ``wrap`` folds each displacement onto the
    torus before applying the kernel.
    """
    m, n = shape
    if m < 1 or n < 1:
        raise InvalidArgumentError(f"grid shape must be positive, got {shape}")
    points = _as_points(assignments)
    if points.shape[0] < 2:
        raise InvalidArgumentError(
            f"need at least 2 assignments for density estimation, got "
            f"{points.shape[0]}"
        )
    if bandwidth is None:
        bw = scott_bandwidth(points)
        if bw[0] == 0.0 or bw[1] == 0.0:
            raise NumericError(
                "all assignments share one coordinate along an axis; Scott's "
                "rule degenerates - pass a fixed bandwidth instead"
            )
    elif np.isscalar(bandwidth):
        bw = (float(bandwidth), float(bandwidth))
    else:
        bw = (float(bandwidth[0]), float(bandwidth[1]))
    if bw[0] <= 0 or bw[1] <= 0:
        raise InvalidArgumentError(f"bandwidth must be positive, got {bw}")

    rows = np.arange(m, dtype=np.float64)
    cols = np.arange(n, dtype=np.float64)
    dr = rows[:, None] - points[:, 0]
    dc = cols[:, None] - points[:, 1]
    if wrap:
        dr = np.abs(dr)
        dc = np.abs(dc)
        dr = np.minimum(dr, m - dr)
        dc = np.minimum(dc, n - dc)
    # separable kernel: values[r, c] = sum_i kr[r, i] * kc[c, i]
    kr = np.exp(-0.5 * (dr / bw[0]) ** 2)
    kc = np.exp(-0.5 * (dc / bw[1]) ** 2)
    values = kr @ kc.T
    total = values.sum()
    if total <= 0 or not np.isfinite(total):
        raise NumericError("density mass vanished; bandwidth too small for the grid")
    return DensityMap(values / total, bw)


def class_density(
    assignments,
    labels: np.ndarray,
    class_id: int,
    shape: tuple[int, int],
    bandwidth: float | tuple[float, float] | None = None,
    wrap: bool = False,
) -> DensityMap:
    """kde_density restricted to the assignments of one class."""
    labels = np.asarray(labels)
    if len(labels) != len(assignments):
        raise InvalidArgumentError(
            f"{len(assignments)} assignments but {len(labels)} labels"
        )
    mask = labels == class_id
    if not np.any(mask):
        available = ", ".join(str(v) for v in np.unique(labels))
        raise InvalidArgumentError(
            f"class {class_id} absent from labels; available classes: {available}"
        )
    subset = [a for a, keep in zip(assignments, mask) if keep]
    return kde_density(subset, shape, bandwidth, wrap)


def find_attractors(
    dmap: DensityMap, top_k: int, min_percentile: float = 0.0
) -> list[Attractor]:
    """Cells >= all 8 wrapped neighbors and above the density percentile.

    Ranked by density, ties broken by row-major index; at most top_k
    returned. On plateaus every plateau cell qualifies, so the tie-break
    decides the order.
    """
    if top_k < 1:
        raise InvalidArgumentError(f"top_k must be >= 1, got {top_k}")
    if not (0.0 <= min_percentile <= 100.0):
        raise InvalidArgumentError(
            f"min_percentile must be in [0, 100], got {min_percentile}"
        )
    v = dmap.values
    is_peak = np.ones(v.shape, dtype=bool)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            is_peak &= v >= np.roll(v, (dr, dc), axis=(0, 1))
    threshold = np.percentile(v, min_percentile)
    is_peak &= v >= threshold
    peaks = np.argwhere(is_peak)
    order = np.lexsort(
        (peaks[:, 0] * v.shape[1] + peaks[:, 1], -v[peaks[:, 0], peaks[:, 1]])
    )
    out = []
    for rank, idx in enumerate(order[:top_k], start=1):
        r, c = int(peaks[idx, 0]), int(peaks[idx, 1])
        out.append(Attractor(r, c, float(v[r, c]), rank))
    return out


def dead_unit_fraction(assignments, shape: tuple[int, int]) -> float:
    """Fraction of grid cells never selected as a BMU."""
    m, n = shape
    if m < 1 or n < 1:
        raise InvalidArgumentError(f"grid shape must be positive, got {shape}")
    hit = np.zeros((m, n), dtype=bool)
    for a in assignments:
        hit[a.row, a.col] = True
    return 1.0 - hit.sum() / (m * n)
