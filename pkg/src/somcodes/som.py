"""Self-organizing map with periodic boundary conditions.

Single-sample competitive learning: each presented vector pulls its best
matching unit (BMU) and, with exponentially decaying strength, the BMU's
grid neighborhood toward itself. Both the learning rate and the
neighborhood radius shrink as ``exp(-s / tau)`` in the global update
counter ``s``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import FormatError, InvalidArgumentError

TOPOLOGIES = ("toroidal", "planar")

_SOM_MAGIC = b"SOM1"
_SOM_VERSION = 1


@dataclass
class SomGrid:
    """An m-by-n lattice of weight vectors (the trainable code book).

    ``weights`` has shape (m * n, dim), float32, row-major over (row, col).
    """

    m: int
    n: int
    dim: int
    weights: np.ndarray
    topology: str = "toroidal"

    def __post_init__(self):
        if self.m < 1 or self.n < 1 or self.dim < 1:
            raise InvalidArgumentError(
                f"grid dimensions must be >= 1, got m={self.m} n={self.n} dim={self.dim}"
            )
        if self.topology not in TOPOLOGIES:
            raise InvalidArgumentError(f"unknown topology {self.topology!r}")
        self.weights = np.ascontiguousarray(self.weights, dtype=np.float32)
        if self.weights.shape != (self.m * self.n, self.dim):
            raise InvalidArgumentError(
                f"weights shape {self.weights.shape} does not match "
                f"(m*n, dim)=({self.m * self.n}, {self.dim})"
            )

    @property
    def n_units(self) -> int:
        return self.m * self.n

    def unit_coords(self) -> np.ndarray:
        """(m*n, 2) array of (row, col) coordinates in row-major unit order."""
        rows, cols = np.divmod(np.arange(self.n_units), self.n)
        return np.stack([rows, cols], axis=1)

    def weight_at(self, row: int, col: int) -> np.ndarray:
        _check_coord(self, (row, col))
        return self.weights[row * self.n + col]

    def copy(self) -> "SomGrid":
        return SomGrid(self.m, self.n, self.dim, self.weights.copy(), self.topology)


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the sequential SOM update schedule.

    ``tau`` is the decay time-constant in updates; ``None`` means "one full
    schedule", i.e. epochs * n_samples, resolved when training starts.
    ``tau_sigma`` / ``tau_alpha`` override ``tau`` separately for the
    neighborhood radius and the learning rate (both default to ``tau``).
    ``max_updates`` caps the total number of updates regardless of epochs.
    """

    sigma0: float = 5.0
    alpha0: float = 0.01
    decay: str = "exp"
    epochs: int = 5
    epsilon_stab: float = 1e-8
    seed: int = 0
    tau: int | None = None
    tau_sigma: int | None = None
    tau_alpha: int | None = None
    max_updates: int | None = None

    def validate(self) -> None:
        if self.sigma0 <= 0 or self.alpha0 <= 0 or self.epsilon_stab <= 0:
            raise InvalidArgumentError(
                "sigma0, alpha0 and epsilon_stab must all be positive"
            )
        if self.epochs < 1:
            raise InvalidArgumentError(f"epochs must be >= 1, got {self.epochs}")
        if self.decay != "exp":
            raise InvalidArgumentError(f"unsupported decay mode {self.decay!r}")
        for name in ("tau", "tau_sigma", "tau_alpha"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise InvalidArgumentError(f"{name} must be >= 1, got {value}")
        if self.max_updates is not None and self.max_updates < 1:
            raise InvalidArgumentError("max_updates must be >= 1 when set")

    def sigma(self, s: int) -> float:
        tau = self.tau_sigma if self.tau_sigma is not None else self.tau
        if tau is None:
            raise InvalidArgumentError("tau is unset; resolve it before stepping")
        return self.sigma0 * math.exp(-s / tau)

    def alpha(self, s: int) -> float:
        tau = self.tau_alpha if self.tau_alpha is not None else self.tau
        if tau is None:
            raise InvalidArgumentError("tau is unset; resolve it before stepping")
        return self.alpha0 * math.exp(-s / tau)


@dataclass(frozen=True)
class BmuAssignment:
    """Best matching unit of one sample, with its quantization error."""

    sample_index: int
    row: int
    col: int
    quantization_error: float


@dataclass
class LossTrace:
    """Per-update quantization errors recorded during training."""

    errors: np.ndarray
    window: int = 1000

    def __post_init__(self):
        self.errors = np.asarray(self.errors, dtype=np.float64)


def init_grid(
    m: int, n: int, dim: int, seed: int = 0, topology: str = "toroidal"
) -> SomGrid:
    """Create a grid of unit-norm random weights, deterministic per seed.

    Weights start uniform on [0, 1) and are scaled onto the unit sphere so
    they live where unit-norm inputs live.
    """
    if m < 1 or n < 1 or dim < 1:
        raise InvalidArgumentError(
            f"grid dimensions must be >= 1, got m={m} n={n} dim={dim}"
        )
    rng = np.random.default_rng(seed)
    weights = rng.random((m * n, dim))
    weights /= np.linalg.norm(weights, axis=1, keepdims=True)
    return SomGrid(m, n, dim, weights.astype(np.float32), topology)


def _check_coord(grid: SomGrid, coord: tuple[int, int]) -> None:
    row, col = coord
    if not (0 <= row < grid.m and 0 <= col < grid.n):
        raise InvalidArgumentError(
            f"coordinate {coord} out of range for {grid.m}x{grid.n} grid"
        )


def grid_distance(a: tuple[int, int], b: tuple[int, int], grid: SomGrid) -> float:
    """Euclidean distance between two lattice coordinates.

    On a toroidal grid each axis wraps: delta = min(|a-b|, extent-|a-b|).
    """
    _check_coord(grid, a)
    _check_coord(grid, b)
    dr = abs(a[0] - b[0])
    dc = abs(a[1] - b[1])
    if grid.topology == "toroidal":
        dr = min(dr, grid.m - dr)
        dc = min(dc, grid.n - dc)
    return math.hypot(dr, dc)


def _check_vector(grid: SomGrid, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    if x.shape != (grid.dim,):
        raise InvalidArgumentError(
            f"input vector has shape {x.shape}, expected ({grid.dim},)"
        )
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("input vector contains non-finite values")
    return x


def _squared_dists(grid: SomGrid, x: np.ndarray) -> np.ndarray:
    diff = grid.weights - x
    return np.einsum("ij,ij->i", diff, diff)


def find_bmu(grid: SomGrid, x: np.ndarray, sample_index: int = 0) -> BmuAssignment:
    """Unit minimizing Euclidean distance to x; ties go to the smallest
    row-major index."""
    x = _check_vector(grid, x)
    d2 = _squared_dists(grid, x)
    flat = int(np.argmin(d2))
    return BmuAssignment(
        sample_index=sample_index,
        row=flat // grid.n,
        col=flat % grid.n,
        quantization_error=math.sqrt(float(d2[flat])),
    )


def assign_bmus(grid: SomGrid, vectors: np.ndarray) -> list[BmuAssignment]:
    """BMU of every row of ``vectors`` (exhaustive search, per sample)."""
    vectors = getattr(vectors, "vectors", vectors)
    vectors = np.asarray(vectors, dtype=np.float32)
    if vectors.ndim != 2 or vectors.shape[1] != grid.dim:
        raise InvalidArgumentError(
            f"expected (n_samples, {grid.dim}) vectors, got shape {vectors.shape}"
        )
    return [find_bmu(grid, v, sample_index=i) for i, v in enumerate(vectors)]


def _neighborhood(grid: SomGrid, bmu_flat: int, sigma_s: float, eps: float) -> np.ndarray:
    """theta(s, v, u) for every unit v, given the BMU u (flat index)."""
    coords = grid.unit_coords()
    delta = np.abs(coords - coords[bmu_flat])
    if grid.topology == "toroidal":
        extent = np.array([grid.m, grid.n])
        delta = np.minimum(delta, extent - delta)
    d2 = (delta.astype(np.float64) ** 2).sum(axis=1)
    return np.exp(-d2 / (2.0 * sigma_s * sigma_s + eps))


def _apply_update(
    grid: SomGrid, x: np.ndarray, bmu_flat: int, s: int, cfg: TrainConfig
) -> None:
    theta = _neighborhood(grid, bmu_flat, cfg.sigma(s), cfg.epsilon_stab)
    coeff = theta * cfg.alpha(s)
    grid.weights += coeff[:, None] * (x.astype(np.float64) - grid.weights)


def update_step(grid: SomGrid, x: np.ndarray, s: int, cfg: TrainConfig) -> SomGrid:
    """One competitive-learning update, in place.

    Every unit v moves toward x by theta * alpha(s) * (x - W_v) where
    theta = exp(-D^2 / (2 sigma(s)^2 + eps)) and D is the grid distance
    between v and the BMU of x.
    """
    cfg.validate()
    if s < 0:
        raise InvalidArgumentError(f"update index must be >= 0, got {s}")
    x = _check_vector(grid, x)
    bmu = find_bmu(grid, x)
    _apply_update(grid, x, bmu.row * grid.n + bmu.col, s, cfg)
    return grid


def resolve_tau(cfg: TrainConfig, n_samples: int) -> TrainConfig:
    """Fill in tau = epochs * n_samples when the config leaves it open."""
    if cfg.tau is not None:
        return cfg
    return replace(cfg, tau=cfg.epochs * n_samples)


def train(
    grid: SomGrid, data: np.ndarray, cfg: TrainConfig
) -> tuple[SomGrid, LossTrace]:
    """Train in place over shuffled epochs; returns the grid and the loss trace.

    Samples are presented one at a time (batch size 1) with a fresh shuffle
    per epoch drawn from cfg.seed. The quantization error of each sample is
    recorded before its update. A global counter s drives the decay; when
    cfg.max_updates is set, training stops after that many updates.
    """
    cfg.validate()
    vectors = getattr(data, "vectors", data)
    vectors = np.asarray(vectors, dtype=np.float32)
    if vectors.ndim != 2 or vectors.shape[0] == 0:
        raise InvalidArgumentError("training data must be a non-empty 2-D array")
    if vectors.shape[1] != grid.dim:
        raise InvalidArgumentError(
            f"data dim {vectors.shape[1]} does not match grid dim {grid.dim}"
        )
    n_samples = vectors.shape[0]
    cfg = resolve_tau(cfg, n_samples)

    total = cfg.epochs * n_samples
    if cfg.max_updates is not None:
        total = min(total, cfg.max_updates)

    rng = np.random.default_rng(cfg.seed)
    errors = np.empty(total, dtype=np.float64)
    s = 0
    for _ in range(cfg.epochs):
        if s >= total:
            break
        for idx in rng.permutation(n_samples):
            if s >= total:
                break
            x = vectors[idx]
            bmu = find_bmu(grid, x)
            errors[s] = bmu.quantization_error
            _apply_update(grid, x, bmu.row * grid.n + bmu.col, s, cfg)
            s += 1
    return grid, LossTrace(errors)


def moving_average(trace: LossTrace) -> np.ndarray:
    """Sliding-window mean of the trace, normalized to its first value.

    The first output element is exactly 1. A window longer than the trace
    yields an empty array.
    """
    if trace.window < 1:
        raise InvalidArgumentError(f"window must be >= 1, got {trace.window}")
    values = trace.errors
    w = trace.window
    if w > len(values):
        return np.empty(0, dtype=np.float64)
    means = np.convolve(values, np.full(w, 1.0 / w), mode="valid")
    return means / means[0]


_TOPOLOGY_CODES = {"toroidal": 0, "planar": 1}
_TOPOLOGY_NAMES = {v: k for k, v in _TOPOLOGY_CODES.items()}


def save_som(grid: SomGrid, path) -> None:
    """Write the checkpoint: magic, version, m, n, dim, topology, f32 weights."""
    header = _SOM_MAGIC + struct.pack(
        "<IIIIB",
        _SOM_VERSION,
        grid.m,
        grid.n,
        grid.dim,
        _TOPOLOGY_CODES[grid.topology],
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(grid.weights.astype("<f4").tobytes())


def load_som(path) -> SomGrid:
    """Read a checkpoint written by save_som; bitwise inverse of it."""
    with open(path, "rb") as fh:
        blob = fh.read()
    header_size = 4 + struct.calcsize("<IIIIB")
    if len(blob) < header_size:
        raise FormatError("truncated header: file shorter than the fixed fields")
    if blob[:4] != _SOM_MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r}, expected {_SOM_MAGIC!r}")
    version, m, n, dim, topo_code = struct.unpack("<IIIIB", blob[4:header_size])
    if version != _SOM_VERSION:
        raise FormatError(f"unsupported version {version}, expected {_SOM_VERSION}")
    if topo_code not in _TOPOLOGY_NAMES:
        raise FormatError(f"unknown topology code {topo_code}")
    if m < 1 or n < 1 or dim < 1:
        raise FormatError(f"invalid dimensions m={m} n={n} dim={dim}")
    n_values = m * n * dim
    if n_values > 2**31:
        raise FormatError(f"declared weight count {n_values} overflows sane bounds")
    body = blob[header_size:]
    expected = n_values * 4
    if len(body) < expected:
        raise FormatError(
            f"truncated weights: expected {expected} bytes, found {len(body)}"
        )
    if len(body) > expected:
        raise FormatError(f"trailing data after weights ({len(body) - expected} bytes)")
    weights = np.frombuffer(body, dtype="<f4").reshape(m * n, dim)
    return SomGrid(m, n, dim, weights.copy(), _TOPOLOGY_NAMES[topo_code])
