"""Feature inversion: optimize an image so a probe's pooled vector matches
a target code.

Adaptive-moment gradient descent on raw pixels minimizes the cosine
distance between the pooled probe activation and the target, optionally
plus a total-variation smoothness term; pixels are clipped to [0,1] after
every step. The reported result is the iterate with the lowest cosine
distance seen, which always includes the starting point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import refnet
from .density import DensityMap, find_attractors
from .errors import InvalidArgumentError
from .som import SomGrid


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - cosine similarity, in [0, 2]; rejects zero vectors."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise InvalidArgumentError(
            f"vectors have different lengths {a.shape[0]} and {b.shape[0]}"
        )
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise InvalidArgumentError("cosine distance is undefined for zero vectors")
    return float(1.0 - (a @ b) / (na * nb))


@dataclass(frozen=True)
class InversionConfig:
    """Optimizer settings for one inversion run.

    ``init`` is "random-uniform", "gray", or an explicit start image.
    """

    lr: float = 0.05
    n_iter: int = 512
    seed: int = 0
    smoothness_lambda: float = 0.0
    init: object = "random-uniform"

    def validate(self) -> None:
        if self.lr <= 0:
            raise InvalidArgumentError(f"lr must be > 0, got {self.lr}")
        if self.n_iter < 1:
            raise InvalidArgumentError(f"n_iter must be >= 1, got {self.n_iter}")
        if self.smoothness_lambda < 0:
            raise InvalidArgumentError(
                f"smoothness_lambda must be >= 0, got {self.smoothness_lambda}"
            )
        if isinstance(self.init, str) and self.init not in ("random-uniform", "gray"):
            raise InvalidArgumentError(
                f"init must be 'random-uniform', 'gray', or an image, got "
                f"{self.init!r}"
            )


@dataclass
class InversionResult:
    """Best iterate, its cosine distance, and the full per-iterate trace."""

    image: np.ndarray
    final_loss: float
    loss_trace: np.ndarray


def _tv_grad(x: np.ndarray, eps: float = 1e-8) -> tuple[float, np.ndarray]:
    """Smoothed isotropic total variation and its gradient."""
    dr = np.diff(x, axis=0, append=x[-1:, :])
    dc = np.diff(x, axis=1, append=x[:, -1:])
    mag = np.sqrt(dr * dr + dc * dc + eps)
    value = float(mag.sum())
    gr = dr / mag
    gc = dc / mag
    grad = np.zeros_like(x)
    grad -= gr
    grad[1:, :] += gr[:-1, :]
    grad -= gc
    grad[:, 1:] += gc[:, :-1]
    return value, grad


def _start_image(cfg: InversionConfig, size: int) -> np.ndarray:
    if isinstance(cfg.init, str):
        if cfg.init == "gray":
            return np.full((size, size), 0.5)
        rng = np.random.default_rng(cfg.seed)
        return rng.random((size, size))
    x = np.asarray(cfg.init, dtype=np.float64)
    if x.shape != (size, size):
        raise InvalidArgumentError(
            f"init image has shape {x.shape}, expected ({size}, {size})"
        )
    if x.min() < 0.0 or x.max() > 1.0:
        raise InvalidArgumentError("init image pixels must lie in [0, 1]")
    return x.copy()


def invert_code(
    net: refnet.RefNet,
    layer_tag: str,
    target: np.ndarray,
    cfg: InversionConfig,
) -> InversionResult:
    """Recover an image whose pooled probe vector points toward ``target``."""
    cfg.validate()
    target = np.asarray(target, dtype=np.float64)
    want = refnet.probe_dim(net, layer_tag)
    if target.shape != (want,):
        raise InvalidArgumentError(
            f"target has shape {target.shape}, layer {layer_tag} pools to ({want},)"
        )
    if np.linalg.norm(target) == 0.0:
        raise InvalidArgumentError("target code must be nonzero")
    loss_spec = refnet.CodeLoss(layer_tag, target)

    x = _start_image(cfg, net.input_size)
    trace = np.empty(cfg.n_iter + 1)
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    b1, b2, adam_eps = 0.9, 0.999, 1e-8

    cos, grad = refnet.backward_input(net, x, loss_spec)
    trace[0] = cos
    best = (cos, x.copy())
    for t in range(1, cfg.n_iter + 1):
        if cfg.smoothness_lambda > 0:
            _, tv_g = _tv_grad(x)
            grad = grad + cfg.smoothness_lambda * tv_g
        m = b1 * m + (1 - b1) * grad
        v = b2 * v + (1 - b2) * grad * grad
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        x = np.clip(x - cfg.lr * m_hat / (np.sqrt(v_hat) + adam_eps), 0.0, 1.0)
        cos, grad = refnet.backward_input(net, x, loss_spec)
        trace[t] = cos
        if cos < best[0]:
            best = (cos, x.copy())
    return InversionResult(best[1], float(best[0]), trace)


def invert_attractors(
    net: refnet.RefNet,
    grid: SomGrid,
    density: DensityMap,
    layer_tag: str,
    top_k: int,
    cfg: InversionConfig,
    min_percentile: float = 0.0,
) -> list[InversionResult]:
    """Invert the SOM codes at the top density attractors, in rank order.

    Each attractor's run gets seed cfg.seed + rank - 1 so results stay
    distinct but reproducible.
    """
    if density.shape != (grid.m, grid.n):
        raise InvalidArgumentError(
            f"density shape {density.shape} does not match grid "
            f"({grid.m}, {grid.n})"
        )
    attractors = find_attractors(density, top_k, min_percentile)
    results = []
    for a in attractors:
        target = grid.weight_at(a.row, a.col)
        per = InversionConfig(
            lr=cfg.lr,
            n_iter=cfg.n_iter,
            seed=cfg.seed + a.rank - 1,
            smoothness_lambda=cfg.smoothness_lambda,
            init=cfg.init,
        )
        results.append(invert_code(net, layer_tag, target, per))
    return results
