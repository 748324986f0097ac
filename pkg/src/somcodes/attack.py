"""L-infinity projected-gradient attacks and BMU displacement measurement.

Each iteration takes a signed gradient step on the attack loss, projects
the image back into the eps-ball around the original, and clips to pixel
bounds. Displacement experiments craft one adversarial per clean image,
pool both through the network probes, and measure the grid distance
between their BMUs per perturbation budget.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import hlr, refnet, som
from .errors import InvalidArgumentError, NumericError
from .stats import welch_t_test

log = logging.getLogger(__name__)

__all__ = [
    "PgdConfig",
    "DisplacementCurve",
    "pgd_attack",
    "displacement_experiment",
    "welch_t_test",
]


@dataclass(frozen=True)
class PgdConfig:
    """Attack parameters: perturbation budget, schedule, and pixel bounds.

    ``eps`` may be 0, which makes the attack the identity map. When
    ``targeted`` and ``target_class`` is None, the target defaults to
    (true class + 1) mod n_classes at attack time.
    """

    eps: float = 0.04
    n_iter: int = 40
    step: float = 0.002
    rand_init: bool = True
    targeted: bool = True
    target_class: int | None = None
    clip_min: float = 0.0
    clip_max: float = 1.0
    seed: int = 0

    def validate(self) -> None:
        if self.eps < 0:
            raise InvalidArgumentError(f"eps must be >= 0, got {self.eps}")
        if self.step <= 0:
            raise InvalidArgumentError(f"step must be > 0, got {self.step}")
        if self.n_iter < 1:
            raise InvalidArgumentError(f"n_iter must be >= 1, got {self.n_iter}")
        if not self.clip_min < self.clip_max:
            raise InvalidArgumentError(
                f"need clip_min < clip_max, got {self.clip_min} >= {self.clip_max}"
            )


@dataclass
class DisplacementCurve:
    """Per-eps BMU displacement distances with their mean and standard error."""

    layer_tag: str
    eps_values: list[float]
    distances: list[np.ndarray] = field(default_factory=list)

    @property
    def means(self) -> list[float]:
        return [float(np.mean(d)) for d in self.distances]

    @property
    def stderrs(self) -> list[float]:
        out = []
        for d in self.distances:
            n = len(d)
            out.append(float(np.std(d, ddof=1) / math.sqrt(n)) if n > 1 else 0.0)
        return out


def _resolve_attack_class(net, x, cfg: PgdConfig, true_class: int | None) -> int:
    """Class whose cross-entropy the attack optimizes."""
    if cfg.targeted and cfg.target_class is not None:
        label = cfg.target_class
    else:
        if true_class is None:
            # fall back on the net's own prediction as the true class
            logits, _ = refnet.forward(net, x)
            true_class = int(np.argmax(logits))
        label = (true_class + 1) % net.n_classes if cfg.targeted else true_class
    if not (0 <= label < net.n_classes):
        raise InvalidArgumentError(
            f"attack class {label} out of range 0..{net.n_classes - 1}"
        )
    return label


def pgd_attack(
    net: refnet.RefNet,
    x: np.ndarray,
    cfg: PgdConfig,
    true_class: int | None = None,
) -> np.ndarray:
    """Adversarial counterpart of one image under the given budget.

    Targeted mode descends the cross-entropy of the target class;
    untargeted mode ascends the cross-entropy of the true class. The
    result satisfies ||adv - x||_inf <= eps and the pixel bounds exactly.
    """
    cfg.validate()
    x0 = np.asarray(x, dtype=np.float64)
    if x0.ndim != 2:
        raise InvalidArgumentError(f"expected one (h, w) image, got shape {x0.shape}")
    if x0.min() < cfg.clip_min or x0.max() > cfg.clip_max:
        raise InvalidArgumentError(
            f"image pixels outside [{cfg.clip_min}, {cfg.clip_max}]"
        )
    label = _resolve_attack_class(net, x0, cfg, true_class)
    loss = refnet.CrossEntropyLoss(label)
    sign = -1.0 if cfg.targeted else 1.0

    adv = x0.copy()
    if cfg.rand_init and cfg.eps > 0:
        rng = np.random.default_rng(cfg.seed)
        adv = adv + rng.uniform(-cfg.eps, cfg.eps, x0.shape)
        adv = np.clip(adv, cfg.clip_min, cfg.clip_max)
    for _ in range(cfg.n_iter):
        _, grad = refnet.backward_input(net, adv, loss)
        adv = adv + sign * cfg.step * np.sign(grad)
        adv = np.clip(adv, x0 - cfg.eps, x0 + cfg.eps)
        adv = np.clip(adv, cfg.clip_min, cfg.clip_max)
    return adv


def _pooled_hlr(probe: np.ndarray) -> np.ndarray:
    return hlr.normalize(hlr.pool_feature_maps(probe[None]))[0]


def displacement_experiment(
    net: refnet.RefNet,
    soms: dict[str, som.SomGrid],
    images: np.ndarray,
    labels,
    eps_values,
    cfg: PgdConfig,
) -> dict[str, DisplacementCurve]:
    """BMU displacement between clean and adversarial inputs, per layer per eps.

    Every (eps, image) pair gets its own attack seed derived from
    cfg.seed, so the experiment is reproducible as a whole. Distances use
    each SOM's own grid metric.
    """
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 3 or images.shape[0] == 0:
        raise InvalidArgumentError("images must be a non-empty (n, h, w) array")
    labels = None if labels is None else np.asarray(labels)
    eps_values = [float(e) for e in eps_values]
    if not eps_values:
        raise InvalidArgumentError("eps_values must be non-empty")
    for tag, grid in soms.items():
        want = refnet.probe_dim(net, tag)
        if grid.dim != want:
            raise InvalidArgumentError(
                f"SOM for {tag} has dim {grid.dim}, probe pools to {want}"
            )
    n = images.shape[0]
    seeds = np.random.SeedSequence(cfg.seed).generate_state(len(eps_values) * n)
    curves = {
        tag: DisplacementCurve(tag, eps_values, [np.empty(n) for _ in eps_values])
        for tag in soms
    }
    for e_idx, eps in enumerate(eps_values):
        for i in range(n):
            per = replace(
                cfg, eps=eps, seed=int(seeds[e_idx * n + i])
            )
            true_class = None if labels is None else int(labels[i])
            adv = pgd_attack(net, images[i], per, true_class)
            _, probes_clean = refnet.forward(net, images[i])
            _, probes_adv = refnet.forward(net, adv)
            for tag, grid in soms.items():
                bmu_c = som.find_bmu(grid, _pooled_hlr(probes_clean[tag]))
                bmu_a = som.find_bmu(grid, _pooled_hlr(probes_adv[tag]))
                curves[tag].distances[e_idx][i] = som.grid_distance(
                    (bmu_c.row, bmu_c.col), (bmu_a.row, bmu_a.col), grid
                )
    return curves


def displacement_t_tests(curve: DisplacementCurve) -> list[tuple[float, float, float, float]]:
    """Welch t-test over every pair of eps levels: (eps_a, eps_b, t, p).

    Pairs whose distances are all identical (e.g. two all-zero budgets)
    carry no variance and are skipped with a warning.
    """
    out = []
    for i in range(len(curve.eps_values)):
        for j in range(i + 1, len(curve.eps_values)):
            try:
                t, p = welch_t_test(curve.distances[i], curve.distances[j])
            except NumericError:
                log.warning(
                    "skipping t-test for eps pair (%g, %g): zero variance",
                    curve.eps_values[i],
                    curve.eps_values[j],
                )
                continue
            out.append((curve.eps_values[i], curve.eps_values[j], t, p))
    return out
