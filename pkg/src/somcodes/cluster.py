"""k-means over BMU coordinates and V-measure agreement with labels.

The clustering runs on (row, col) points in flat coordinates. V-measure is
the harmonic mean of homogeneity and completeness, computed from
natural-log entropies; it is invariant to permutations of either label
alphabet.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError


@dataclass
class ClusterResult:
    """Lloyd fixed point: per-sample cluster ids, centroids, inertia."""

    k: int
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    seed: int


@dataclass
class VScoreReport:
    """Per-seed V-measure scores with their mean and (population) std."""

    layer_tag: str
    seeds: list[int]
    scores: list[float]

    @property
    def mean(self) -> float:
        return float(np.mean(self.scores))

    @property
    def std(self) -> float:
        return float(np.std(self.scores))


def _sq_dists_to(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _plusplus_init(points: np.ndarray, k: int, rng) -> np.ndarray:
    """k-means++ seeding: spread initial centroids by squared-distance sampling."""
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total == 0.0:
            # every remaining point coincides with a chosen centroid
            centroids[i] = points[rng.integers(n)]
            continue
        idx = rng.choice(n, p=d2 / total)
        centroids[i] = points[idx]
        d2 = np.minimum(d2, ((points - centroids[i]) ** 2).sum(axis=1))
    return centroids


def kmeans(
    points: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-9,
) -> ClusterResult:
    """Lloyd's algorithm with k-means++ seeding, deterministic per seed.

    Empty clusters are re-seeded to the points currently farthest from
    their centroids. Stops when every centroid moves less than tol or
    after max_iter iterations.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise InvalidArgumentError("points must be a non-empty 2-D array")
    if k < 1:
        raise InvalidArgumentError(f"k must be >= 1, got {k}")
    n_distinct = np.unique(points, axis=0).shape[0]
    if k > n_distinct:
        raise InvalidArgumentError(
            f"k={k} exceeds the {n_distinct} distinct points available"
        )
    rng = np.random.default_rng(seed)
    centroids = _plusplus_init(points, k, rng)
    assign = np.zeros(points.shape[0], dtype=np.int64)
    for _ in range(max_iter):
        d2 = _sq_dists_to(points, centroids)
        assign = d2.argmin(axis=1)
        sample_d2 = d2[np.arange(points.shape[0]), assign]
        empties = [c for c in range(k) if not np.any(assign == c)]
        if empties:
            # hand each empty cluster its own farthest outlier
            order = np.argsort(-sample_d2)
            for c, idx in zip(empties, order):
                centroids[c] = points[idx]
            continue
        new_centroids = np.stack(
            [points[assign == c].mean(axis=0) for c in range(k)]
        )
        shift = np.abs(new_centroids - centroids).max()
        centroids = new_centroids
        if shift < tol:
            break
    d2 = _sq_dists_to(points, centroids)
    assign = d2.argmin(axis=1)
    inertia = float(d2[np.arange(points.shape[0]), assign].sum())
    return ClusterResult(k, assign, centroids, inertia, seed)


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def v_measure(truth, predicted) -> float:
    """V = 2hc/(h+c) from natural-log conditional entropies.

    h = 1 - H(truth|pred)/H(truth) (1 if H(truth) = 0), c symmetrically;
    V = 0 when both h and c are 0.
    """
    truth = np.asarray(truth)
    predicted = np.asarray(predicted)
    if truth.shape != predicted.shape or truth.ndim != 1 or truth.size == 0:
        raise InvalidArgumentError(
            f"need equal-length non-empty label sequences, got {truth.shape} "
            f"and {predicted.shape}"
        )
    _, ti = np.unique(truth, return_inverse=True)
    _, pi = np.unique(predicted, return_inverse=True)
    n = truth.size
    contingency = np.zeros((ti.max() + 1, pi.max() + 1))
    np.add.at(contingency, (ti, pi), 1.0)

    h_t = _entropy(contingency.sum(axis=1))
    h_p = _entropy(contingency.sum(axis=0))
    # H(truth|pred) = sum_p P(p) H(truth | pred=p)
    h_t_given_p = sum(
        contingency[:, j].sum() / n * _entropy(contingency[:, j])
        for j in range(contingency.shape[1])
        if contingency[:, j].sum() > 0
    )
    h_p_given_t = sum(
        contingency[i, :].sum() / n * _entropy(contingency[i, :])
        for i in range(contingency.shape[0])
        if contingency[i, :].sum() > 0
    )
    h = 1.0 if h_t == 0.0 else 1.0 - h_t_given_p / h_t
    c = 1.0 if h_p == 0.0 else 1.0 - h_p_given_t / h_p
    if h + c == 0.0:
        return 0.0
    return 2.0 * h * c / (h + c)


def clustering_score_experiment(
    assignments,
    labels,
    k: int,
    n_seeds: int = 5,
    base_seed: int = 0,
    layer_tag: str = "",
) -> VScoreReport:
    """Cluster BMU coordinates n_seeds times and score each run against labels.

    Seeds are base_seed..base_seed+n_seeds-1, so repeats are reproducible.
    """
    if n_seeds < 1:
        raise InvalidArgumentError(f"n_seeds must be >= 1, got {n_seeds}")
    labels = np.asarray(labels)
    if len(labels) != len(assignments):
        raise InvalidArgumentError(
            f"{len(assignments)} assignments but {len(labels)} labels"
        )
    points = np.array([(a.row, a.col) for a in assignments], dtype=np.float64)
    seeds = [base_seed + i for i in range(n_seeds)]
    scores = [
        v_measure(labels, kmeans(points, k, seed=s).assignments) for s in seeds
    ]
    return VScoreReport(layer_tag, seeds, scores)
