"""Delimited and image artifacts emitted by the pipeline commands.

CSV cells format floats with repr(), the shortest round-trip form, so a
re-run with identical inputs produces byte-identical files. PGM heatmaps
are 8-bit min-max scaled. Every command also writes a JSON manifest
naming its inputs, seeds, and output hashes, which is enough to re-run it.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os

import numpy as np

from .density import Attractor, DensityMap


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path, rows, header=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header is not None:
            writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_density_csv(path, dmap: DensityMap) -> None:
    """Headerless m x n grid of density values."""
    write_csv(path, dmap.values.tolist())


def write_pgm(path, values: np.ndarray) -> None:
    """8-bit binary PGM, min-max scaled; a constant map renders black."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    if hi > lo:
        scaled = np.round((values - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(values)
    data = scaled.astype(np.uint8)
    m, n = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{n} {m}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def write_loss_csv(path, normalized_ma: np.ndarray, window: int) -> None:
    """Normalized moving-average loss; the first row's value is exactly 1."""
    rows = [(window - 1 + i, v) for i, v in enumerate(normalized_ma)]
    write_csv(path, rows, header=("update", "normalized_ma"))


def write_vscore_csv(path, reports) -> None:
    """Per-seed score rows plus one mean/std summary row per layer."""
    rows = []
    for rep in reports:
        for seed, score in zip(rep.seeds, rep.scores):
            rows.append((rep.layer_tag, seed, score, ""))
        rows.append((rep.layer_tag, "mean", rep.mean, rep.std))
    write_csv(path, rows, header=("layer_tag", "seed", "score", "std"))


def write_displacement_csv(path, curves: dict) -> None:
    rows = []
    for tag in sorted(curves):
        curve = curves[tag]
        for eps, mean, stderr, d in zip(
            curve.eps_values, curve.means, curve.stderrs, curve.distances
        ):
            rows.append((tag, eps, mean, stderr, len(d)))
    write_csv(path, rows, header=("layer_tag", "eps", "mean", "stderr", "n"))


def write_displacement_raw_csv(path, curves: dict) -> None:
    rows = []
    for tag in sorted(curves):
        curve = curves[tag]
        for eps, dists in zip(curve.eps_values, curve.distances):
            for i, d in enumerate(dists):
                rows.append((tag, eps, i, float(d)))
    write_csv(path, rows, header=("layer_tag", "eps", "pair", "distance"))


def write_ttest_csv(path, rows_by_tag: dict) -> None:
    rows = []
    for tag in sorted(rows_by_tag):
        for eps_a, eps_b, t, p in rows_by_tag[tag]:
            rows.append((tag, eps_a, eps_b, t, p))
    write_csv(path, rows, header=("layer_tag", "eps_a", "eps_b", "t", "p"))


def write_attractors_csv(path, attractors: list[Attractor]) -> None:
    rows = [(a.rank, a.row, a.col, a.density) for a in attractors]
    write_csv(path, rows, header=("rank", "row", "col", "density"))


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path, command, config_dict, inputs, seeds, outputs) -> None:
    """Record what a command consumed and produced.

    ``inputs`` and ``outputs`` are path lists; each is stored with its
    sha256 so a re-run can be checked for drift. No timestamps, so the
    manifest itself is reproducible.
    """
    doc = {
        "command": command,
        "config": config_dict,
        "inputs": {os.path.basename(str(p)): sha256_file(p) for p in inputs},
        "seeds": seeds,
        "outputs": {os.path.basename(str(p)): sha256_file(p) for p in outputs},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
