"""Matplotlib renderings saved next to each command's CSV output.

Everything draws through the Agg backend so the CLI works headless. The
CSV files are the byte-stable record; these PNGs exist for eyeballing.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_loss_figure(path, normalized_ma: np.ndarray, window: int) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    x = np.arange(window - 1, window - 1 + len(normalized_ma))
    ax.plot(x, normalized_ma)
    ax.set_xlabel("update")
    ax.set_ylabel(f"quantization error ({window}-update MA, normalized)")
    ax.set_title("Map training loss")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def save_density_figure(path, values: np.ndarray, title: str) -> None:
    fig, ax = plt.subplots(figsize=(5, 4.5))
    im = ax.imshow(values, cmap="viridis", origin="upper")
    fig.colorbar(im, ax=ax, label="density")
    ax.set_xlabel("col")
    ax.set_ylabel("row")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def save_vscore_figure(path, reports) -> None:
    fig, ax = plt.subplots(figsize=(5, 4))
    tags = [r.layer_tag for r in reports]
    means = [r.mean for r in reports]
    stds = [r.std for r in reports]
    ax.bar(tags, means, yerr=stds, capsize=4, color="tab:blue")
    ax.set_ylabel("V-measure")
    ax.set_ylim(0, 1)
    ax.set_title("BMU clustering vs class labels")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def save_displacement_figure(path, curves: dict) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for tag in sorted(curves):
        curve = curves[tag]
        ax.errorbar(
            curve.eps_values, curve.means, yerr=curve.stderrs, marker="o", label=tag
        )
    ax.set_xlabel("eps")
    ax.set_ylabel("BMU displacement (grid units)")
    ax.set_title("Displacement vs perturbation budget")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def save_inversion_figure(path, images: list, title: str) -> None:
    n = len(images)
    fig, axes = plt.subplots(1, n, figsize=(2.2 * n, 2.6))
    if n == 1:
        axes = [axes]
    for i, (ax, img) in enumerate(zip(axes, images)):
        ax.imshow(img, cmap="gray", vmin=0.0, vmax=1.0)
        ax.set_title(f"rank {i + 1}", fontsize=9)
        ax.axis("off")
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
