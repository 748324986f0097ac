"""Targeted L-infinity PGD counterparts, written as paired HLR1 files.

For each clean image the attack crafts an adversarial twin, both are run
through the probes, and per probe two files are written whose sample
order is aligned index for index. Samples whose attack diverges to
non-finite values are dropped from both sides, preserving alignment.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from . import hlrfile, images, models
from .errors import InvalidArgumentError
from .extract import ExtractionSpec, decode_images, write_manifest

log = logging.getLogger(__name__)


@dataclass
class PgdParams:
    """Attack settings; defaults are 40 iterations of step 0.002 inside
    an eps ball, random init, targeted, pixels clipped to [0, 1]."""

    eps: float
    n_iter: int = 40
    step: float = 0.002
    rand_init: bool = True
    targeted: bool = True
    clip_min: float = 0.0
    clip_max: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.eps) or self.eps < 0:
            raise InvalidArgumentError(f"eps must be >= 0, got {self.eps}")
        if self.n_iter < 1:
            raise InvalidArgumentError(f"n_iter must be >= 1, got {self.n_iter}")
        if self.step <= 0:
            raise InvalidArgumentError(f"step must be > 0, got {self.step}")
        if self.clip_min >= self.clip_max:
            raise InvalidArgumentError(
                f"clip range [{self.clip_min}, {self.clip_max}] is empty"
            )


def pgd_batch(
    model: torch.nn.Module,
    x0: torch.Tensor,
    target: torch.Tensor,
    params: PgdParams,
) -> torch.Tensor:
    """PGD on a [0, 1] pixel batch; returns detached adversarial images.

    Targeted mode descends the cross-entropy toward ``target``; the
    untargeted variant ascends away from it. eps=0 short-circuits to the
    clean batch.
    """
    if params.eps == 0.0:
        return x0.clone()
    gen = torch.Generator(device="cpu").manual_seed(params.seed)
    if params.rand_init:
        delta = (torch.rand(x0.shape, generator=gen) * 2 - 1) * params.eps
    else:
        delta = torch.zeros_like(x0)
    adv = (x0 + delta.to(x0.device)).clamp(params.clip_min, params.clip_max)
    sign = -1.0 if params.targeted else 1.0
    for _ in range(params.n_iter):
        adv = adv.detach().requires_grad_(True)
        loss = F.cross_entropy(model(adv), target, reduction="sum")
        (grad,) = torch.autograd.grad(loss, adv)
        with torch.no_grad():
            adv = adv + sign * params.step * grad.sign()
            adv = x0 + (adv - x0).clamp(-params.eps, params.eps)
            adv = adv.clamp(params.clip_min, params.clip_max)
    return adv.detach()


def _attack_targets(stack, x01: torch.Tensor, labels) -> torch.Tensor:
    """Next class cyclically after the true one; prediction stands in
    when no labels were given."""
    if labels is not None:
        base = torch.as_tensor(np.asarray(labels, dtype=np.int64))
        if int(base.max()) >= stack.n_classes:
            raise InvalidArgumentError(
                f"label {int(base.max())} out of range for "
                f"{stack.n_classes} classes"
            )
    else:
        with torch.no_grad():
            base = stack.model(x01).argmax(dim=1).cpu()
    return (base + 1) % stack.n_classes


def craft_adversarials(spec: ExtractionSpec, params: PgdParams) -> dict:
    """Write aligned clean/adversarial HLR1 pairs, one pair per probe.

    Returns a dict with per-tag (clean_path, adv_path) pairs, the
    manifest path, and the surviving sample count.
    """
    paths = images.list_images(spec.image_dir)
    labels = (
        images.read_labels(spec.label_file, paths)
        if spec.label_file is not None
        else None
    )
    stack = models.build_model(spec.model, spec.pretrained, spec.device)
    batch_all, kept, skipped = decode_images(paths)
    if labels is not None:
        labels = labels[kept]

    probes = {tag: stack.probes[tag] for tag in spec.layers}
    clean_parts = {tag: [] for tag in spec.layers}
    adv_parts = {tag: [] for tag in spec.layers}
    finite_parts = []
    with models.ProbeCapture(probes) as capture:
        for start in range(0, batch_all.shape[0], spec.batch_size):
            x01 = batch_all[start : start + spec.batch_size].to(spec.device)
            lab = labels[start : start + spec.batch_size] if labels is not None else None
            target = _attack_targets(stack, x01, lab).to(spec.device)
            adv = pgd_batch(stack.model, x01, target, params)
            finite = torch.isfinite(adv).flatten(1).all(dim=1)
            with torch.no_grad():
                stack.model(x01)
                for tag in spec.layers:
                    clean_parts[tag].append(hlrfile.pool_and_normalize(capture.out[tag]))
                stack.model(adv.nan_to_num())
                for tag in spec.layers:
                    adv_parts[tag].append(hlrfile.pool_and_normalize(capture.out[tag]))
            finite_parts.append(finite.cpu().numpy())

    finite_mask = np.concatenate(finite_parts)
    n_dropped = int((~finite_mask).sum())
    if n_dropped:
        log.warning(
            "dropping %d samples whose attack diverged to non-finite values",
            n_dropped,
        )
    if labels is not None:
        labels = labels[finite_mask]

    os.makedirs(spec.out_dir, exist_ok=True)
    eps_text = f"{params.eps:g}"
    pairs = {}
    outputs = []
    for tag in spec.layers:
        clean = np.vstack(clean_parts[tag])[finite_mask]
        adv = np.vstack(adv_parts[tag])[finite_mask]
        stem = f"hlr_{spec.model}_{tag}"
        clean_path = os.path.join(spec.out_dir, f"{stem}_clean_eps{eps_text}.hlr")
        adv_path = os.path.join(spec.out_dir, f"{stem}_adv_eps{eps_text}.hlr")
        hlrfile.write_hlr(clean_path, clean, labels, tag)
        hlrfile.write_hlr(adv_path, adv, labels, tag)
        pairs[tag] = (clean_path, adv_path)
        outputs.extend((clean_path, adv_path))

    manifest = os.path.join(
        spec.out_dir, f"manifest_attack_{spec.model}_eps{eps_text}.json"
    )
    write_manifest(
        manifest,
        "attack",
        spec,
        {
            "pgd": {
                "eps": params.eps,
                "n_iter": params.n_iter,
                "step": params.step,
                "rand_init": params.rand_init,
                "targeted": params.targeted,
                "clip": [params.clip_min, params.clip_max],
                "seed": params.seed,
            },
            "n_samples": int(finite_mask.sum()),
            "n_diverged": n_dropped,
        },
        skipped,
        outputs,
    )
    return {
        "pairs": pairs,
        "manifest": manifest,
        "n_samples": int(finite_mask.sum()),
        "n_diverged": n_dropped,
    }
