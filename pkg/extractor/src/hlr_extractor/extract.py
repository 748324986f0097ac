"""Pooled-activation extraction from pretrained classifiers to HLR1 files.

One output file per probe point; vectors are average-pooled over the
spatial axes and L2-normalized, with the image's class id attached when
a label source is given. A JSON manifest records the preprocessing, the
skipped images, and the output hashes.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from . import hlrfile, images, models
from .errors import InvalidArgumentError

log = logging.getLogger(__name__)


@dataclass
class ExtractionSpec:
    """What to extract: model, probe points, images, labels, destination."""

    model: str
    image_dir: str
    out_dir: str
    layers: tuple[str, ...] = ()  # empty means every probe of the model
    label_file: str | None = None
    batch_size: int = 16
    device: str = "cpu"
    pretrained: bool = True

    def __post_init__(self):
        if self.model not in models.PROBE_DIMS:
            raise InvalidArgumentError(
                f"unknown model {self.model!r}; supported: "
                f"{', '.join(models.MODEL_NAMES)}"
            )
        self.layers = models.resolve_layers(self.model, self.layers)
        if self.batch_size < 1:
            raise InvalidArgumentError(
                f"batch_size must be >= 1, got {self.batch_size}"
            )


@dataclass
class ExtractionResult:
    """Output paths plus how many images survived decoding."""

    files: dict[str, str]
    manifest: str
    n_samples: int
    skipped: list[str] = field(default_factory=list)


def decode_images(paths: list[str]):
    """Decode and preprocess; undecodable files are skipped with a warning.

    Returns the stacked (n, 3, 224, 224) tensor, the indices into
    ``paths`` that survived, and the basenames that did not.
    """
    tensors, kept, skipped = [], [], []
    for i, p in enumerate(paths):
        img = images.load_rgb(p)
        if img is None:
            skipped.append(os.path.basename(p))
            continue
        tensors.append(models.preprocess(img))
        kept.append(i)
    if not tensors:
        raise InvalidArgumentError("no readable images in the input set")
    return torch.stack(tensors), kept, skipped


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path, command: str, spec: ExtractionSpec, extra: dict,
                   skipped: list[str], outputs: list[str]) -> None:
    doc = {
        "command": command,
        "model": spec.model,
        "pretrained": spec.pretrained,
        "layers": list(spec.layers),
        "preprocessing": models.PREPROCESS_RECORD,
        "image_dir": spec.image_dir,
        "label_file": spec.label_file,
        "skipped_images": sorted(skipped),
        "n_skipped": len(skipped),
        "outputs": {os.path.basename(p): _sha256(p) for p in outputs},
    }
    doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def extract_activations(spec: ExtractionSpec) -> ExtractionResult:
    """Run the model over the image set and write one HLR1 file per probe."""
    # input and label problems surface before the model build
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
    pooled: dict[str, list[np.ndarray]] = {tag: [] for tag in spec.layers}
    with models.ProbeCapture(probes) as capture, torch.no_grad():
        for start in range(0, batch_all.shape[0], spec.batch_size):
            chunk = batch_all[start : start + spec.batch_size].to(spec.device)
            stack.model(chunk)
            for tag in spec.layers:
                pooled[tag].append(hlrfile.pool_and_normalize(capture.out[tag]))

    os.makedirs(spec.out_dir, exist_ok=True)
    files = {}
    for tag in spec.layers:
        vectors = np.vstack(pooled[tag])
        path = os.path.join(spec.out_dir, f"hlr_{spec.model}_{tag}.hlr")
        hlrfile.write_hlr(path, vectors, labels, tag)
        files[tag] = path
        log.info("wrote %d x %d vectors for %s", *vectors.shape, tag)

    manifest = os.path.join(spec.out_dir, f"manifest_extract_{spec.model}.json")
    write_manifest(
        manifest,
        "extract",
        spec,
        {"n_samples": int(batch_all.shape[0])},
        skipped,
        list(files.values()),
    )
    return ExtractionResult(
        files=files,
        manifest=manifest,
        n_samples=int(batch_all.shape[0]),
        skipped=skipped,
    )
