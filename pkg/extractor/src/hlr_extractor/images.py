"""Image listing, decoding, and label-file parsing.

A label file is either devkit style (one integer per line, aligned with
the sorted image listing) or explicit ``name id`` pairs, detected by
token count on the first non-empty line.
"""

from __future__ import annotations

import logging
import os

import numpy as np
from PIL import Image

from .errors import InvalidArgumentError

log = logging.getLogger(__name__)

_EXTENSIONS = (".jpg", ".jpeg", ".png", ".bmp", ".webp")


def list_images(directory) -> list[str]:
    """Sorted paths of the recognized image files directly in a directory."""
    if not os.path.isdir(directory):
        raise InvalidArgumentError(f"image directory not found: {directory}")
    names = sorted(
        n
        for n in os.listdir(directory)
        if n.lower().endswith(_EXTENSIONS)
        and os.path.isfile(os.path.join(directory, n))
    )
    if not names:
        raise InvalidArgumentError(f"no image files in {directory}")
    return [os.path.join(directory, n) for n in names]


def load_rgb(path) -> Image.Image | None:
    """Decode one image to RGB; None (with a warning) when undecodable."""
    try:
        with Image.open(path) as img:
            return img.convert("RGB")
    except (OSError, SyntaxError, ValueError) as exc:
        log.warning("skipping undecodable image %s: %s", path, exc)
        return None


def read_labels(path, image_paths: list[str]) -> np.ndarray:
    """Class ids for each listed image, as uint32 in listing order."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise InvalidArgumentError(f"label file {path} is empty")

    def to_id(token, context):
        try:
            value = int(token)
        except ValueError:
            raise InvalidArgumentError(
                f"label file {path}: non-integer label {token!r} ({context})"
            ) from None
        if value < 0:
            raise InvalidArgumentError(
                f"label file {path}: negative label {value} ({context})"
            )
        return value

    if len(lines[0].split()) == 1:
        if len(lines) != len(image_paths):
            raise InvalidArgumentError(
                f"label file {path} has {len(lines)} entries for "
                f"{len(image_paths)} images"
            )
        ids = [to_id(ln, f"line {i + 1}") for i, ln in enumerate(lines)]
        return np.asarray(ids, dtype=np.uint32)

    mapping = {}
    for i, ln in enumerate(lines):
        parts = ln.split()
        if len(parts) != 2:
            raise InvalidArgumentError(
                f"label file {path}: expected 'name id' on line {i + 1}, "
                f"got {ln!r}"
            )
        mapping[parts[0]] = to_id(parts[1], f"line {i + 1}")
    ids = []
    for p in image_paths:
        name = os.path.basename(p)
        if name not in mapping:
            raise InvalidArgumentError(
                f"label file {path} has no entry for image {name}"
            )
        ids.append(mapping[name])
    return np.asarray(ids, dtype=np.uint32)
