"""Writer for the HLR1 vector exchange format, plus the pooling reduction.

The format is owned by the consuming toolkit; this module re-states the
layout so the extractor ships without importing it. Layout, all
little-endian: magic ``HLR1``, u32 version, u32 n_samples, u32 dim, u8
has_labels, u8 tag byte length, tag UTF-8 bytes, f32 vectors row-major,
then u32 labels when has_labels is 1.
"""

from __future__ import annotations

import logging
import struct

import numpy as np
import torch

from .errors import InvalidArgumentError

log = logging.getLogger(__name__)

_MAGIC = b"HLR1"
_VERSION = 1
_HEADER = struct.Struct("<III BB")
_MAX_TAG_BYTES = 255


def pool_and_normalize(activations: torch.Tensor) -> np.ndarray:
    """Average each channel map over its spatial extent, then scale rows
    to unit L2 norm.

    Accepts an (n, channels, h, w) activation tensor; returns float32
    (n, channels). Zero rows carry no direction and pass through
    unscaled, with a warning.
    """
    if activations.ndim != 4:
        raise InvalidArgumentError(
            f"expected (n, c, h, w) activations, got shape "
            f"{tuple(activations.shape)}"
        )
    pooled = activations.float().mean(dim=(2, 3)).cpu().numpy()
    norms = np.linalg.norm(pooled.astype(np.float64), axis=1)
    zero = norms == 0.0
    if np.any(zero):
        log.warning(
            "pool_and_normalize: %d of %d vectors have zero norm and were "
            "left unscaled",
            int(zero.sum()),
            pooled.shape[0],
        )
        norms = norms.copy()
        norms[zero] = 1.0
    return (pooled / norms[:, None]).astype(np.float32)


def write_hlr(path, vectors: np.ndarray, labels=None, tag: str = "") -> None:
    """Serialize one vector set; see the module docstring for the layout."""
    vectors = np.ascontiguousarray(vectors, dtype=np.float32)
    if vectors.ndim != 2:
        raise InvalidArgumentError(
            f"vectors must be 2-D (n_samples, dim), got shape {vectors.shape}"
        )
    if labels is not None:
        labels = np.ascontiguousarray(labels, dtype=np.uint32)
        if labels.shape != (vectors.shape[0],):
            raise InvalidArgumentError(
                f"labels shape {labels.shape} does not match "
                f"{vectors.shape[0]} samples"
            )
    tag_bytes = tag.encode("utf-8")
    if len(tag_bytes) > _MAX_TAG_BYTES:
        raise InvalidArgumentError(
            f"tag exceeds {_MAX_TAG_BYTES} bytes when UTF-8 encoded"
        )
    n_samples, dim = vectors.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(
            _HEADER.pack(
                _VERSION, n_samples, dim, 0 if labels is None else 1, len(tag_bytes)
            )
        )
        fh.write(tag_bytes)
        fh.write(vectors.astype("<f4").tobytes())
        if labels is not None:
            fh.write(labels.astype("<u4").tobytes())
