"""Pooled hidden-layer representations and their binary exchange format.

A stack of convolutional feature maps is reduced to one vector per sample
by averaging each channel over its spatial extent, then L2-normalizing.
The resulting sets travel between tools in a small self-describing binary
file (magic ``HLR1``) so producers and consumers can be separate programs.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, InvalidArgumentError

log = logging.getLogger(__name__)

_HLR_MAGIC = b"HLR1"
_HLR_VERSION = 1
# magic + version + n_samples + dim + has_labels + tag_len
_HEADER = struct.Struct("<III BB")
_MAX_TAG_BYTES = 255


@dataclass
class HlrSet:
    """Pooled-activation vectors for one layer of one sample set.

    ``vectors`` is float32 (n_samples, dim); ``labels`` is uint32
    (n_samples,) or None; ``tag`` names the producing layer.
    """

    vectors: np.ndarray
    labels: np.ndarray | None = None
    tag: str = ""

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2:
            raise InvalidArgumentError(
                f"vectors must be 2-D (n_samples, dim), got shape {self.vectors.shape}"
            )
        if self.labels is not None:
            self.labels = np.ascontiguousarray(self.labels, dtype=np.uint32)
            if self.labels.shape != (self.vectors.shape[0],):
                raise InvalidArgumentError(
                    f"labels shape {self.labels.shape} does not match "
                    f"{self.vectors.shape[0]} samples"
                )
        if len(self.tag.encode("utf-8")) > _MAX_TAG_BYTES:
            raise InvalidArgumentError(
                f"tag exceeds {_MAX_TAG_BYTES} bytes when UTF-8 encoded"
            )

    @property
    def n_samples(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def pool_feature_maps(activations: np.ndarray) -> np.ndarray:
    """Average each channel over its spatial extent.

    Accepts (n_samples, channels, h, w) or a single (channels, h, w) map;
    returns (n_samples, channels) float32.
    """
    activations = np.asarray(activations)
    if activations.ndim == 3:
        activations = activations[None]
    if activations.ndim != 4:
        raise InvalidArgumentError(
            f"expected (n, c, h, w) or (c, h, w) activations, got shape "
            f"{activations.shape}"
        )
    if activations.size == 0:
        raise InvalidArgumentError("activations are empty")
    return activations.mean(axis=(2, 3), dtype=np.float64).astype(np.float32)


def normalize(vectors: np.ndarray) -> np.ndarray:
    """Scale each row to unit L2 norm; zero rows pass through unchanged.

    A zero row carries no direction, so it is kept as-is and reported via
    the module logger rather than turned into NaN.
    """
    vectors = np.asarray(vectors, dtype=np.float32)
    if vectors.ndim != 2:
        raise InvalidArgumentError(
            f"vectors must be 2-D (n_samples, dim), got shape {vectors.shape}"
        )
    norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
    zero = norms == 0.0
    if np.any(zero):
        log.warning(
            "normalize: %d of %d vectors have zero norm and were left unscaled",
            int(zero.sum()),
            vectors.shape[0],
        )
        norms = norms.copy()
        norms[zero] = 1.0
    return (vectors / norms[:, None]).astype(np.float32)


def hlr_from_activations(
    activations: np.ndarray,
    labels: np.ndarray | None = None,
    tag: str = "",
) -> HlrSet:
    """Pool, normalize, and wrap activations into an HlrSet."""
    return HlrSet(normalize(pool_feature_maps(activations)), labels, tag)


def write_hlr(path, hlr: HlrSet) -> None:
    """Serialize an HlrSet.

    Layout, all little-endian: magic ``HLR1``, u32 version, u32 n_samples,
    u32 dim, u8 has_labels, u8 tag byte length, tag UTF-8 bytes, f32
    vectors row-major, then u32 labels when has_labels is 1.
    """
    tag_bytes = hlr.tag.encode("utf-8")
    has_labels = 1 if hlr.labels is not None else 0
    with open(path, "wb") as fh:
        fh.write(_HLR_MAGIC)
        fh.write(
            _HEADER.pack(
                _HLR_VERSION, hlr.n_samples, hlr.dim, has_labels, len(tag_bytes)
            )
        )
        fh.write(tag_bytes)
        fh.write(hlr.vectors.astype("<f4").tobytes())
        if hlr.labels is not None:
            fh.write(hlr.labels.astype("<u4").tobytes())


def read_hlr(path) -> HlrSet:
    """Parse a file written by write_hlr, verifying every length it declares."""
    with open(path, "rb") as fh:
        blob = fh.read()
    fixed = 4 + _HEADER.size
    if len(blob) < fixed:
        raise FormatError("truncated header: file shorter than the fixed fields")
    if blob[:4] != _HLR_MAGIC:
        raise FormatError(f"bad magic {blob[:4]!r}, expected {_HLR_MAGIC!r}")
    version, n_samples, dim, has_labels, tag_len = _HEADER.unpack(blob[4:fixed])
    if version != _HLR_VERSION:
        raise FormatError(f"unsupported version {version}, expected {_HLR_VERSION}")
    if has_labels not in (0, 1):
        raise FormatError(f"invalid has_labels flag {has_labels}")
    if dim == 0 and n_samples > 0:
        raise FormatError("declared dim 0 with nonzero sample count")
    n_values = n_samples * dim
    if n_values > 2**31:
        raise FormatError(f"declared vector count {n_values} overflows sane bounds")
    offset = fixed
    if len(blob) < offset + tag_len:
        raise FormatError("truncated tag")
    try:
        tag = blob[offset : offset + tag_len].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"tag is not valid UTF-8: {exc}") from exc
    offset += tag_len
    vec_bytes = n_values * 4
    if len(blob) < offset + vec_bytes:
        raise FormatError(
            f"truncated vectors: expected {vec_bytes} bytes, found "
            f"{len(blob) - offset}"
        )
    vectors = (
        np.frombuffer(blob, dtype="<f4", count=n_values, offset=offset)
        .reshape(n_samples, dim)
        .copy()
    )
    offset += vec_bytes
    labels = None
    if has_labels:
        lab_bytes = n_samples * 4
        if len(blob) < offset + lab_bytes:
            raise FormatError(
                f"truncated labels: expected {lab_bytes} bytes, found "
                f"{len(blob) - offset}"
            )
        labels = np.frombuffer(blob, dtype="<u4", count=n_samples, offset=offset).copy()
        offset += lab_bytes
    if len(blob) > offset:
        raise FormatError(f"trailing data after payload ({len(blob) - offset} bytes)")
    return HlrSet(vectors, labels, tag)
