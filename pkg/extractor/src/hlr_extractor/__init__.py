"""Activation extraction client for the HLR1 map-analysis toolkit.

Runs pretrained torchvision classifiers (ResNet18/50, VGG19 with batch
norm) over an image directory, pools and normalizes the probe-point
activations, and writes them as HLR1 files; optionally crafts targeted
PGD adversarial counterparts as aligned clean/adversarial file pairs.
The consuming toolkit is a separate program: the only contract between
the two is the file format.
"""

from .attack import PgdParams, craft_adversarials, pgd_batch
from .errors import ExtractorError, FormatError, InvalidArgumentError
from .extract import ExtractionResult, ExtractionSpec, extract_activations
from .hlrfile import pool_and_normalize, write_hlr
from .models import MODEL_NAMES, PROBE_DIMS, build_model, resolve_layers

__all__ = [
    "ExtractionResult",
    "ExtractionSpec",
    "ExtractorError",
    "FormatError",
    "InvalidArgumentError",
    "MODEL_NAMES",
    "PROBE_DIMS",
    "PgdParams",
    "build_model",
    "craft_adversarials",
    "extract_activations",
    "pgd_batch",
    "pool_and_normalize",
    "resolve_layers",
    "write_hlr",
]
