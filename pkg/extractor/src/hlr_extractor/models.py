"""Supported classifiers and their probe points.

ResNets expose the outputs of their four composite blocks (CL1 to CL4);
VGG19 with batch norm exposes the outputs of its last four max-pooling
layers (ML1 to ML4). Inputs are 224x224 RGB in [0, 1]; the standard
channel normalization is applied inside the wrapper so attack code can
clip in pixel space.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torchvision import models as tvm
from torchvision import transforms

from .errors import InvalidArgumentError

INPUT_SIZE = 224
_RESIZE = 256
_MEAN = (0.485, 0.456, 0.406)
_STD = (0.229, 0.224, 0.225)

PROBE_DIMS = {
    "resnet18": {"CL1": 64, "CL2": 128, "CL3": 256, "CL4": 512},
    "resnet50": {"CL1": 256, "CL2": 512, "CL3": 1024, "CL4": 2048},
    "vgg19_bn": {"ML1": 128, "ML2": 256, "ML3": 512, "ML4": 512},
}

MODEL_NAMES = tuple(PROBE_DIMS)

preprocess = transforms.Compose(
    [
        transforms.Resize(_RESIZE),
        transforms.CenterCrop(INPUT_SIZE),
        transforms.ToTensor(),
    ]
)

PREPROCESS_RECORD = {
    "resize": _RESIZE,
    "center_crop": INPUT_SIZE,
    "pixel_range": [0.0, 1.0],
    "normalize_mean": list(_MEAN),
    "normalize_std": list(_STD),
}


class NormalizedClassifier(nn.Module):
    """Wraps a torchvision model so forward takes [0, 1] pixel tensors."""

    def __init__(self, inner: nn.Module):
        super().__init__()
        self.inner = inner
        self.register_buffer("mean", torch.tensor(_MEAN).view(1, 3, 1, 1))
        self.register_buffer("std", torch.tensor(_STD).view(1, 3, 1, 1))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.inner((x - self.mean) / self.std)


@dataclass
class ProbeStack:
    """A wrapped classifier plus the modules whose outputs are probed."""

    name: str
    model: NormalizedClassifier
    probes: dict[str, nn.Module]
    n_classes: int


def _resnet_probes(net) -> dict[str, nn.Module]:
    return {
        "CL1": net.layer1,
        "CL2": net.layer2,
        "CL3": net.layer3,
        "CL4": net.layer4,
    }


def _vgg_probes(net) -> dict[str, nn.Module]:
    pools = [m for m in net.features if isinstance(m, nn.MaxPool2d)]
    # five pools in vgg19_bn; the probe points are the last four
    return dict(zip(("ML1", "ML2", "ML3", "ML4"), pools[-4:]))


def build_model(name: str, pretrained: bool = True, device: str = "cpu") -> ProbeStack:
    """Construct a supported classifier in eval mode with its probes.

    ``pretrained=False`` builds randomly initialized weights, which is
    enough for format and shape checks without the weight download.
    """
    if name not in PROBE_DIMS:
        raise InvalidArgumentError(
            f"unknown model {name!r}; supported: {', '.join(MODEL_NAMES)}"
        )
    weights = "IMAGENET1K_V1" if pretrained else None
    net = tvm.get_model(name, weights=weights)
    net.eval()
    probes = _vgg_probes(net) if name == "vgg19_bn" else _resnet_probes(net)
    wrapped = NormalizedClassifier(net).to(device)
    wrapped.eval()
    n_classes = (
        net.classifier[-1].out_features
        if name == "vgg19_bn"
        else net.fc.out_features
    )
    return ProbeStack(name=name, model=wrapped, probes=probes, n_classes=n_classes)


def resolve_layers(name: str, layers) -> tuple[str, ...]:
    """Expand 'all' (or empty) to every probe of the model and validate."""
    known = tuple(PROBE_DIMS[name])
    if not layers or layers == "all" or tuple(layers) == ("all",):
        return known
    out = tuple(layers)
    for tag in out:
        if tag not in known:
            raise InvalidArgumentError(
                f"unknown probe {tag!r} for {name}; expected one of "
                f"{', '.join(known)}"
            )
    return out


class ProbeCapture:
    """Forward hooks that stash each probe's output for the last batch."""

    def __init__(self, probes: dict[str, nn.Module]):
        self.out: dict[str, torch.Tensor] = {}
        self._handles = [
            mod.register_forward_hook(self._hook_for(tag))
            for tag, mod in probes.items()
        ]

    def _hook_for(self, tag: str):
        def hook(_mod, _inp, out):
            self.out[tag] = out.detach()

        return hook

    def close(self) -> None:
        for h in self._handles:
            h.remove()
        self._handles = []

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
