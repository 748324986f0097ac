"""One JSON document that drives every pipeline command.

Each section mirrors the knobs of one stage; anything omitted falls back
to the defaults below, and unknown keys are rejected so typos cannot
silently change an experiment. The master seed fans out to per-stage
seeds through fixed offsets, keeping stages decoupled but reproducible
from the single document.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .errors import FormatError, InvalidArgumentError

# per-stage seed = master seed + offset
_SEED_OFFSETS = {
    "dataset": 1,
    "refnet": 2,
    "som": 3,
    "cluster": 4,
    "attack": 5,
    "invert": 6,
}


@dataclass(frozen=True)
class DatasetSection:
    n_samples: int = 2048
    n_classes: int = 8
    size: int = 16
    noise: float = 0.05


@dataclass(frozen=True)
class RefnetSection:
    c1: int = 8
    c2: int = 16
    kernel: int = 3
    steps: int = 600
    lr: float = 0.05
    momentum: float = 0.9
    batch_size: int = 32


@dataclass(frozen=True)
class SomSection:
    m: int = 20
    n: int = 20
    sigma0: float = 5.0
    alpha0: float = 0.01
    epochs: int = 5
    epsilon_stab: float = 1e-8
    max_updates: int | None = None
    window: int = 1000


@dataclass(frozen=True)
class DensitySection:
    bandwidth: float | None = None  # None = Scott's rule
    wrap: bool = False
    top_k: int = 5
    min_percentile: float = 50.0


@dataclass(frozen=True)
class ClusterSection:
    k: int | None = None  # None = dataset n_classes
    n_seeds: int = 5


@dataclass(frozen=True)
class AttackSection:
    eps_values: tuple = (0.01, 0.02, 0.04, 0.08)
    n_iter: int = 40
    step: float = 0.002
    rand_init: bool = True
    targeted: bool = True
    n_images: int = 100


@dataclass(frozen=True)
class InvertSection:
    lr: float = 0.05
    n_iter: int = 512
    smoothness_lambda: float = 0.0
    init: str = "random-uniform"


_SECTIONS = {
    "dataset": DatasetSection,
    "refnet": RefnetSection,
    "som": SomSection,
    "density": DensitySection,
    "cluster": ClusterSection,
    "attack": AttackSection,
    "invert": InvertSection,
}


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    out_dir: str = "runs"
    dataset: DatasetSection = field(default_factory=DatasetSection)
    refnet: RefnetSection = field(default_factory=RefnetSection)
    som: SomSection = field(default_factory=SomSection)
    density: DensitySection = field(default_factory=DensitySection)
    cluster: ClusterSection = field(default_factory=ClusterSection)
    attack: AttackSection = field(default_factory=AttackSection)
    invert: InvertSection = field(default_factory=InvertSection)

    def section_seed(self, name: str) -> int:
        if name not in _SEED_OFFSETS:
            raise InvalidArgumentError(f"unknown pipeline stage {name!r}")
        return self.seed + _SEED_OFFSETS[name]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _build_section(cls, data: dict, where: str):
    valid = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - valid
    if unknown:
        raise InvalidArgumentError(
            f"unknown keys in config section {where!r}: {', '.join(sorted(unknown))}"
        )
    if "eps_values" in data:
        data = dict(data, eps_values=tuple(data["eps_values"]))
    return cls(**data)


def config_from_dict(data: dict) -> PipelineConfig:
    """Validate a parsed config document; unknown keys raise."""
    if not isinstance(data, dict):
        raise InvalidArgumentError("config document must be a JSON object")
    unknown = set(data) - set(_SECTIONS) - {"seed", "out_dir"}
    if unknown:
        raise InvalidArgumentError(
            f"unknown top-level config keys: {', '.join(sorted(unknown))}"
        )
    kwargs = {}
    if "seed" in data:
        kwargs["seed"] = int(data["seed"])
    if "out_dir" in data:
        kwargs["out_dir"] = str(data["out_dir"])
    for name, cls in _SECTIONS.items():
        section = data.get(name, {})
        if not isinstance(section, dict):
            raise InvalidArgumentError(f"config section {name!r} must be an object")
        kwargs[name] = _build_section(cls, section, name)
    return PipelineConfig(**kwargs)


def load_config(path) -> PipelineConfig:
    """Read and validate a JSON config file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"config file is not valid JSON: {exc}") from exc
    return config_from_dict(data)
