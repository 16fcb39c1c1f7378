#!/usr/bin/python3
# -----------------------------------------------------------
# Run configuration: field, model, render, train and dataset settings
# -----------------------------------------------------------
import dataclasses
import json
import os
from typing import Optional, Tuple

from app.exceptions import InvalidConfig
from app.log import logger


ENV_PREFIX = "NRFF_"
VIEW_ENCODINGS = ("ree", "ree_color", "pe")
DTYPES = ("float32", "float64")


@dataclasses.dataclass(frozen=True)
class FieldConfig:
    """
    resolution schedule, channel count, scene bounds and initialization of one feature field
    """
    n_min: int = 16
    n_max: int = 512
    levels: int = 16
    channels: int = 4
    bbox_min: Tuple[float, float, float] = (-1.5, -1.5, -1.5)
    bbox_max: Tuple[float, float, float] = (1.5, 1.5, 1.5)
    init_std: float = 0.1

    def __post_init__(self):
        if self.n_min < 2:
            raise InvalidConfig(f"n_min must be >= 2, got {self.n_min}")
        if self.n_max < self.n_min:
            raise InvalidConfig(f"n_max ({self.n_max}) must be >= n_min ({self.n_min})")
        if self.levels < 1 or self.channels < 1:
            raise InvalidConfig(f"levels and channels must be >= 1, got {self.levels} and {self.channels}")
        if len(self.bbox_min) != 3 or len(self.bbox_max) != 3:
            raise InvalidConfig("bbox bounds must have three components")
        if any(low >= high for low, high in zip(self.bbox_min, self.bbox_max)):
            raise InvalidConfig(f"bbox_min {self.bbox_min} must be below bbox_max {self.bbox_max}")
        if self.init_std < 0:
            raise InvalidConfig(f"init_std must be >= 0, got {self.init_std}")


def default_density_config():
    """
    density field defaults: same schedule as the appearance field with 2 channels
    """
    return FieldConfig(channels=2)


@dataclasses.dataclass(frozen=True)
class ModelConfig:
    """
    sizes of the parameter bundle, the lobe grid and both MLPs
    """
    bottleneck: int = 128
    asg_channels: int = 2
    lobe_rows: int = 8
    lobe_cols: int = 16
    hidden: int = 256
    spatial_layers: int = 3
    directional_layers: int = 6
    view_encoding: str = "ree"
    negate_view_dir: bool = False
    density_shift: float = 0.0
    learn_density_shift: bool = False
    pe_frequencies: int = 4

    def __post_init__(self):
        if self.view_encoding not in VIEW_ENCODINGS:
            raise InvalidConfig(f"view_encoding must be one of {VIEW_ENCODINGS}, got {self.view_encoding}")
        if self.view_encoding == "ree_color" and self.asg_channels != 3:
            raise InvalidConfig("the colour-space encoding needs asg_channels = 3")
        if min(self.bottleneck, self.asg_channels, self.lobe_rows, self.lobe_cols, self.hidden) < 1:
            raise InvalidConfig("bottleneck, asg_channels, lobe grid and hidden width must be >= 1")
        if self.spatial_layers < 1 or self.directional_layers < 1:
            raise InvalidConfig("MLPs need at least one layer")
        if self.pe_frequencies < 0:
            raise InvalidConfig("pe_frequencies must be >= 0")

    @property
    def n_lobes(self):
        return self.lobe_rows * self.lobe_cols


@dataclasses.dataclass(frozen=True)
class RenderConfig:
    """
    ray sampling and compositing settings
    """
    samples: int = 512
    weight_threshold: float = 1e-4
    background: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    jitter: bool = True
    chunk: int = 4096

    def __post_init__(self):
        if self.samples < 1 or self.chunk < 1:
            raise InvalidConfig("samples and chunk must be >= 1")
        if self.weight_threshold < 0:
            raise InvalidConfig("weight_threshold must be >= 0")
        if len(self.background) != 3 or any(c < 0 or c > 1 for c in self.background):
            raise InvalidConfig(f"background must be an RGB triple in [0, 1], got {self.background}")


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    """
    loss weights, Adam learning rates and training cadence
    """
    steps: int = 30000
    batch_rays: int = 4096
    alpha: float = 0.3
    beta: float = 0.0004
    lr_field: float = 2e-3
    lr_mlp: float = 1e-3
    lr_final_factor: float = 0.1
    seed: int = 0
    eval_every: int = 1000
    log_every: int = 100
    checkpoint_every: int = 5000
    eval_views: int = 0
    dtype: str = "float32"
    density_l1_samples: int = 0
    deterministic: bool = False

    def __post_init__(self):
        if self.steps < 0 or self.batch_rays < 1:
            raise InvalidConfig("steps must be >= 0 and batch_rays >= 1")
        if self.alpha < 0 or self.beta < 0:
            raise InvalidConfig(f"loss weights must be >= 0, got alpha={self.alpha} beta={self.beta}")
        if self.lr_field <= 0 or self.lr_mlp <= 0 or self.lr_final_factor <= 0:
            raise InvalidConfig("learning rates and lr_final_factor must be > 0")
        if self.dtype not in DTYPES:
            raise InvalidConfig(f"dtype must be one of {DTYPES}, got {self.dtype}")
        if min(self.eval_every, self.log_every, self.checkpoint_every) < 0:
            raise InvalidConfig("cadences must be >= 0")


@dataclasses.dataclass(frozen=True)
class DatasetConfig:
    """
    where training images come from: a NeRF-synthetic directory or a procedural scene
    """
    kind: str = "procedural"
    path: str = ""
    scene: str = "specular"
    n_train: int = 16
    n_test: int = 4
    resolution: int = 64
    camera_radius: float = 4.0
    fov_x: float = 0.6911112070083618
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("procedural", "nerf_synthetic"):
            raise InvalidConfig(f"dataset kind must be 'procedural' or 'nerf_synthetic', got {self.kind}")
        if self.kind == "nerf_synthetic" and not self.path:
            raise InvalidConfig("a nerf_synthetic dataset needs a path")
        if self.n_train < 1 or self.n_test < 0 or self.resolution < 1:
            raise InvalidConfig("n_train and resolution must be >= 1, n_test >= 0")


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """
    everything needed to build, train and render a model
    """
    appearance: FieldConfig = dataclasses.field(default_factory=FieldConfig)
    density: FieldConfig = dataclasses.field(default_factory=default_density_config)
    model: ModelConfig = dataclasses.field(default_factory=ModelConfig)
    render: RenderConfig = dataclasses.field(default_factory=RenderConfig)
    train: TrainConfig = dataclasses.field(default_factory=TrainConfig)
    dataset: DatasetConfig = dataclasses.field(default_factory=DatasetConfig)

    def __post_init__(self):
        if (self.appearance.bbox_min != self.density.bbox_min
                or self.appearance.bbox_max != self.density.bbox_max):
            raise InvalidConfig("appearance and density fields must share the scene bbox")

    @property
    def bbox(self):
        return self.appearance.bbox_min, self.appearance.bbox_max


SECTIONS = {
    "appearance": FieldConfig,
    "density": FieldConfig,
    "model": ModelConfig,
    "render": RenderConfig,
    "train": TrainConfig,
    "dataset": DatasetConfig,
}


def _section_from_dict(cls, values, section):
    known = {field.name: field for field in dataclasses.fields(cls)}
    unknown = set(values) - set(known)
    if unknown:
        raise InvalidConfig(f"unknown keys in section '{section}': {sorted(unknown)}")
    kwargs = {}
    for key, value in values.items():
        if isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except TypeError as error:
        raise InvalidConfig(f"section '{section}': {error}") from error


def config_from_dict(document):
    """
    builds a RunConfig from a dict of sections, missing sections and keys take their defaults
    """
    unknown = set(document) - set(SECTIONS)
    if unknown:
        raise InvalidConfig(f"unknown sections: {sorted(unknown)}")
    sections = {}
    for section, cls in SECTIONS.items():
        values = document.get(section, {})
        if section == "density" and "channels" not in values:
            values = {"channels": 2, **values}
        if section == "density":
            # the density field inherits the appearance bounds unless given explicitly
            appearance = document.get("appearance", {})
            for key in ("bbox_min", "bbox_max"):
                if key in appearance and key not in values:
                    values = {**values, key: appearance[key]}
        sections[section] = _section_from_dict(cls, values, section)
    return RunConfig(**sections)


def config_to_dict(config):
    """
    inverse of config_from_dict, tuples become lists so the result is JSON serializable
    """
    document = {}
    for section in SECTIONS:
        values = dataclasses.asdict(getattr(config, section))
        document[section] = {key: list(val) if isinstance(val, tuple) else val for key, val in values.items()}
    return document


def _decode_env_value(raw):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_env_overrides(document, environ=None):
    """
    overrides values of `document` with NRFF_<SECTION>__<FIELD> environment variables
    """
    environ = os.environ if environ is None else environ
    document = {section: dict(values) for section, values in document.items()}
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX) or "__" not in name:
            continue
        section, key = name[len(ENV_PREFIX):].lower().split("__", 1)
        if section not in SECTIONS:
            continue
        document.setdefault(section, {})[key] = _decode_env_value(raw)
        logger.debug("config override from %s: %s.%s = %s", name, section, key, raw)
    return document


def load_config(path: Optional[str] = None, environ=None):
    """
    reads a JSON run configuration at `path` (defaults only when None) and applies environment overrides
    """
    document = {}
    if path is not None:
        try:
            with open(path) as f_in:
                document = json.load(f_in)
        except OSError as error:
            raise InvalidConfig(f"cannot read {path}: {error}") from error
        except json.JSONDecodeError as error:
            raise InvalidConfig(f"{path} is not valid JSON: {error}") from error
        if not isinstance(document, dict):
            raise InvalidConfig(f"{path} must contain a JSON object")
    document = apply_env_overrides(document, environ)
    return config_from_dict(document)


def tiny_config():
    """
    smallest full pipeline, in double precision: two levels at 4 and 8 nodes with 2 channels,
    2x2 lobes, 16-unit two-layer MLPs and 8 samples per ray without threshold or jitter
    """
    field_config = FieldConfig(n_min=4, n_max=8, levels=2, channels=2)
    return RunConfig(
        appearance=field_config,
        density=field_config,
        model=ModelConfig(bottleneck=8, asg_channels=2, lobe_rows=2, lobe_cols=2, hidden=16,
                          spatial_layers=2, directional_layers=2),
        render=RenderConfig(samples=8, weight_threshold=0.0, jitter=False, chunk=1024),
        train=TrainConfig(steps=200, batch_rays=4, dtype="float64", eval_every=0, log_every=10,
                          checkpoint_every=100),
        dataset=DatasetConfig(n_train=4, n_test=1, resolution=16))
