"""Run configuration: YAML parsing with strict schema validation."""

import json
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ConfigError
from .detector import TransformParams
from .losses import LossWeights
from .metrics import MatchingConfig
from .simulate import ScenarioSpec
from .tracker import TrackerConfig

POLICIES = ("tr", "pcw", "hfp")

PATH_KEYS = (
    "scenario",
    "out",
    "gt",
    "streams",
    "decisions",
    "detections",
    "manifest",
    "transform",
)


@dataclass
class RunConfig:
    """Pipeline constants; defaults mirror the documented operating point."""

    window_n: int = 1
    mask_threshold: float = 0.5
    nms_threshold: float = 0.2
    conf_threshold: float = 0.8
    t_max: int = 25
    k_clusters: int = 1
    ridge_lambda: float = 1e-3
    policy: str = "tr"
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    weights: LossWeights = field(default_factory=LossWeights)
    matching: MatchingConfig = field(default_factory=MatchingConfig)
    paths: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.window_n < 0:
            raise ConfigError(f"window_n must be >= 0, got {self.window_n}")
        if not 0.0 <= self.mask_threshold <= 1.0:
            raise ConfigError(f"mask_threshold must be in [0, 1], got {self.mask_threshold}")
        if not 0.0 < self.nms_threshold < 1.0:
            raise ConfigError(f"nms_threshold must be in (0, 1), got {self.nms_threshold}")
        if not 0.0 <= self.conf_threshold <= 1.0:
            raise ConfigError(f"conf_threshold must be in [0, 1], got {self.conf_threshold}")
        if self.t_max < 1:
            raise ConfigError(f"t_max must be >= 1, got {self.t_max}")
        if self.k_clusters < 1:
            raise ConfigError(f"k_clusters must be >= 1, got {self.k_clusters}")
        if self.ridge_lambda < 0.0:
            raise ConfigError(f"ridge_lambda must be >= 0, got {self.ridge_lambda}")
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        unknown = set(self.paths) - set(PATH_KEYS)
        if unknown:
            raise ConfigError(f"unknown path keys: {sorted(unknown)}")


def _check_keys(section: str, data: dict, allowed):
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {section}: {sorted(unknown)}")


def _dataclass_fields(cls):
    return tuple(cls.__dataclass_fields__)


def config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a mapping, got {type(data).__name__}")
    _check_keys("config", data, _dataclass_fields(RunConfig))
    kwargs = dict(data)
    for key, cls in (("tracker", TrackerConfig), ("weights", LossWeights),
                     ("matching", MatchingConfig)):
        if key in kwargs:
            section = kwargs[key]
            if not isinstance(section, dict):
                raise ConfigError(f"{key} must be a mapping")
            _check_keys(key, section, _dataclass_fields(cls))
            kwargs[key] = cls(**section)
    return RunConfig(**kwargs)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is None:
        data = {}
    return config_from_dict(data)


def spec_from_dict(data: dict) -> ScenarioSpec:
    """Scenario spec from a mapping; quality maps merge over the defaults."""
    if not isinstance(data, dict):
        raise ConfigError(f"spec root must be a mapping, got {type(data).__name__}")
    _check_keys("spec", data, _dataclass_fields(ScenarioSpec))
    kwargs = dict(data)
    for key in ("frames_per_stream", "text_length", "velocity_range",
                "wrong_prob_range", "quality_profile"):
        if key in kwargs and isinstance(kwargs[key], list):
            kwargs[key] = tuple(kwargs[key])
    defaults = ScenarioSpec(n_streams=1, frames_per_stream=(1, 1), seed=0)
    for key in ("recognizer_error", "embedding_noise", "quality_scale",
                "feature_noise", "prob_noise"):
        if key in kwargs:
            merged = dict(getattr(defaults, key))
            merged.update(kwargs[key])
            kwargs[key] = merged
    return ScenarioSpec(**kwargs)


def load_spec(path) -> ScenarioSpec:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigError("scenario spec file must contain a mapping")
    return spec_from_dict(data)


def load_transform_params(path) -> TransformParams:
    """Transform parameters from JSON; shapes validated on construction."""
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    allowed = ("weight", "bias", "bn_scale", "bn_shift", "bn_mean", "bn_var", "bn_epsilon")
    _check_keys("transform", data, allowed)
    missing = [k for k in allowed[:-1] if k not in data]
    if missing:
        raise ConfigError(f"transform file missing keys: {missing}")
    return TransformParams(
        weight=np.asarray(data["weight"], dtype=np.float64),
        bias=np.asarray(data["bias"], dtype=np.float64),
        bn_scale=np.asarray(data["bn_scale"], dtype=np.float64),
        bn_shift=np.asarray(data["bn_shift"], dtype=np.float64),
        bn_mean=np.asarray(data["bn_mean"], dtype=np.float64),
        bn_var=np.asarray(data["bn_var"], dtype=np.float64),
        bn_epsilon=float(data.get("bn_epsilon", 1e-5)),
    )
