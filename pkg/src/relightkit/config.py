"""Pipeline configuration: TOML or JSON, strict about unknown keys."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .dataset import DatasetConfig, VariationRanges
from .dpo import DpoConfig

try:
    import tomllib
except ModuleNotFoundError:                      # Python 3.10
    import tomli as tomllib


@dataclass
class MaskConfig:
    alpha: float = 0.7
    sigmas: tuple = (1.0, 2.0, 4.0)
    gamma: float = 1.0
    hidden: int = 16
    lr: float = 0.5
    iterations: int = 200
    max_train_pixels: int = 200_000

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha {self.alpha} outside [0,1]")
        if self.gamma < 0.0:
            raise ValueError(f"gamma {self.gamma} must be nonnegative")


@dataclass
class ProxyConfig:
    lambda_albedo: float = 1.0
    lambda_normal: float = 1.0
    lambda_roughness: float = 0.5
    lambda_metallic: float = 0.5
    hidden: int = 24
    lr: float = 0.2
    iterations: int = 300

    def lam(self):
        return (self.lambda_albedo, self.lambda_normal,
                self.lambda_roughness, self.lambda_metallic)


@dataclass
class RelightConfig:
    intrinsics: str = "gbuffer"      # "gbuffer" | "proxy"
    mode: str = "geometric"          # "geometric" | "local"

    def __post_init__(self):
        if self.intrinsics not in ("gbuffer", "proxy"):
            raise ValueError(f"unknown intrinsics source {self.intrinsics!r}")
        if self.mode not in ("geometric", "local"):
            raise ValueError(f"unknown relight mode {self.mode!r}")


@dataclass
class EvalConfig:
    exposure: float = 1.0


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8000
    exposure: float = 1.0
    max_scenes: int = 16


@dataclass
class PipelineConfig:
    seed: int = 0
    pairs_per_view: int = 2
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    mask: MaskConfig = field(default_factory=MaskConfig)
    proxy: ProxyConfig = field(default_factory=ProxyConfig)
    dpo: DpoConfig = field(default_factory=DpoConfig)
    relight: RelightConfig = field(default_factory=RelightConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)

    def __post_init__(self):
        # one top-level seed drives every stage
        self.dataset.seed = self.seed


_NESTED = {
    PipelineConfig: {"dataset": DatasetConfig, "mask": MaskConfig,
                     "proxy": ProxyConfig, "dpo": DpoConfig,
                     "relight": RelightConfig, "eval": EvalConfig,
                     "service": ServiceConfig},
    DatasetConfig: {"ranges": VariationRanges},
}


def _build(cls, data: dict, path: str):
    names = {f.name for f in dataclasses.fields(cls)}
    nested = _NESTED.get(cls, {})
    kwargs = {}
    for key, value in data.items():
        if key not in names:
            raise ValueError(f"unknown config key {path}{key}")
        if key in nested:
            if not isinstance(value, dict):
                raise ValueError(f"config key {path}{key} must be a table/object")
            kwargs[key] = _build(nested[key], value, f"{path}{key}.")
        else:
            if isinstance(value, list):
                value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
            kwargs[key] = value
    return cls(**kwargs)


def load_config(path) -> PipelineConfig:
    with open(path, "rb") as f:
        text = f.read()
    if str(path).endswith(".toml"):
        data = tomllib.loads(text.decode("utf-8"))
    else:
        data = json.loads(text.decode("utf-8"))
    return _build(PipelineConfig, data, "")


def default_config() -> PipelineConfig:
    return PipelineConfig()
