"""Versioned YAML run configuration with dotted ``key=value`` overrides."""

from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import yaml

from .denoiser import DenoiserConfig
from .diffusion import GuidanceScales
from .errors import InvalidConfigError
from .retrieval import EmbedderConfig
from .training import TrainConfig

CONFIG_VERSION = 1


@dataclass
class TrainSection:
    batch_size: int = 32
    lr: float = 1e-3
    weight_decay: float = 0.0
    grad_clip: float = 1.0
    max_minutes: float = None


@dataclass
class DataSection:
    n_triplets: int = 2000
    split_seed: int = 0


@dataclass
class EvalSection:
    gallery_size: int = 32
    seed: int = 0


@dataclass
class GuidanceSection:
    text: float = 2.0
    source: float = 2.0


@dataclass
class RunConfig:
    version: int = CONFIG_VERSION
    seed: int = 0
    fps: float = 20.0
    steps: int = 300
    epochs: int = 1000
    guidance: GuidanceSection = field(default_factory=GuidanceSection)
    denoiser: DenoiserConfig = field(default_factory=DenoiserConfig)
    train: TrainSection = field(default_factory=TrainSection)
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    data: DataSection = field(default_factory=DataSection)
    eval: EvalSection = field(default_factory=EvalSection)

    @property
    def scales(self):
        return GuidanceScales(self.guidance.text, self.guidance.source)

    def train_config(self, seed=None):
        t = self.train
        return TrainConfig(self.epochs, t.batch_size, t.lr, t.weight_decay, t.grad_clip,
                           self.seed if seed is None else seed, t.max_minutes)

    def to_dict(self):
        return asdict(self)


_SECTIONS = {"guidance": GuidanceSection, "denoiser": DenoiserConfig, "train": TrainSection,
             "embedder": EmbedderConfig, "data": DataSection, "eval": EvalSection}
_SCALARS = {f.name for f in fields(RunConfig)} - set(_SECTIONS)


def _build(cls, values, where):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise InvalidConfigError(f"unknown config keys in {where or 'top level'}: {', '.join(unknown)}")
    return cls(**values)


def merge(base, update):
    out = dict(base)
    for k, v in update.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def parse_override(item):
    """'guidance.text=3' -> {'guidance': {'text': 3.0}} (value parsed as YAML)."""
    if "=" not in item:
        raise InvalidConfigError(f"override {item!r} is not key=value")
    key, raw = item.split("=", 1)
    value = yaml.safe_load(raw)
    node = value
    for part in reversed(key.strip().split(".")):
        node = {part: node}
    return node


def from_dict(d):
    version = d.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise InvalidConfigError(f"unsupported config version {version}")
    kwargs = {}
    for k, v in d.items():
        if k in _SECTIONS:
            if not isinstance(v, dict):
                raise InvalidConfigError(f"config section {k!r} must be a mapping")
            kwargs[k] = _build(_SECTIONS[k], v, k)
        elif k in _SCALARS:
            kwargs[k] = v
        else:
            raise InvalidConfigError(f"unknown config key {k!r}")
    return RunConfig(**kwargs)


def _read(path):
    if path is None:
        return {}
    text = Path(path).read_text() if Path(path).exists() else _bundled(path)
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise InvalidConfigError(f"{path}: config must be a mapping")
    return data


def _bundled(name):
    res = resources.files("motionedit.data").joinpath(f"{name}_config.yaml")
    if not res.is_file():
        raise InvalidConfigError(f"config file {name!r} not found")
    return res.read_text()


def load_config(path=None, overrides=()):
    """Default config, then ``path`` (a file or a bundled profile name such as 'toy'), then overrides."""
    data = yaml.safe_load(_bundled("default"))
    data = merge(data, _read(path))
    for item in overrides:
        data = merge(data, parse_override(item))
    return from_dict(data)


def dump_config(cfg):
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)
