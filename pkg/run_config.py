"""
Run configuration: INI sections mapped onto the modules' config dataclasses.

    [data] [vqvae] [scheduler] [diffusion] [sampling] [metrics] [runtime]

Values come from a ``ConfigProvider`` and are overridden by
``section.key=value`` strings from the command line.
"""

import configparser
import logging
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, fields
from typing import Dict, Mapping, Optional, Sequence, Union, get_args, get_origin

from diffusion_engine import SampleConfig, TrainConfig
from metrics_eval import MetricConfig
from molecular_graph import get_vocabulary
from noise_scheduler import SchedulerConfig
from pipeline_errors import InputDomainError, UsageError
from vq_tokenizer import VQConfig

logger = logging.getLogger(__name__)

PROPERTY_SOURCES = ("none", "heteroatom_fraction")


class ConfigProvider(ABC):
    """Abstract base class for configuration providers."""

    @abstractmethod
    def get_config(self) -> configparser.ConfigParser:
        """Get the configuration."""
        pass


class FileConfigProvider(ConfigProvider):
    """Configuration provider that loads from an INI file."""

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize the file config provider.

        Args:
            config_path: Path to the config file. If None, uses config.ini
                next to this module.
        """
        self.config_path = config_path or os.path.join(os.path.dirname(__file__), "config.ini")

    def get_config(self) -> configparser.ConfigParser:
        """
        Load configuration from the file.

        Raises:
            FileNotFoundError: If the config file doesn't exist.
        """
        config = configparser.ConfigParser()
        if not os.path.exists(self.config_path):
            raise FileNotFoundError(f"Config file not found at {self.config_path}")
        config.read(self.config_path)
        return config


class DictConfigProvider(ConfigProvider):
    """In-memory configuration, mostly for tests and scripted runs."""

    def __init__(self, sections: Optional[Mapping[str, Mapping[str, object]]] = None):
        self.sections = sections or {}

    def get_config(self) -> configparser.ConfigParser:
        config = configparser.ConfigParser()
        config.read_dict({s: {k: str(v) for k, v in kv.items()} for s, kv in self.sections.items()})
        return config


@dataclass
class DataConfig:
    """Dataset location and ingestion settings ([data] section)."""

    vocabulary: str = "qm9"
    source: str = "data/qm9_toy.smi"
    dataset: str = "runs/toy/dataset.jsonl"
    property: str = "heteroatom_fraction"
    output_dir: str = "runs/toy"

    def __post_init__(self):
        get_vocabulary(self.vocabulary)
        if self.property not in PROPERTY_SOURCES:
            raise InputDomainError(f"property must be one of {PROPERTY_SOURCES}, got {self.property!r}")


@dataclass
class RuntimeConfig:
    """Process-wide settings ([runtime] section)."""

    seed: int = 0
    log_level: str = "INFO"

    def __post_init__(self):
        if self.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR"):
            raise InputDomainError(f"unknown log level {self.log_level!r}")


SECTIONS = {
    "data": DataConfig,
    "vqvae": VQConfig,
    "scheduler": SchedulerConfig,
    "diffusion": TrainConfig,
    "sampling": SampleConfig,
    "metrics": MetricConfig,
    "runtime": RuntimeConfig,
}

# set by the command or by [runtime], not by keys
_RESERVED = {"diffusion": {"mode", "seed"}, "sampling": {"seed"}}


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    vqvae: VQConfig = field(default_factory=VQConfig)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    diffusion: TrainConfig = field(default_factory=TrainConfig)
    sampling: SampleConfig = field(default_factory=SampleConfig)
    metrics: MetricConfig = field(default_factory=MetricConfig)
    runtime: RuntimeConfig = field(default_factory=RuntimeConfig)


def valid_keys(section: str) -> Sequence[str]:
    reserved = _RESERVED.get(section, set())
    return [f.name for f in fields(SECTIONS[section]) if f.name not in reserved]


def _coerce(raw: str, annotation, where: str):
    if get_origin(annotation) is Union:
        if raw.strip().lower() in ("", "none", "null"):
            return None
        annotation = next(a for a in get_args(annotation) if a is not type(None))
    text = raw.strip()
    try:
        if annotation is bool:
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if annotation is int:
            return int(text)
        if annotation is float:
            return float(text)
    except ValueError:
        raise UsageError(f"{where}: cannot read {text!r} as {annotation.__name__}") from None
    return text


def _check_key(section: str, key: str) -> None:
    if section not in SECTIONS:
        raise UsageError(f"unknown config section [{section}]; valid sections: {', '.join(SECTIONS)}")
    if key not in valid_keys(section):
        raise UsageError(
            f"unknown config key {section}.{key}; valid keys: {', '.join(valid_keys(section))}"
        )


def parse_override(text: str):
    """Split ``section.key=value``."""
    name, sep, value = text.partition("=")
    section, dot, key = name.strip().partition(".")
    if not sep or not dot or not key:
        raise UsageError(f"override {text!r} must look like section.key=value")
    _check_key(section, key)
    return section, key, value


def load_run_config(
    provider: Optional[ConfigProvider] = None,
    overrides: Sequence[str] = (),
    mode: Optional[str] = None,
) -> RunConfig:
    """
    Build a validated ``RunConfig``; overrides win over provider values.

    Raises:
        UsageError: On unknown sections or keys, unreadable values or a
            value a module rejects.
    """
    raw: Dict[str, Dict[str, str]] = {name: {} for name in SECTIONS}
    if provider is not None:
        parser = provider.get_config()
        for section in parser.sections():
            for key, value in parser.items(section, raw=True):
                _check_key(section, key)
                raw[section][key] = value
    for text in overrides:
        section, key, value = parse_override(text)
        raw[section][key] = value

    built = {}
    seed = RuntimeConfig.seed
    if "seed" in raw["runtime"]:
        seed = _coerce(raw["runtime"]["seed"], int, "runtime.seed")
    for section, cls in SECTIONS.items():
        kwargs = {}
        types = {f.name: f.type for f in fields(cls)}
        for key, value in raw[section].items():
            kwargs[key] = _coerce(value, types[key], f"{section}.{key}")
        if section in ("diffusion", "sampling"):
            kwargs["seed"] = seed
        if section == "diffusion" and mode is not None:
            kwargs["mode"] = mode
        try:
            built[section] = cls(**kwargs)
        except InputDomainError as e:
            raise UsageError(f"[{section}] {e}") from None
    return RunConfig(**built)
