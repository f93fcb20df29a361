"""Experiment configuration: defaults, YAML loading and validation."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .baselines import AcoConfig
from .cloud import DI_MODES, InfraConfig, WorkloadConfig
from .fuzzy import FuzzyConfig, FuzzyConfigError
from .hybrid_ga import GaConfig

SCHEDULERS = ("hybrid", "aco", "maco", "round_robin", "random", "greedy")
OUTPUT_DIR_ENV = "HYBRIDSCHED_OUTPUT_DIR"


class ConfigFileError(ValueError):
    pass


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_DIR_ENV, "results")


@dataclass(frozen=True)
class ExperimentConfig:
    job_counts: tuple[int, ...] = tuple(range(100, 1001, 100))
    replications: int = 10
    master_seed: int = 2014
    schedulers: tuple[str, ...] = SCHEDULERS
    di_mode: str = "paper"
    output_dir: str = field(default_factory=default_output_dir)
    workers: int = 1
    record_timing: bool = False
    infrastructure: InfraConfig = InfraConfig()
    workload: WorkloadConfig = WorkloadConfig()
    ga: GaConfig = GaConfig()
    aco: AcoConfig = AcoConfig()
    fuzzy: FuzzyConfig = FuzzyConfig()

    def __post_init__(self) -> None:
        counts = list(self.job_counts)
        if not counts:
            raise ConfigFileError("job_counts: must not be empty")
        if any(c < 1 for c in counts) or counts != sorted(set(counts)):
            raise ConfigFileError(f"job_counts: must be positive and strictly ascending, got {counts}")
        if self.replications < 1:
            raise ConfigFileError(f"replications: must be >= 1, got {self.replications}")
        unknown = [s for s in self.schedulers if s not in SCHEDULERS]
        if unknown or not self.schedulers:
            raise ConfigFileError(f"schedulers: unknown {unknown}; choose from {list(SCHEDULERS)}")
        if self.di_mode not in DI_MODES:
            raise ConfigFileError(f"di_mode: must be one of {list(DI_MODES)}, got {self.di_mode!r}")
        if self.workers < 1:
            raise ConfigFileError(f"workers: must be >= 1, got {self.workers}")


_SECTIONS = {"infrastructure": InfraConfig, "workload": WorkloadConfig, "ga": GaConfig, "aco": AcoConfig}
_TOP_LEVEL = {"experiment", "fuzzy", *_SECTIONS}


def _coerce(value: Any, template: Any, where: str, fixed_len: bool = False) -> Any:
    try:
        if isinstance(template, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(template, tuple):
            if not isinstance(value, (list, tuple)):
                raise TypeError
            if fixed_len and len(value) != len(template):
                raise TypeError
            inner = template[0] if template else value[0]
            return tuple(type(inner)(v) for v in value)
        if isinstance(template, int) and isinstance(value, float) and not value.is_integer():
            raise TypeError
        return type(template)(value)
    except (TypeError, ValueError, IndexError):
        raise ConfigFileError(f"{where}: cannot use {value!r} (expected something like {template!r})") from None


def _build(cls, data: Mapping | None, where: str, base=None):
    base = base if base is not None else cls()
    data = dict(data or {})
    names = {f.name for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigFileError(f"{where}: unknown field(s) {unknown}")
    # tuple[float, float] style annotations are fixed-size; tuple[int, ...] are not
    fixed = {f.name: "..." not in str(f.type) for f in dataclasses.fields(cls)}
    changes = {k: _coerce(v, getattr(base, k), f"{where}.{k}", fixed[k]) for k, v in data.items()}
    try:
        return dataclasses.replace(base, **changes)
    except ConfigFileError:
        raise
    except ValueError as exc:
        raise ConfigFileError(f"{where}: {exc}") from None


def config_from_dict(data: Mapping | None) -> ExperimentConfig:
    data = dict(data or {})
    unknown = sorted(set(data) - _TOP_LEVEL)
    if unknown:
        raise ConfigFileError(f"unknown top-level section(s) {unknown}")
    sections = {name: _build(cls, data.get(name), name) for name, cls in _SECTIONS.items()}
    try:
        sections["fuzzy"] = FuzzyConfig.from_dict(data.get("fuzzy"))
        if data.get("fuzzy"):
            # Build once so malformed breakpoints fail at load time.
            from .fuzzy import SuitabilityModel

            SuitabilityModel(sections["fuzzy"])
    except (FuzzyConfigError, TypeError, ValueError) as exc:
        raise ConfigFileError(f"fuzzy: {exc}") from None
    nested = sorted(set(data.get("experiment") or {}) & (_TOP_LEVEL - {"experiment"}))
    if nested:
        raise ConfigFileError(f"experiment: unknown field(s) {nested}")
    base = ExperimentConfig(**sections)
    return _build(ExperimentConfig, data.get("experiment"), "experiment", base)


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Load a YAML config; ``None`` or ``"default"`` gives the built-in defaults."""
    if path is None or str(path) == "default":
        return ExperimentConfig()
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigFileError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigFileError(f"{path}: not valid YAML: {exc}") from None
    if data is not None and not isinstance(data, Mapping):
        raise ConfigFileError(f"{path}: top level must be a mapping")
    return config_from_dict(data)


def apply_overrides(cfg: ExperimentConfig, **overrides) -> ExperimentConfig:
    changes = {k: v for k, v in overrides.items() if v is not None}
    if not changes:
        return cfg
    return _build(ExperimentConfig, changes, "override", cfg)
