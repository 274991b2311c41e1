"""File-backed run configuration (TOML or JSON) with strict key checking."""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .cascade import MODES, PipelineConfig
from .core import METADATA_FIELDS, ValidationPolicy
from .corpusgen import CorpusSpec
from .errors import ConfigError
from .evalkit import EvalConfig
from .ingest import IngestOptions
from .lattice import LatticeOptions
from .llm import LlmConfig
from .meta import MetaPatternSet
from .stream import StreamOptions

TYPED_SECTIONS = {
    "llm": LlmConfig,
    "lattice": LatticeOptions,
    "stream": StreamOptions,
    "ingest": IngestOptions,
    "policy": ValidationPolicy,
    "eval": EvalConfig,
    "corpus": CorpusSpec,
}
PLAIN_SECTIONS = {
    "pipeline": ("mode", "workers"),
    "paths": ("in", "out", "gt", "pred"),
    "patterns": METADATA_FIELDS,
}


def load_config(path: str | Path) -> dict[str, dict[str, Any]]:
    """Read and key-check a config file; the format follows the extension."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".toml":
            data = tomllib.loads(raw.decode("utf-8"))
        elif path.suffix.lower() == ".json":
            data = json.loads(raw)
        else:
            raise ConfigError(f"{path}: expected a .toml or .json file")
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    check_keys(data)
    return data


def check_keys(data: Any) -> None:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table")
    for section, values in data.items():
        if section in TYPED_SECTIONS:
            allowed = {f.name for f in dataclasses.fields(TYPED_SECTIONS[section])}
        elif section in PLAIN_SECTIONS:
            allowed = set(PLAIN_SECTIONS[section])
        else:
            raise ConfigError(f"unknown config key {section!r}")
        if not isinstance(values, dict):
            raise ConfigError(f"config key {section!r} must be a table")
        for key in values:
            if key not in allowed:
                raise ConfigError(f"unknown config key {section}.{key}")


def build(cls, values: dict[str, Any] | None, **overrides):
    """Instantiate a config dataclass from file values plus non-None overrides."""
    merged = dict(values or {})
    merged.update({k: v for k, v in overrides.items() if v is not None})
    for f in dataclasses.fields(cls):
        if isinstance(merged.get(f.name), list):
            merged[f.name] = tuple(merged[f.name])
    try:
        return cls(**merged)
    except (TypeError, ValueError, ConfigError) as exc:
        raise ConfigError(f"invalid {cls.__name__}: {exc}") from exc


def pipeline_config(data: dict, mode: str | None = None, **llm_overrides) -> PipelineConfig:
    mode = mode or data.get("pipeline", {}).get("mode", "cascade")
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}")
    patterns = data.get("patterns")
    return PipelineConfig(
        mode=mode,
        llm=build(LlmConfig, data.get("llm"), **llm_overrides),
        lattice=build(LatticeOptions, data.get("lattice")),
        stream=build(StreamOptions, data.get("stream")),
        patterns=MetaPatternSet.from_mapping(patterns) if patterns else MetaPatternSet(),
        policy=build(ValidationPolicy, data.get("policy")),
        ingest=build(IngestOptions, data.get("ingest")),
    )
