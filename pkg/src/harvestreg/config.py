"""TOML run configuration: flat model keys plus ``[grid]`` and ``[mc]`` sections."""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import MODEL_KEYS, ModelParams, ModelValidationError, params_from_mapping

GRID_KEYS = ("n_space", "n_time", "y_pad")
MC_KEYS = ("n_paths", "seed", "n_steps")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridConfig:
    n_space: int = 2000
    n_time: int = 5000
    y_pad: float = 1.0


@dataclass(frozen=True)
class MCConfig:
    n_paths: int = 1000
    seed: int = 0
    n_steps: int | None = None


@dataclass
class RunConfig:
    model: dict[str, Any] = field(default_factory=dict)
    grid: GridConfig = field(default_factory=GridConfig)
    mc: MCConfig = field(default_factory=MCConfig)

    def params(self) -> ModelParams:
        return params_from_mapping(self.model)

    def fingerprint(self) -> str:
        """Short hash of the canonical JSON form of the whole configuration."""
        blob = json.dumps({"model": self.model, "grid": asdict(self.grid), "mc": asdict(self.mc)},
                          sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def as_dict(self) -> dict:
        return {"model": dict(sorted(self.model.items())), "grid": asdict(self.grid), "mc": asdict(self.mc)}


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _section(raw: dict, name: str, keys: tuple, cls):
    sec = raw.pop(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = sorted(set(sec) - set(keys))
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {', '.join(unknown)}")
    try:
        return cls(**sec)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_from_dict(raw: dict) -> RunConfig:
    raw = dict(raw)
    grid = _section(raw, "grid", GRID_KEYS, GridConfig)
    mc = _section(raw, "mc", MC_KEYS, MCConfig)
    model = _flatten(raw)
    unknown = sorted(set(model) - set(MODEL_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = RunConfig(model, grid, mc)
    try:
        cfg.params()
    except ModelValidationError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return config_from_dict({})
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw)
