"""Config loading: JSON overrides applied onto the dataclass defaults.

Overrides mirror the dataclass nesting, e.g.
{"dt": 0.01, "shield": {"enabled": false}, "ranges": {"width": [6, 10]}}.
Unknown keys are rejected rather than ignored so typos surface early.
"""

from __future__ import annotations

import json
import os
from dataclasses import fields, is_dataclass, replace

from .environment import EpisodeConfig
from .errors import ConfigError

CONFIG_ENV_VAR = "OFFTERSIM_CONFIG"


def apply_overrides(obj, overrides: dict):
    """Return a copy of a config dataclass with nested overrides applied."""
    if not is_dataclass(obj):
        raise ConfigError(f"cannot apply overrides to {type(obj).__name__}")
    if not isinstance(overrides, dict):
        raise ConfigError("config overrides must be a JSON object")
    names = {f.name for f in fields(obj)}
    updates = {}
    for key, value in overrides.items():
        if key not in names:
            raise ConfigError(
                f"unknown config key {key!r} for {type(obj).__name__}")
        current = getattr(obj, key)
        if is_dataclass(current) and isinstance(value, dict):
            updates[key] = apply_overrides(current, value)
        elif isinstance(current, tuple) and isinstance(value, (list, tuple)):
            updates[key] = tuple(value)
        else:
            updates[key] = value
    try:
        return replace(obj, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def make_config(overrides: dict | None = None,
                base: EpisodeConfig | None = None) -> EpisodeConfig:
    cfg = base if base is not None else EpisodeConfig()
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    cfg.validate()
    return cfg


def load_config_file(path) -> EpisodeConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    return make_config(data)


def config_from_environment() -> EpisodeConfig:
    """Default config, overridden by the file named in OFFTERSIM_CONFIG."""
    path = os.environ.get(CONFIG_ENV_VAR)
    if not path:
        return EpisodeConfig()
    return load_config_file(path)
