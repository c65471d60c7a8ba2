import json

import pytest

from offtersim.config import (
    CONFIG_ENV_VAR,
    apply_overrides,
    config_from_environment,
    load_config_file,
    make_config,
)
from offtersim.environment import EpisodeConfig
from offtersim.errors import ConfigError


def test_nested_overrides():
    cfg = make_config({"dt": 0.01, "shield": {"enabled": False, "lam": 2.0},
                       "ranges": {"width": [6, 10]},
                       "rewards": {"progress": 3.0}})
    assert cfg.dt == 0.01
    assert cfg.shield.enabled is False
    assert cfg.shield.lam == 2.0
    assert cfg.ranges.width == (6, 10)
    assert cfg.rewards.progress == 3.0
    # untouched fields keep defaults
    assert cfg.max_steps == 3000
    assert cfg.shield.K_viol == 1e4


def test_unknown_key_rejected():
    with pytest.raises(ConfigError):
        make_config({"dtt": 0.01})
    with pytest.raises(ConfigError):
        make_config({"shield": {"lambda": 2.0}})


def test_invalid_values_become_config_errors():
    with pytest.raises(ConfigError):
        make_config({"shield": {"lam": -1.0}})
    with pytest.raises(ConfigError):
        make_config({"dt": 0.0})
    with pytest.raises(ConfigError):
        make_config({"ranges": {"width": [10, 6]}})


def test_overrides_do_not_mutate_base():
    base = EpisodeConfig()
    make_config({"dt": 0.05}, base=base)
    assert base.dt == 0.02


def test_non_object_overrides():
    with pytest.raises(ConfigError):
        apply_overrides(EpisodeConfig(), ["dt", 0.01])


def test_load_config_file(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"max_steps": 7}))
    assert load_config_file(p).max_steps == 7
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config_file(bad)


def test_config_from_environment(monkeypatch, tmp_path):
    monkeypatch.delenv(CONFIG_ENV_VAR, raising=False)
    assert config_from_environment() == EpisodeConfig()
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"dt": 0.04}))
    monkeypatch.setenv(CONFIG_ENV_VAR, str(p))
    assert config_from_environment().dt == 0.04
