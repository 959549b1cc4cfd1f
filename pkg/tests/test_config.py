import json

import pytest

from cmctorus.config import RunConfig
from cmctorus.exceptions import ConfigError


def test_defaults_need_a_neck_size():
    with pytest.raises(ConfigError):
        RunConfig().validate()
    config = RunConfig(a=0.1, n=32).validate()
    assert config.n_t == 512 and config.n_theta == 32
    assert config.curvature().A == -1.0


@pytest.mark.parametrize("overrides", [
    {"a": 0.1, "gamma": 2.0},
    {"a": 0.1, "n_theta": 24},
    {"a": 0.1, "n_t": 101},
    {"a": 0.6},
    {"a": 0.1, "auto_match": True, "n": 32},
    {"auto_match": True},
    {"a": 0.1, "n": 32, "eps": 0.1},
    {"a": 0.1, "anderson_depth": 4},
    {"a": 0.1, "mesh_format": "stl"},
    {"a": 0.1, "mu": 2.5},
])
def test_invalid_settings(overrides):
    with pytest.raises(ConfigError):
        RunConfig(**overrides).validate()


def test_json_round_trip(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"a": 0.2, "n": 64, "A": -0.5, "gamma": 0.8}))
    config = RunConfig.from_json(str(path)).validate()
    assert config.A == -0.5 and config.n == 64
    assert RunConfig.from_dict(config.to_dict()) == config


def test_unknown_keys_and_bad_files(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"a": 0.2, "neck": 0.3})
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        RunConfig.from_json(str(bad))
    with pytest.raises(ConfigError):
        RunConfig.from_json(str(tmp_path / "missing.json"))


def test_overrides_skip_none():
    config = RunConfig(a=0.2, n=64).with_overrides(a=None, n_t=256, tol_fp=None)
    assert config.a == 0.2 and config.n_t == 256 and config.tol_fp == 1e-10


def test_derived_options():
    config = RunConfig(a=0.2, n=64, tol_fp=1e-8, anderson_depth=2, mu=1.2, tol_match=1e-7)
    fp = config.fixed_point_options()
    assert fp.tol == 1e-8 and fp.anderson_depth == 2 and fp.norm.mu == 1.2
    match = config.match_options()
    assert match.tol_match == 1e-7 and match.fixed_point.tol == 1e-8
