import math

import numpy as np
import pytest

from qdd.config import (DEFAULTS, DOC, RunConfig, dump_config, load_experiments, load_profiles,
                        make_profile, parse_sigma, preset_config_text, tomllib)
from qdd.errors import ConfigError
from qdd.grid import build_grid, integrate


@pytest.mark.parametrize("text,val", [("16pi", 16 * math.pi), ("-4*pi", -4 * math.pi),
                                      ("pi", math.pi), ("2.5", 2.5), (3, 3.0),
                                      (" 8 pi ", 8 * math.pi), ("1e1pi", 10 * math.pi)])
def test_parse_sigma(text, val):
    assert parse_sigma(text) == pytest.approx(val)


@pytest.mark.parametrize("bad", ["pie", "16 tau", True, None])
def test_parse_sigma_rejects(bad):
    with pytest.raises(ConfigError):
        parse_sigma(bad)


def test_defaults_valid_and_documented():
    cfg = RunConfig.from_dict({})
    assert cfg.grid().N == DEFAULTS["grid"]["N"]
    keys = {k for k, v in DEFAULTS.items() if not isinstance(v, dict)}
    keys |= {f"{s}.{k}" for s, v in DEFAULTS.items() if isinstance(v, dict) for k in v}
    assert keys == set(DOC)


def test_dump_roundtrip():
    text = dump_config(DEFAULTS)
    assert RunConfig.from_dict(tomllib.loads(text)).raw == DEFAULTS


@pytest.mark.parametrize("data,field", [
    ({"model": {"eps": 0.0}}, "model.eps"),
    ({"model": {"eps": -1}}, "model.eps"),
    ({"model": {"sigma": "lots"}}, "model.sigma"),
    ({"model": {"doping": "p-type"}}, "model.doping"),
    ({"grid": {"d": 2}}, "grid"),
    ({"initial": {"profile": "nope"}}, "initial.profile"),
    ({"scheme": {"tau": 0}}, "scheme.tau"),
    ({"scheme": {"method": "rk4"}}, "scheme"),
    ({"io": {"snapshot_every": -1}}, "io.snapshot_every"),
    ({"modle": {}}, "modle"),
    ({"model": {"epsilon": 0.1}}, "model.epsilon"),
])
def test_validation_names_field(data, field):
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        RunConfig.from_dict(data)


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[model\n")
    with pytest.raises(ConfigError):
        RunConfig.load(bad)


def test_shipped_preset_loads(tmp_path):
    p = tmp_path / "dlss.toml"
    p.write_text(preset_config_text())
    cfg = RunConfig.load(p)
    assert cfg.params().sigma == 0.0 and cfg.grid().d == 1


def test_sigma_string_in_config():
    cfg = RunConfig.from_dict({"model": {"sigma": "16pi"},
                               "grid": {"d": 2, "geometry": "radial"}})
    assert cfg.params().sigma == pytest.approx(16 * math.pi)


def test_uniform_doping():
    cfg = RunConfig.from_dict({"model": {"doping": "uniform"}})
    g = cfg.grid()
    assert integrate(g, cfg.params(g).doping) == pytest.approx(1.0)


@pytest.mark.parametrize("pid", sorted(load_profiles()))
@pytest.mark.parametrize("d", [1, 2, 3])
def test_profiles_unit_mass(pid, d):
    g = build_grid(d, "slab" if d == 1 else "radial", 101)
    st = make_profile(g, pid)
    assert st.mass() == pytest.approx(1.0, rel=1e-12)
    assert st.n.min() >= 0


def test_unknown_profile():
    with pytest.raises(ConfigError):
        make_profile(build_grid(1, "slab", 11), "spiky")


def test_experiments_shipped():
    exps = load_experiments()
    assert {"dichotomy-8pi", "regularization"} <= set(exps)
    assert exps["regularization"]["expected"] == ["BlowupDetected", "Completed"]
