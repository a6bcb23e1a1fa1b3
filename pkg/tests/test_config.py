import copy
import json

import pytest

from moyal_scatter.config import ConfigError, bundled_config_path, load_config, validate


@pytest.fixture
def raw():
    return json.loads(bundled_config_path("moyal-2d").read_text())


@pytest.mark.parametrize("name", ["moyal-2d", "commutative-1d", "moyal-2d.json"])
def test_bundled_configs_validate(name):
    cfg = load_config(bundled_config_path(name))
    assert cfg.dim in (1, 2)
    assert cfg["scattering"]["refinements"]
    assert cfg["fock"]["kappa"] == 2


def test_defaults_filled_without_touching_raw(raw):
    for section in ("star", "scattering", "bogoliubov", "lm"):
        raw.pop(section, None)
    del raw["potential"]["b"]["center"]
    cfg = validate(raw)
    assert cfg["star"]["points_per_dim"] == 64
    assert cfg["scattering"]["refinements"] == [16, 24, 32]
    assert cfg["scattering"]["kinds"] == ["Vi", "Vii"]
    assert cfg["potential"]["b"]["center"] == [0.0, 0.0]
    assert "star" not in cfg.raw and "center" not in cfg.raw["potential"]["b"]


def test_commutative_default_refinements():
    raw = json.loads(bundled_config_path("commutative-1d").read_text())
    del raw["scattering"]["refinements"]
    assert validate(raw)["scattering"]["refinements"] == [128, 192, 256]


def mutate(raw, path, value):
    out = copy.deepcopy(raw)
    node = out
    for key in path[:-1]:
        node = node[key]
    if value is KeyError:
        del node[path[-1]]
    else:
        node[path[-1]] = value
    return out


@pytest.mark.parametrize(
    "path,value,where",
    [
        (("model", "p"), 1, "$.model.p"),
        (("model", "mass"), 0.0, "$.model.mass"),
        (("grid", "points_per_dim"), 9, "$.grid.points_per_dim"),
        (("potential", "kind"), "V3", "$.potential.kind"),
        (("integrator", "method"), "euler", "$.integrator.method"),
        (("fock", "num_modes"), 14, "$.fock.num_modes"),
        (("model", "theta"), 0.0, "$.model.theta"),
        (("model", "q"), 2, "$.model"),
        (("potential", "b", "center"), [0.0], "$.potential.b.center"),
        (("seed",), KeyError, "$.seed"),
        (("integrator", "dt"), KeyError, "$.integrator.dt"),
        (("bogus",), 1, "$"),
    ],
)
def test_schema_errors_are_path_qualified(raw, path, value, where):
    with pytest.raises(ConfigError) as info:
        validate(mutate(raw, path, value))
    assert info.value.path == where


def test_invalid_json(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{\"model\": ")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config(bad)
    with pytest.raises(OSError):
        load_config(tmp_path / "missing.json")


def test_unknown_bundled_name():
    with pytest.raises(FileNotFoundError):
        bundled_config_path("nope")
