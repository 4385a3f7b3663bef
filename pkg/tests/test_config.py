import json

import numpy as np
import pytest

from qdcavity import config
from qdcavity.errors import ConfigError
from qdcavity.params import TWO_PI, preset


def _doc(**scenario):
    return {"params": {"preset": "symmetric", "rabi_ratio": 0.1}, "scenario": {"kind": "g2", **scenario}}


def test_defaults_filled():
    doc = config.validate(_doc())
    assert doc["scenario"]["tau_max"] == 1.0
    assert doc["numerics"] == {"n_max": None, "tail_tol": 1e-10, "seed": 0}
    assert doc["output"]["formats"] == ["csv"]


@pytest.mark.parametrize("mutate, where", [
    (lambda d: d.update(extra=1), "<root>"),
    (lambda d: d["params"].update(colour="red"), "params"),
    (lambda d: d["scenario"].update(tau_maxx=1.0), "scenario"),
    (lambda d: d["scenario"].update(tau_max=-1.0), "scenario/tau_max"),
    (lambda d: d["params"].update(a_in=1.0), "params"),
    (lambda d: d["params"].update(preset="nope"), "params/preset"),
    (lambda d: d["scenario"].update(field="SL"), "scenario"),
    (lambda d: d["scenario"].update(field="filtered"), "scenario"),
    (lambda d: d.pop("scenario"), "<root>"),
])
def test_rejections_name_the_path(mutate, where):
    doc = _doc()
    mutate(doc)
    with pytest.raises(ConfigError, match=where):
        config.validate(doc)


def test_custom_params_need_rates():
    with pytest.raises(ConfigError, match="required"):
        config.validate({"params": {"g": 1.0}, "scenario": {"kind": "g2"}})


def test_params_in_ghz():
    doc = config.validate({"params": {"preset": "symmetric", "g": 5.0, "a_in": 0.2},
                           "scenario": {"kind": "g2"}})
    p = config.build_params(doc)
    assert p.g == pytest.approx(TWO_PI * 5.0)
    assert p.a_in == 0.2
    assert p.kappa1 == preset("symmetric").kappa1


def test_rabi_ratio_drive():
    p = config.build_params(config.validate(_doc()))
    assert p.rabi_ratio == pytest.approx(0.1)


def test_invalid_physics_is_config_error():
    with pytest.raises(ConfigError):
        config.validate({"params": {"preset": "symmetric", "kappa1": -3.0}, "scenario": {"kind": "g2"}})


def test_sweep_requires_grid():
    with pytest.raises(ConfigError, match="grid"):
        config.validate({"params": {"preset": "symmetric"}, "scenario": {"kind": "sweep", "sweep": "lo"}})


def test_grid_values():
    np.testing.assert_allclose(config.grid_values({"start": 0, "stop": 1, "num": 3}), [0, 0.5, 1])
    np.testing.assert_allclose(config.grid_values({"start": 1, "stop": 100, "num": 3, "spacing": "log"}),
                               [1, 10, 100])
    with pytest.raises(ConfigError):
        config.grid_values({"start": 0, "stop": 1, "num": 3, "spacing": "log"})


def test_load_json_and_yaml(tmp_path):
    (tmp_path / "a.json").write_text(json.dumps(_doc()))
    (tmp_path / "b.yaml").write_text(
        "params:\n  preset: symmetric\n  rabi_ratio: 0.1\nscenario:\n  kind: g2\n")
    assert config.load(tmp_path / "a.json") == config.load(tmp_path / "b.yaml")
    (tmp_path / "c.json").write_text("{")
    with pytest.raises(ConfigError, match="cannot parse"):
        config.load(tmp_path / "c.json")
    with pytest.raises(ConfigError, match="cannot read"):
        config.load(tmp_path / "missing.json")
    (tmp_path / "d.yaml").write_text("- 1\n")
    with pytest.raises(ConfigError, match="mapping"):
        config.load(tmp_path / "d.yaml")
