import numpy as np
import pytest

from smcf.config import parse_config, parse_value
from smcf.errors import ConfigError, ParseError, UnknownGenerator, ValidationError
from smcf.experiments import REGISTRY, resolve_jobs, resolve_name
from smcf.generators import generate_initial_data
from smcf.grid import Grid


def test_parse_value():
    assert parse_value("3") == 3
    assert parse_value(" 1e-3 ") == 1e-3
    assert parse_value("True") is True
    assert parse_value("6, 7,8") == [6, 7, 8]
    assert parse_value("'a b'") == "a b"
    assert parse_value("graph_bump") == "graph_bump"


def test_missing_experiment():
    with pytest.raises(ValidationError, match="experiment"):
        parse_config("")
    with pytest.raises(ValidationError, match="registry"):
        parse_config("experiment = teleport")


def test_prefix_picks_up_defaults():
    cfg = parse_config("experiment = circle")
    assert cfg.experiment == "circle_translation"
    assert cfg.grid["n"] == 256 and cfg.initial["name"] == "circle"
    assert cfg.output_dir == "out/circle_translation"
    assert resolve_name("norm") == "norm_equivalence"


def test_duplicate_key_names_both_lines():
    with pytest.raises(ParseError) as info:
        parse_config("experiment = circle\n\ngrid.n = 64\ngrid.n = 128\n")
    msg = str(info.value)
    assert "line 4" in msg and "line 3" in msg


def test_all_errors_are_reported_together():
    text = "experiment = circle\ngrid.n = 12\ngrid.dim = 3\nnorms.s = -1\n"
    with pytest.raises(ValidationError) as info:
        parse_config(text)
    msg = str(info.value)
    for key in ("grid.n", "grid.dim", "norms.s"):
        assert key in msg
    with pytest.raises(ParseError) as info:
        parse_config("experiment = circle\nnonsense\nflow.dt =\n")
    assert "line 2" in str(info.value) and "line 3" in str(info.value)


def test_unknown_keys():
    with pytest.raises(ValidationError, match="unknown"):
        parse_config("experiment = circle\nbogus = 1\n")
    with pytest.raises(ValidationError, match="unknown section"):
        parse_config("experiment = circle\nmesh.n = 1\n")


def test_unstable_step_is_refused():
    with pytest.raises(ValidationError, match="stab"):
        parse_config("experiment = circle\nflow.substeps = 1\nflow.dt = 1e-2\n")
    # opting out of the check lets the config through
    assert parse_config("experiment = circle\nflow.substeps = 1\nflow.dt = 1e-2\n", stability=False)


def test_new_generator_drops_default_params():
    cfg = parse_config("experiment = uniqueness\ninitial.name = clifford\ninitial.r1 = 1.5\n")
    assert cfg.initial == {"name": "clifford", "r1": 1.5}


def test_with_value_and_roundtrip():
    cfg = parse_config("experiment = clifford\nflow.t_end = 0.05\n")
    new = cfg.with_value("grid.n", 16)
    assert new.grid["n"] == 16 and cfg.grid["n"] != 16
    with pytest.raises(ValidationError):
        cfg.with_value("grid.n", 12)
    with pytest.raises(ValidationError):
        cfg.with_value("mesh.n", 16)
    again = parse_config(cfg.to_text())
    assert again == cfg


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_registry_defaults_are_valid_and_shipped(name):
    from pathlib import Path

    cfg = parse_config(f"experiment = {name}")
    assert cfg.experiment == name
    shipped = Path(__file__).parent.parent / "configs" / f"{name}.cfg"
    assert parse_config(shipped.read_text()) == cfg


def test_generators_are_deterministic():
    g = Grid((16, 16), (2 * np.pi, 2 * np.pi))
    a, _ = generate_initial_data("graph_random", g, {}, seed=7)
    b, _ = generate_initial_data("graph_random", g, {}, seed=7)
    c, _ = generate_initial_data("graph_random", g, {}, seed=8)
    np.testing.assert_array_equal(a.periodic, b.periodic)
    assert not np.array_equal(a.periodic, c.periodic)
    with pytest.raises(UnknownGenerator):
        generate_initial_data("torus_knot", g)
    with pytest.raises(ConfigError):
        generate_initial_data("circle", g)
    with pytest.raises(ConfigError):
        generate_initial_data("graph_bump", g, {"wdith": 1.0})


def test_job_count(monkeypatch):
    monkeypatch.delenv("SMCF_THREADS", raising=False)
    assert resolve_jobs(3) == 3
    monkeypatch.setenv("SMCF_THREADS", "2")
    assert resolve_jobs(3) == 2
    monkeypatch.setenv("SMCF_THREADS", "0")
    with pytest.raises(ConfigError):
        resolve_jobs(None)
