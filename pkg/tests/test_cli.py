from pathlib import Path

import pytest

from smcf.cli import main
from smcf.experiments import Verdict


def small(tmp_path, **extra):
    lines = [
        "experiment = volume_conservation",
        f"output_dir = {tmp_path / 'out'}",
        "grid.n = 16",
        "flow.dt = 1e-3",
        "flow.t_end = 4e-3",
        "emit_snapshots_every = 2",
    ]
    lines += [f"{k} = {v}" for k, v in extra.items()]
    p = tmp_path / "small.cfg"
    p.write_text("\n".join(lines) + "\n")
    return p


def test_verdict_line():
    v = Verdict(3, "volume_conservation", True, {"drift": 1.5e-16, "steps": 4, "ok": True})
    assert v.line() == "PASS criterion=3 name=volume_conservation drift=1.5e-16 steps=4 ok=true"
    assert Verdict(1, "x", False).line() == "FAIL criterion=1 name=x"


def test_run_writes_outputs(tmp_path, capsys):
    assert main(["run", str(small(tmp_path))]) == 0
    line = capsys.readouterr().out.strip()
    assert line.startswith("PASS criterion=3 name=volume_conservation")
    out = tmp_path / "out"
    for name in ("config.txt", "initial_data.txt", "verdict.txt", "trajectory.csv"):
        assert (out / name).is_file()
    assert (out / "verdict.txt").read_text().strip() == line
    snaps = sorted((out / "snapshots").iterdir())
    assert [s.name for s in snaps] == ["state_000000.smcf", "state_000002.smcf", "state_000004.smcf"]


def test_inspect_snapshot(tmp_path, capsys):
    main(["run", str(small(tmp_path))])
    capsys.readouterr()
    assert main(["inspect", str(tmp_path / "out" / "snapshots" / "state_000004.smcf")]) == 0
    out = capsys.readouterr().out
    assert "dim = 2" in out and "n = 16 x 16" in out and "codim_components = 4" in out
    assert "t = 0.004" in out
    assert "lambda_H2 = " in out and "g_eig = " in out


def test_bad_config_exits_with_2(tmp_path, capsys):
    assert main(["run", str(small(tmp_path, **{"grid.dim": 5}))]) == 2
    assert "grid.dim" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2
    assert main(["inspect", str(small(tmp_path))]) == 2


def test_sweep(tmp_path, capsys):
    assert main(["sweep", str(small(tmp_path)), "--param", "grid.n", "--values", "8", "16"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS criterion=3") == 2
    assert (tmp_path / "out" / "grid.n=8" / "verdict.txt").is_file()
    assert main(["sweep", str(small(tmp_path)), "--param", "grid.n", "--values", "12"]) == 2


def test_threads_variable(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SMCF_THREADS", "0")
    assert main(["run", str(small(tmp_path))]) == 2
    assert "worker count" in capsys.readouterr().err


def test_usage_errors():
    with pytest.raises(SystemExit):
        main([])
    with pytest.raises(SystemExit):
        main(["sweep", "x.cfg"])
