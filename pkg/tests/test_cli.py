import json

import pytest

from thermotwin.cli import main
from thermotwin.core import Trajectory


def test_usage_errors_exit_2(capsys):
    assert main([]) == 2
    assert main(["train", "gru"]) == 2
    assert main(["control", "pid"]) == 2


@pytest.mark.parametrize("argv, key", [
    (["evaluate", "--set", "plant.bogus=1"], "plant.bogus"),
    (["evaluate", "--set", "suite.scenarios=9"], "suite.scenarios"),
    (["control", "mpc", "--ref", "zigzag"], "control.reference"),
    (["suite", "--set", "lstm.epochs=lots"], "lstm.epochs"),
    (["generate", "--config", "/nonexistent.ini"], "--config"),
])
def test_bad_config_exits_2_and_names_key(argv, key, tmp_path, capsys):
    assert main(argv + ["--out", str(tmp_path)]) == 2
    assert key in capsys.readouterr().err


def test_bad_config_file_key(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[mpc]\nhorizon = 10\nweight = 3\n")
    assert main(["evaluate", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "mpc.weight" in capsys.readouterr().err


def test_runtime_failure_exits_1(tmp_path, capsys):
    assert main(["report", "--out", str(tmp_path)]) == 1
    assert "report failed" in capsys.readouterr().err


def test_generate_writes_trajectory_csvs(tmp_path, capsys):
    assert main(["generate", "--scenario", "2", "--out", str(tmp_path), "--seed", "4"]) == 0
    path = tmp_path / "data" / "scenario-2.csv"
    traj = Trajectory.load_csv(path) if hasattr(Trajectory, "load_csv") else Trajectory.from_csv(path.read_text())
    assert len(traj) == 212
    first = path.read_bytes()
    assert main(["generate", "--scenario", "2", "--out", str(tmp_path), "--seed", "4"]) == 0
    assert path.read_bytes() == first


def test_train_arx_writes_checkpoint(tmp_path, capsys):
    assert main(["train", "arx", "--out", str(tmp_path), "--set", "data.n_series=3"]) == 0
    info = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert info["model"] == "arx" and info["bytes"] == (tmp_path / "arx.ckpt").stat().st_size
    from thermotwin.models import ArxModel, load_model

    assert isinstance(load_model(tmp_path / "arx.ckpt"), ArxModel)


def test_control_and_report(tmp_path, capsys):
    argv = ["control", "llm-simple", "--penalty", "--ref", "constant", "--out", str(tmp_path),
            "--set", "control.steps=10", "--seed", "3"]
    assert main(argv) == 0
    capsys.readouterr()
    assert main(["report", "--out", str(tmp_path), "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    (row,) = doc["controllers"]
    assert row["controller"] == "llm-simple" and row["penalty"] is True and row["seed"] == 3
    assert row["reference"] == "constant"
