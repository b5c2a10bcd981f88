import json
import os

import numpy as np
import pytest

from tendonarm.cli import main
from tendonarm.session import Trajectory


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_help_exits_zero(capsys):
    code, out, _ = run_cli(capsys, "--help")
    assert code == 0


def test_train_rejects_zero_samples(capsys):
    code, _, _ = run_cli(capsys, "train", "--samples", "0", "--out", "x.json")
    assert code == 2


def test_reproduce_rejects_bad_variant(capsys, tmp_path):
    code, _, err = run_cli(
        capsys,
        "reproduce",
        "--taught", str(tmp_path / "missing.csv"),
        "--variant", "BOGUS",
        "--out", str(tmp_path / "out.csv"),
    )
    assert code == 2


def test_missing_config_file(capsys, tmp_path):
    code, _, err = run_cli(
        capsys,
        "simulate",
        "--config", str(tmp_path / "nope.json"),
        "--out", str(tmp_path / "out.csv"),
    )
    assert code == 2
    assert "nope.json" in err


def test_export_arm_and_roundtrip(capsys, tmp_path):
    out = str(tmp_path / "arm.json")
    code, _, _ = run_cli(capsys, "export-arm", "--which", "scenario", "--out", out)
    assert code == 0
    assert os.path.exists(out)


@pytest.mark.slow
def test_train_determinism_byte_identical(capsys, tmp_path):
    a, b = str(tmp_path / "a.json"), str(tmp_path / "b.json")
    for out in (a, b):
        code, _, _ = run_cli(
            capsys, "train", "--samples", "300", "--epochs", "4",
            "--seed", "3", "--out", out,
        )
        assert code == 0
    with open(a, "rb") as fa, open(b, "rb") as fb:
        assert fa.read() == fb.read()


@pytest.mark.slow
def test_teach_reproduce_flow(capsys, tmp_path):
    wrench_path = str(tmp_path / "push.json")
    with open(wrench_path, "w") as fh:
        json.dump(
            {
                "attachment": "end_effector",
                "knots": [
                    {"t": 0.5, "force": [0, 0, 0]},
                    {"t": 1.0, "force": [-12.0, 10.0, -8.0]},
                    {"t": 3.0, "force": [-12.0, 10.0, -8.0]},
                    {"t": 3.5, "force": [0, 0, 0]},
                ],
            },
            fh,
        )
    taught_path = str(tmp_path / "taught.csv")
    code, out, err = run_cli(
        capsys, "--json", "teach", "--scenario", "null-teaching",
        "--wrench", wrench_path, "--out", taught_path,
    )
    assert code == 0, err
    info = json.loads(out.strip().splitlines()[-1])
    assert info["frames"] >= 2
    assert info["peak_deviation_rad"] > 0.01

    rep_path = str(tmp_path / "rep.csv")
    code, out, err = run_cli(
        capsys, "--json", "reproduce", "--scenario", "null-teaching",
        "--taught", taught_path, "--variant", "ALL", "--out", rep_path,
    )
    assert code == 0, err
    info = json.loads(out.strip().splitlines()[-1])
    assert info["variant"] == "ALL"
    assert info["E_rad"] < 0.05
    loaded = Trajectory.load(rep_path)
    assert loaded.metadata["variant"] == "ALL"


@pytest.mark.slow
def test_simulate_roundtrip_and_determinism(capsys, tmp_path):
    a, b = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
    for out in (a, b):
        code, _, _ = run_cli(
            capsys, "simulate", "--scenario", "null-teaching", "--out", out,
        )
        assert code == 0
    ta, tb = Trajectory.load(a), Trajectory.load(b)
    assert np.array_equal(ta.theta_true, tb.theta_true)
    assert np.array_equal(ta.f_data, tb.f_data)
