"""Experiment runner: config handling, output contracts, reproducibility."""

import hashlib
import json
from pathlib import Path

import pytest

from rtsrk.cli import (
    ConfigError,
    EXPERIMENTS,
    build_config,
    main,
    read_config_file,
)

REPO = Path(__file__).resolve().parent.parent


def _run(args):
    return main([str(a) for a in args])


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_read_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# comment line\n"
        "\n"
        "problem = lorenz\n"
        "h = 0.25\n"
        "m_traj = 12\n"
        "noise_scales = [1e-2, 1e-3]\n"
    )
    values = read_config_file(cfg)
    assert values == {
        "problem": "lorenz",
        "h": 0.25,
        "m_traj": 12,
        "noise_scales": [0.01, 0.001],
    }


def test_read_config_file_reports_bad_line(tmp_path):
    cfg = tmp_path / "broken.cfg"
    cfg.write_text("problem = lorenz\njust words\n")
    with pytest.raises(ConfigError) as info:
        read_config_file(cfg)
    assert "broken.cfg:2" in str(info.value)


def test_build_config_rejects_unknown_key():
    with pytest.raises(ConfigError) as info:
        build_config("integrate", {"stepsize": 0.1}, {})
    assert "stepsize" in str(info.value)
    assert "integrate" in str(info.value)


def test_build_config_coercions():
    cfg = build_config("integrate", {"n_steps": 5, "dist.h": 1}, {})
    assert cfg["n_steps"] == 5
    assert cfg["dist.h"] == 1.0
    assert isinstance(cfg["dist.h"], float)
    with pytest.raises(ConfigError):
        build_config("integrate", {"n_steps": 2.5}, {})
    with pytest.raises(ConfigError):
        build_config("integrate", {"problem": 7}, {})
    with pytest.raises(ConfigError):
        build_config("lorenz-fan", {"noise_scales": []}, {})


def test_every_experiment_has_a_passing_default_config():
    for name in EXPERIMENTS:
        path = REPO / "configs" / f"{name}.cfg"
        assert path.is_file(), f"missing default config for {name}"
        values = read_config_file(path)
        cfg = build_config(name, values, {})
        assert cfg == dict(EXPERIMENTS[name].defaults), name


def test_integrate_example_trajectory(tmp_path, capsys):
    # Degenerate steps, Euler, y' = -y from 1 with h = 0.5: 1, 0.5, 0.25.
    code = _run(["integrate", "--out", tmp_path])
    assert code == 0
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "k,t_nominal,t_realized,y_0"
    assert lines[1] == "0,0.0,0.0,1.0"
    assert lines[2] == "1,0.5,0.5,0.5"
    assert lines[3] == "2,1.0,1.0,0.25"
    printed = capsys.readouterr().out
    assert "trajectory.csv" in printed
    assert "manifest.json" in printed


def test_unknown_config_key_exits_two(tmp_path, capsys):
    code = _run(["integrate", "--out", tmp_path, "--set", "granularity=9"])
    assert code == 2
    err = capsys.readouterr().err
    assert "granularity" in err


def test_bad_set_syntax_exits_two(tmp_path, capsys):
    code = _run(["integrate", "--out", tmp_path, "--set", "n_steps"])
    assert code == 2


def test_same_seed_reproduces_bytes(tmp_path):
    args = ["integrate", "--set", "dist.kind=uniform", "--set", "n_steps=6",
            "--seed", "42"]
    assert _run(args + ["--out", tmp_path / "a"]) == 0
    assert _run(args + ["--out", tmp_path / "b"]) == 0
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    b = (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert a == b
    assert _run(["integrate", "--set", "dist.kind=uniform", "--set", "n_steps=6",
                 "--seed", "43", "--out", tmp_path / "c"]) == 0
    c = (tmp_path / "c" / "trajectory.csv").read_bytes()
    assert a != c


def test_set_overrides_config_file(tmp_path):
    code = _run([
        "integrate", "--config", REPO / "configs" / "integrate.cfg",
        "--set", "n_steps=4", "--out", tmp_path,
    ])
    assert code == 0
    lines = (tmp_path / "trajectory.csv").read_text().splitlines()
    assert len(lines) == 6  # header + 5 states


def test_manifest_contents_and_hashes(tmp_path):
    assert _run(["integrate", "--out", tmp_path, "--seed", "7"]) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["experiment"] == "integrate"
    assert manifest["seed"] == 7
    assert manifest["extended"] is False
    assert manifest["config"] == dict(EXPERIMENTS["integrate"].defaults)
    assert manifest["wall_time_s"] >= 0.0
    assert set(manifest["outputs"]) == {"trajectory.csv", "trajectory.png"}
    for name, digest in manifest["outputs"].items():
        assert _digest(tmp_path / name) == digest


def test_manifest_round_trip_is_byte_identical(tmp_path):
    first = tmp_path / "first"
    again = tmp_path / "again"
    base = [
        "linear-posterior", "--seed", "3",
        "--set", "grid_points=201", "--set", "sigmas=[0.1]",
    ]
    assert _run(base + ["--out", first]) == 0
    assert _run([
        "linear-posterior", "--config", first / "manifest.json", "--out", again,
    ]) == 0
    names = json.loads((first / "manifest.json").read_text())["outputs"]
    assert names
    for name in names:
        assert (first / name).read_bytes() == (again / name).read_bytes(), name


def test_manifest_experiment_mismatch_exits_two(tmp_path, capsys):
    assert _run(["integrate", "--out", tmp_path]) == 0
    code = _run(["chemistry", "--config", tmp_path / "manifest.json",
                 "--out", tmp_path / "x"])
    assert code == 2


def test_strict_turns_divergence_flags_into_failure(tmp_path, capsys):
    # Heun on Lorenz at h = 1 blows up; the fan runner flags lost trajectories.
    args = ["lorenz-fan", "--out", tmp_path, "--set", "h=1.0",
            "--set", "t_final=30.0", "--set", "m_traj=3",
            "--set", "record_stride=30"]
    assert _run(args) == 0
    err = capsys.readouterr().err
    assert "diverged" in err
    assert _run(args + ["--strict"]) == 1


def test_experiment_help_strings_exist():
    for name, exp in EXPERIMENTS.items():
        assert exp.help
        assert exp.defaults
