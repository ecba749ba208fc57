import json
import subprocess
import sys

import pytest


def run_cli(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "psyframe", *args],
        capture_output=True,
        text=True,
        cwd=cwd,
        timeout=300,
    )


@pytest.fixture(scope="module")
def workdir(tmp_path_factory, trained_weights_path):
    """Shared artifacts directory with a small dataset and real weights."""
    root = tmp_path_factory.mktemp("cli")
    result = run_cli("synth", "--out", str(root / "data.ndjson"), "--n-per-class", "4", "--seed", "3")
    assert result.returncode == 0, result.stderr
    return root


def test_show_config_prints_json(workdir):
    result = run_cli("--show-config")
    assert result.returncode == 0
    cfg = json.loads(result.stdout)
    assert cfg["hop_ms"] == 250
    assert cfg["integrator"]["lambda"] == 0.9
    assert cfg["source"]["type"] == "synth"


def test_synth_output(workdir):
    lines = (workdir / "data.ndjson").read_text().splitlines()
    manifest = json.loads(lines[0])
    assert manifest["n_windows"] == 20
    assert len(lines) == 21


def test_train_and_eval_round_trip(workdir):
    result = run_cli(
        "train",
        "--out", str(workdir / "w.ndjson"),
        "--report", str(workdir / "report.json"),
        "--data", str(workdir / "data.ndjson"),
        "--epochs", "2",
    )
    assert result.returncode == 0, result.stderr
    assert "final val accuracy" in result.stdout
    report = json.loads((workdir / "report.json").read_text())
    assert len(report["epochs"]) == 2

    evaluation = run_cli("eval", "--weights", str(workdir / "w.ndjson"), "--data", str(workdir / "data.ndjson"))
    assert evaluation.returncode == 0, evaluation.stderr
    assert "accuracy:" in evaluation.stdout
    assert "confusion" in evaluation.stdout


def test_run_then_replay_is_identical(workdir, trained_weights_path):
    log = workdir / "session.ndjson"
    run_result = run_cli(
        "run",
        "--weights", str(trained_weights_path),
        "--hops", "12",
        "--schedule", "1:8,none:4",
        "--log", str(log),
    )
    assert run_result.returncode == 0, run_result.stderr
    run_ticks = [l for l in run_result.stdout.splitlines() if l.startswith('{"type":"tick"')]
    assert len(run_ticks) == 12

    replay_result = run_cli("replay", str(log))
    assert replay_result.returncode == 0, replay_result.stderr
    replay_ticks = [l for l in replay_result.stdout.splitlines() if l.startswith('{"type":"tick"')]
    assert replay_ticks == run_ticks


def test_bad_schedule_is_reported(workdir, trained_weights_path):
    result = run_cli("run", "--weights", str(trained_weights_path), "--schedule", "nonsense")
    assert result.returncode == 1
    assert "error:" in result.stderr


def test_missing_weights_is_reported(workdir):
    result = run_cli("run", "--weights", str(workdir / "missing.ndjson"), "--hops", "1")
    assert result.returncode == 1
    assert "error:" in result.stderr


def test_no_command_shows_help():
    result = run_cli()
    assert result.returncode == 2
    assert "usage" in result.stdout.lower()
