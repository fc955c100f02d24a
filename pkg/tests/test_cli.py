import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from qdd.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, compare_runs, main
from qdd.config import DEFAULTS, RunConfig


def _code(argv):
    try:
        return main(argv)
    except SystemExit as exc:
        return exc.code


def _write_cfg(tmp_path, text):
    p = tmp_path / "run.toml"
    p.write_text(text)
    return str(p)


SHORT = """
[model]
eps = 0.1
sigma = 0.0
[grid]
d = 1
geometry = "slab"
N = 101
[scheme]
tau = 1e-3
T = 0.05
"""


def test_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    assert _code(["run", "--config", _write_cfg(tmp_path, SHORT), "--out", str(out)]) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["outcome"] == "Completed"
    assert abs(summary["mass"] - 1.0) < 1e-9
    with open(out / "timeseries.csv") as fh:
        rows = list(csv.DictReader(fh))
    ent = np.array([float(r["entropy"]) for r in rows])
    assert np.all(np.diff(ent) <= 1e-12)
    assert list((out / "snapshots").iterdir())


def test_global_flags_before_subcommand(tmp_path):
    out = tmp_path / "o"
    cfg = _write_cfg(tmp_path, SHORT)
    assert _code(["--out", str(out), "--quiet", "run", "--config", cfg]) == EXIT_OK
    assert (out / "summary.json").exists()


def test_run_bad_config_is_usage_error(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, "[model]\neps = 0.0\n")
    assert _code(["run", "--config", cfg, "--out", str(tmp_path)]) == EXIT_USAGE
    assert "model.eps" in capsys.readouterr().err


def test_run_unknown_key(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, "[model]\nhbar = 1.0\n")
    assert _code(["run", "--config", cfg]) == EXIT_USAGE
    assert "model.hbar" in capsys.readouterr().err


def test_run_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    cfg = _write_cfg(tmp_path, SHORT)
    assert _code(["run", "--config", cfg, "--out", str(blocker / "sub")]) == EXIT_RUNTIME


def test_run_step_failure(tmp_path, monkeypatch):
    from qdd import scheme
    from qdd.errors import StepFailed

    def boom(*a, **k):
        raise StepFailed("forced")
    monkeypatch.setattr(scheme, "evolve", boom)
    out = tmp_path / "o"
    assert _code(["run", "--config", _write_cfg(tmp_path, SHORT), "--out", str(out)]) \
        == EXIT_RUNTIME
    assert json.loads((out / "summary.json").read_text())["outcome"] == "StepFailed"


@pytest.mark.parametrize("argv", [["verify", "bogus"], ["compare", "bogus"], ["frobnicate"],
                                  [], ["verify", "dummy", "--trials", "0"],
                                  ["sweep", "--sigma", ""]])
def test_usage_errors(argv, tmp_path):
    assert _code(argv + (["--out", str(tmp_path)] if argv[:1] == ["sweep"] else [])) \
        == EXIT_USAGE


def test_verify_dummy(capsys):
    assert _code(["verify", "dummy", "--trials", "20", "--seed", "3"]) == EXIT_OK
    lines = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert len(lines) == 3 and all(x["passed"] for x in lines)


def test_print_config_roundtrip(tmp_path, capsys):
    assert _code(["print-config"]) == EXIT_OK
    text = capsys.readouterr().out
    p = tmp_path / "c.toml"
    p.write_text(text)
    assert RunConfig.load(p).raw == DEFAULTS
    assert "# scaled Planck constant" in text


def test_help_lists_flags():
    out = subprocess.run([sys.executable, "-m", "qdd.cli", "--help"], capture_output=True,
                         text=True)
    assert out.returncode == 0
    for flag in ("--config", "--out", "--seed", "--trials", "--quiet"):
        assert flag in out.stdout
    for cmd in ("run", "sweep", "verify", "compare", "print-config"):
        assert cmd in out.stdout


def test_sweep_cli(tmp_path, capsys):
    code = _code(["sweep", "--sigma", "0,4pi", "--eps", "0.1", "--d", "1", "--geometry",
                  "slab", "--N", "51", "--tau", "1e-3", "--T", "0.01", "--profile", "cosine",
                  "--workers", "1", "--out", str(tmp_path)])
    assert code == EXIT_OK
    lines = (tmp_path / "runs.jsonl").read_text().splitlines()
    assert len(lines) == 2
    assert all(json.loads(x)["outcome"] == "Completed" for x in lines)


@pytest.mark.slow
def test_compare_dichotomy(tmp_path):
    res = compare_runs("dichotomy-8pi", out=str(tmp_path))
    assert res["matches_expected"]
    assert res["classical_outcome"] == ["Completed", "BlowupDetected"]
