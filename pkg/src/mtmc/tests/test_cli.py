import json
import logging
import sys

import numpy as np
import pytest

from .. import __version__
from ..cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main

BAD_MASSES = """\
name = bad
space = discrete
space.n = 2
[target]
_config_name = discretetable
masses = [0.75, -0.25]
[proposal]
_config_name = independent
masses = [0.5, 0.5]
"""


def test_spectrum_command(tmp_path):
    assert main(["spectrum", "--config", "two-state", "--out", str(tmp_path), "--quiet"]) == EXIT_OK
    report = json.loads((tmp_path / "two-state_spectral.json").read_text())
    np.testing.assert_allclose(report["lambdas"], [1.0, 1 / 3], atol=1e-12)
    assert report["report"] == "spectral"
    assert report["library"] == f"mtmc {__version__}"


def test_run_with_overrides(tmp_path, monkeypatch):
    """Trailing --key value pairs override scenario fields."""
    monkeypatch.setattr(sys, "argv", [
        "mtmc", "run", "--config", "two-state", "--out", str(tmp_path), "--seed", "3",
        "--sampler.n_samples", "500", "--coupling.replicates", "200", "--output.write_trace", "false",
    ])
    assert main() == EXIT_OK
    report = json.loads((tmp_path / "two-state_run.json").read_text())
    assert report["seed"] == 3
    assert report["n_samples"] == 500
    assert not (tmp_path / "two-state_trace.csv").exists()
    assert (tmp_path / "two-state_coupling.json").exists()


def test_compare_command(tmp_path):
    args = ["compare", "--config", "two-state", "--out", str(tmp_path), "--sampler.n_samples", "300"]
    assert main(args) == EXIT_OK
    report = json.loads((tmp_path / "two-state_compare.json").read_text())
    assert report["samplers"]["mh"]["true_evals"] == 300
    assert report["true_evals_ratio"] < 1.0


def test_repeated_runs_are_identical(tmp_path):
    for name in ("a", "b"):
        args = ["run", "--config", "two-state", "--out", str(tmp_path / name),
                "--sampler.n_samples", "500", "--coupling.replicates", "200"]
        assert main(args) == EXIT_OK
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert "two-state_run.json" in files
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_invalid_configuration(tmp_path, caplog):
    path = tmp_path / "bad.cfg"
    path.write_text(BAD_MASSES)
    with caplog.at_level(logging.ERROR):
        assert main(["run", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "target.masses (line 6)" in caplog.text
    assert not list(tmp_path.glob("*.json"))


def test_invalid_overrides(tmp_path):
    assert main(["run", "--config", "two-state", "--out", str(tmp_path), "--sampler.seed"]) == EXIT_CONFIG
    assert main(["run", "--config", "two-state", "--sampler.nsamples", "5"]) == EXIT_CONFIG
    assert main(["run", "--config", "two-state", "--out", str(tmp_path), "--sampler.n_samples", "0"]) == EXIT_CONFIG
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == EXIT_CONFIG


def test_runtime_failure(tmp_path, caplog):
    with caplog.at_level(logging.ERROR):
        assert main(["spectrum", "--config", "bimodal", "--out", str(tmp_path)]) == EXIT_RUNTIME
    assert "Scenario 'bimodal' failed during 'spectrum'" in caplog.text


def test_version(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0
    assert f"mtmc {__version__}" in capsys.readouterr().out


def test_usage_errors():
    with pytest.raises(SystemExit) as excinfo:
        main(["run"])
    assert excinfo.value.code == 2
    with pytest.raises(SystemExit):
        main(["run", "--config", "two-state", "--quiet", "--verbose"])
