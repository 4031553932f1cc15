"""
Tests for the spde-limits command line.

Most tests call ``main`` in-process on tiny grids; the e2e test runs the
module as a subprocess to check the stdout/stderr split.
"""

import json
import subprocess
import sys

import pytest

from spde_limits.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, main
from spde_limits.io import (
    find_incomplete_runs,
    read_manifest,
    read_records,
    verify_manifest,
)
from spde_limits.parallel import WORKERS_ENV

LOG_SCHEDULE = {"kind": "log_inverse", "amplitude": 0.5}
TINY = {"n": 16, "T": 0.1, "dt": 0.01, "master_seed": 5}


def run_cli(*argv):
    return main([str(arg) for arg in argv])


@pytest.fixture
def simulate_config(write_config):
    return write_config(
        {
            **TINY,
            "simulate": {
                "model": "ch_ac_homotopy",
                "eps": 0.1,
                "sigma_schedule": LOG_SCHEDULE,
                "c_zero": 0.0,
                "snapshots": [0.1],
            },
        }
    )


@pytest.fixture
def study_config(write_config):
    return write_config(
        {
            **TINY,
            "study": {
                "mode": "convergence",
                "model": "ch_ac_homotopy",
                "eps_grid": [0.2, 0.1],
                "samples": 2,
                "sigma_schedule": LOG_SCHEDULE,
                "c_zero": 0.0,
            },
        }
    )


@pytest.mark.integration
class TestCheckCommand:
    """Test ``spde-limits check``."""

    def test_passes(self, capsys):
        assert run_cli("check") == EXIT_OK
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 6
        assert all(line.startswith("PASS") for line in lines)

    def test_corrupted_operator_fails(self, capsys):
        assert run_cli("check", "--corrupt-lambda-sign") == EXIT_FAILURE
        captured = capsys.readouterr()
        assert "FAIL coercivity" in captured.out
        assert "error: invariant: coercivity" in captured.err


@pytest.mark.integration
class TestSimulateCommand:
    """Test ``spde-limits simulate``."""

    def test_writes_norms_fields_and_manifest(self, simulate_config, tmp_path):
        out = tmp_path / "run"
        assert run_cli("simulate", "--config", simulate_config, "--out", out) == 0
        rows = read_records(out / "norms.ndjson")
        assert {row["trajectory"] for row in rows} == {
            "z",
            "v",
            "u_eps",
            "limit",
            "error",
        }
        assert len(rows) == 5 * 11
        assert (out / "fields" / "u_eps_t0.1.bin").exists()
        assert (out / "fields" / "u_eps_t0.1.json").exists()
        assert (out / "fields" / "u_eps_t0.1.csv").exists()
        manifest = read_manifest(out)
        assert manifest["complete"] is True
        assert manifest["elapsed_seconds"] >= 0.0
        assert manifest["command"] == "simulate"
        assert manifest["c_zero"] == 0.0
        assert verify_manifest(out) == []

    def test_refuses_non_empty_output(self, simulate_config, tmp_path, capsys):
        (tmp_path / "old.txt").write_text("x", encoding="utf-8")
        code = run_cli("simulate", "--config", simulate_config, "--out", tmp_path)
        assert code == EXIT_CONFIG
        assert "error: configuration:" in capsys.readouterr().err

    def test_missing_block_leaves_incomplete_run(
        self, write_config, tmp_path, capsys
    ):
        config = write_config(TINY)
        out = tmp_path / "runs" / "a"
        assert run_cli("simulate", "--config", config, "--out", out) == EXIT_CONFIG
        assert "no 'simulate' block" in capsys.readouterr().err
        assert read_manifest(out)["complete"] is False
        assert find_incomplete_runs(tmp_path / "runs") == [out]

    def test_missing_output_dir(self, simulate_config, capsys):
        assert run_cli("simulate", "--config", simulate_config) == EXIT_CONFIG
        assert "no output directory" in capsys.readouterr().err


@pytest.mark.integration
class TestRenormCommand:
    """Test ``spde-limits renorm``."""

    def test_prints_c_eps_table(self, write_config, tmp_path, capsys):
        config = write_config(
            {
                "n": 8,
                "renorm": {
                    "model": "ch_ac_homotopy",
                    "eps_grid": [0.5],
                    "sigma_schedule": {"kind": "constant", "amplitude": 1.0},
                    "cutoffs": [1],
                },
            }
        )
        out = tmp_path / "renorm"
        code = run_cli("renorm", "--config", config, "--out", out, "--workers", 1)
        assert code == EXIT_OK
        stdout = capsys.readouterr().out
        assert "2.66666666667" in stdout
        assert "C0: C0 divergent" in stdout
        rows = read_records(out / "renorm.ndjson")
        c_zero = [row for row in rows if row["statistic"] == "c_zero"]
        assert c_zero[0]["divergent"] is True
        assert (out / "c_eps.csv").exists()


@pytest.mark.integration
class TestStudyCommand:
    """Test ``spde-limits study``."""

    def test_convergence_mode(self, study_config, tmp_path):
        out = tmp_path / "study"
        code = run_cli("study", "--config", study_config, "--out", out, "--workers", 1)
        assert code == EXIT_OK
        records = read_records(out / "records.ndjson")
        assert [(r["eps"], r["sample"]) for r in records] == [
            (0.2, 0),
            (0.2, 1),
            (0.1, 0),
            (0.1, 1),
        ]
        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert [row["eps"] for row in report["summary"]] == [0.2, 0.1]
        manifest = read_manifest(out)
        assert manifest["mode"] == "convergence"
        assert (manifest["workers"], manifest["workers_source"]) == (1, "flag")

    def test_env_overrides_workers_flag(self, study_config, tmp_path, monkeypatch):
        monkeypatch.setenv(WORKERS_ENV, "1")
        out = tmp_path / "study"
        code = run_cli("study", "--config", study_config, "--out", out, "--workers", 4)
        assert code == EXIT_OK
        assert read_manifest(out)["workers_source"] == "env"


@pytest.mark.e2e
class TestModuleInvocation:
    def test_check_keeps_stdout_for_results(self):
        """Results go to stdout, log lines to stderr."""
        result = subprocess.run(
            [sys.executable, "-m", "spde_limits.cli", "check"],
            capture_output=True,
            text=True,
            timeout=300,
        )
        assert result.returncode == 0
        lines = result.stdout.strip().splitlines()
        assert all(line.startswith("PASS") for line in lines)
        assert "Starting" not in result.stdout
