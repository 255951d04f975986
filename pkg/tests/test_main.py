# tests/test_main.py
"""
End-to-end tests for the command-line entry point and its exit codes.
Run with: pytest tests/test_main.py -v
"""
import csv
import json

import pytest

from constants import EFFECTIVE_CONFIG_FILE, EXIT_GATE, EXIT_OK, EXIT_VALIDATION
from main import dispatch, main


def _run(*argv):
    return dispatch([str(a) for a in argv])


class TestExitCodes:
    """Tests for the mapping of failures to exit codes"""

    def test_version(self, capsys):
        assert _run("--version") == EXIT_OK
        assert "kam-workbench" in capsys.readouterr().out

    def test_unknown_command(self, capsys):
        assert _run("frobnicate") == EXIT_VALIDATION
        assert "Usage error" in capsys.readouterr().out

    def test_missing_required_argument(self, capsys):
        assert _run("lattice", "count", "--i", "1") == EXIT_VALIDATION

    def test_malformed_config(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text('{"lattice": {"window": [0, 1],}}', encoding="utf-8")

        assert _run("--config", path, "lattice", "count", "--i", "1", "--t", "2") == EXIT_VALIDATION
        out = capsys.readouterr().out
        assert "Configuration error" in out
        assert "line 1" in out

    def test_missing_config(self, tmp_path, capsys):
        missing = tmp_path / "missing.json"
        assert _run("--config", missing, "approx", "gamma") == EXIT_VALIDATION

    def test_unknown_config_key(self, toy_config_data, write_config, capsys):
        toy_config_data["schedule"]["bogus"] = 1
        path = write_config(toy_config_data)
        assert _run("--config", path, "approx", "gamma") == EXIT_VALIDATION
        assert "bogus" in capsys.readouterr().out

    def test_invalid_threads(self, toy_config_path):
        assert _run("--config", toy_config_path, "--threads", "0", "approx", "gamma") == EXIT_VALIDATION

    def test_amplified_toy_fails_gate(self, toy_config_data, write_config, out_dir, capsys):
        for term in toy_config_data["hamiltonian"]["terms"]:
            amplitude = term["amplitude"]
            if isinstance(amplitude, list):
                term["amplitude"] = [a * 1e10 for a in amplitude]
            else:
                term["amplitude"] = amplitude * 1e10
        path = write_config(toy_config_data)

        code = _run("--config", path, "--out-dir", out_dir, "kam", "run")

        assert code == EXIT_GATE
        out = capsys.readouterr().out
        assert "Failed inequality: s^-1|||P||| <= E0" in out
        assert "lhs = " in out
        assert "rhs = " in out
        assert not (out_dir / "report.csv").exists()

    def test_build_ham_gate_exit_code(self, toy_config_path, out_dir, capsys):
        code = _run("--config", toy_config_path, "--out-dir", out_dir, "osc", "build-ham")

        assert code == EXIT_GATE
        assert "Failed inequality: s^-1|||P||| <= E0" in capsys.readouterr().out
        assert _run("--config", toy_config_path, "--out-dir", out_dir, "osc", "build-ham", "--no-enforce-gate") == EXIT_OK
        assert (out_dir / "hamiltonian.json").exists()

    def test_main_exits_with_code(self):
        with pytest.raises(SystemExit) as exc_info:
            main(["frobnicate"])
        assert exc_info.value.code == EXIT_VALIDATION


class TestToyRun:
    """Tests for the toy KAM run"""

    def test_toy_run_succeeds(self, toy_config_path, out_dir):
        code = _run("--config", toy_config_path, "--out-dir", out_dir, "kam", "run")

        assert code == EXIT_OK
        lines = (out_dir / "report.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("# kam-workbench 0.1.0 seed=")
        rows = list(csv.DictReader(lines[1:]))
        assert [int(r["j"]) for r in rows] == [0, 1, 2, 3]
        for row in rows:
            assert float(row["measured_norm"]) <= float(row["bound_rhs"])
            assert float(row["homolog_residual"]) >= 0.0
            assert float(row["sympl_residual"]) >= 0.0

        norms = [float(r["measured_norm"]) for r in rows]
        assert norms == sorted(norms, reverse=True)

        details = json.loads((out_dir / "run.json").read_text(encoding="utf-8"))
        assert all(i["passed"] for i in details["identities"])
        assert all(step["log_ratio"] >= 1.4 for step in details["steps"][:3])
        effective = json.loads((out_dir / EFFECTIVE_CONFIG_FILE).read_text(encoding="utf-8"))
        assert effective["schedule"]["m"] == 2.5

    def test_toy_run_is_deterministic(self, toy_config_path, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        assert _run("--config", toy_config_path, "--out-dir", first, "--seed", "5", "kam", "run") == EXIT_OK
        assert _run("--config", toy_config_path, "--out-dir", second, "--seed", "5", "kam", "run") == EXIT_OK

        assert (first / "report.csv").read_bytes() == (second / "report.csv").read_bytes()
        assert (first / "run.json").read_bytes() == (second / "run.json").read_bytes()

    def test_seed_in_header(self, toy_config_path, out_dir):
        assert _run("--config", toy_config_path, "--out-dir", out_dir, "--seed", "42", "kam", "run") == EXIT_OK
        header = (out_dir / "report.csv").read_text(encoding="utf-8").splitlines()[0]
        assert "seed=42" in header
        assert "config_sha256=" in header


class TestOutputlessCommands:
    """Tests for commands that only print"""

    def test_gamma_prints(self, toy_config_path, out_dir, capsys):
        assert _run("--config", toy_config_path, "--out-dir", out_dir, "approx", "gamma") == EXIT_OK
        assert "Gamma0(" in capsys.readouterr().out
        assert not (out_dir / EFFECTIVE_CONFIG_FILE).exists()

    def test_summary_banner(self, toy_config_path, capsys):
        assert _run("--config", toy_config_path, "--summary", "lattice", "count", "--i", "1", "--t", "2") == EXIT_OK
        out = capsys.readouterr().out
        assert "Configuration Summary" in out
        assert "N_1(2.0) = 2" in out

    def test_summary_prints_config_hash(self, toy_config_path, out_dir, capsys):
        from config import load_config

        assert _run("--config", toy_config_path, "--out-dir", out_dir, "--summary", "kam", "run") == EXIT_OK
        out = capsys.readouterr().out
        config_hash = load_config(toy_config_path).config_hash()
        assert f"Config hash: {config_hash}" in out
        header = (out_dir / "report.csv").read_text(encoding="utf-8").splitlines()[0]
        assert config_hash in header


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
