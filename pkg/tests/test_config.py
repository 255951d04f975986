# tests/test_config.py
"""
Unit tests for the run configuration.
Run with: pytest tests/test_config.py -v
"""
import pytest

from config import AppConfig, LatticeConfig, OutputConfig, load_config
from errors import ConfigFileError, ConfigValidationError


class TestLoadConfig:
    """Tests for loading JSON run configurations"""

    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("KAMWB_SEED", raising=False)
        config = load_config()

        assert config.source is None
        assert config.delta.kind == "default"
        assert config.output.seed == 42
        assert config.lattice.resolved_subsets() == [[0], [1], [0, 1]]

    def test_toy(self, toy_config_path):
        config = load_config(toy_config_path)

        assert config.source == toy_config_path
        assert config.structure().window.size == 2
        assert config.frequency().values == pytest.approx((1.0, 2.0**0.5))
        assert config.schedule.decay == "inverse-square"
        assert config.hamiltonian.omega_tilde == [1.618033988749895]

    def test_malformed_json_reports_position(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{\n  "lattice": {"window": [0, 1],}\n}', encoding="utf-8")

        with pytest.raises(ConfigFileError) as exc_info:
            load_config(path)

        assert exc_info.value.line == 2
        assert exc_info.value.column is not None
        assert isinstance(exc_info.value, ValueError)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigFileError):
            load_config(tmp_path / "nope.json")

    def test_config_dir_fallback(self, tmp_path, monkeypatch, toy_config_data, write_config):
        write_config(toy_config_data, name="fallback.json")
        monkeypatch.setenv("KAMWB_CONFIG_DIR", str(tmp_path))
        monkeypatch.chdir(tmp_path.parent)

        config = load_config("fallback.json")
        assert config.resonance.order_cap == 8

    def test_unknown_section(self, write_config):
        with pytest.raises(ConfigValidationError) as exc_info:
            load_config(write_config({"plotting": {}}))
        assert "plotting" in str(exc_info.value)

    def test_unknown_key(self, write_config):
        with pytest.raises(ConfigValidationError) as exc_info:
            load_config(write_config({"resonance": {"omgea": [1.0]}}))
        assert "omgea" in str(exc_info.value)


class TestSectionValidation:
    """Tests for per-section validation"""

    @pytest.mark.parametrize(
        "section, data",
        [
            ("lattice", {"window": [0, 1], "subsets": [[0]]}),
            ("lattice", {"window": [0, 1], "rho_w": 2.0}),
            ("delta", {"kind": "gaussian"}),
            ("delta", {"kind": "table", "knots": [[1.0, 2.0]]}),
            ("schedule", {"s": -1.0}),
            ("schedule", {"decay": "linear"}),
            ("resonance", {"samples": 10}),
            ("resonance", {"order_cap": -1}),
            ("hamiltonian", {"source": "file"}),
            ("hamiltonian", {"terms": [{"kind": "cos"}]}),
            ("oscillator", {"integrator": "rk4"}),
            ("oscillator", {"l": -1}),
            ("output", {"threads": 0}),
            ("output", {"log_level": "chatty"}),
        ],
    )
    def test_invalid_values(self, write_config, section, data):
        with pytest.raises(ValueError):
            load_config(write_config({section: data}))

    def test_lattice_default_subsets(self):
        lattice = LatticeConfig.from_dict({"window": [2, 4]})
        assert lattice.resolved_subsets() == [[2], [3], [4], [2, 3, 4]]
        assert lattice.structure().window.indices == (2, 3, 4)

    def test_schedule_builds_with_fixed_h(self, write_config):
        config = load_config(write_config({"schedule": {"h": 0.5}}))
        assert config.analyticity().h == 0.5

    def test_hamiltonian_mode_length(self, toy_config):
        from apseries import Analyticity

        toy_config.hamiltonian.terms = [{"mode": [1, 0], "kind": "cos", "amplitude": 1.0}]
        with pytest.raises(ConfigValidationError):
            toy_config.hamiltonian.hamiltonian(
                toy_config.structure(), toy_config.frequency(), Analyticity(m=1.0, r=1.0, s=1.0)
            )


class TestOutputConfig:
    """Tests for output settings and overrides"""

    def test_env_overrides(self, monkeypatch):
        monkeypatch.setenv("KAMWB_SEED", "9")
        monkeypatch.setenv("KAMWB_THREADS", "3")
        monkeypatch.setenv("KAMWB_LOG_LEVEL", "debug")

        output = OutputConfig.from_env()
        assert (output.seed, output.threads, output.log_level) == (9, 3, "DEBUG")

    def test_bad_env_value(self, monkeypatch):
        monkeypatch.setenv("KAMWB_SEED", "many")
        with pytest.raises(ConfigValidationError):
            OutputConfig.from_env()

    def test_output_section(self, write_config, tmp_path):
        config = load_config(write_config({"output": {"out_dir": str(tmp_path / "r"), "seed": 5}}))
        assert config.output.out_dir == tmp_path / "r"
        assert config.output.seed == 5

    def test_with_output_ignores_none(self, toy_config):
        updated = toy_config.with_output(seed=None, threads=2, log_level="warning")
        assert updated.output.seed == toy_config.output.seed
        assert updated.output.threads == 2
        assert updated.output.log_level == "WARNING"

    def test_with_output_validates(self, toy_config):
        with pytest.raises(ConfigValidationError):
            toy_config.with_output(seed=-1)


class TestConfigHash:
    """Tests for the configuration fingerprint"""

    def test_hash_ignores_output(self, toy_config):
        assert toy_config.config_hash() == toy_config.with_output(seed=99, threads=4).config_hash()

    def test_hash_tracks_sections(self, toy_config_data, write_config):
        first = load_config(write_config(toy_config_data, name="a.json")).config_hash()
        toy_config_data["resonance"]["alpha"] = 0.002
        second = load_config(write_config(toy_config_data, name="b.json")).config_hash()
        assert first != second
        assert len(first) == 64

    def test_round_trip(self, toy_config):
        again = AppConfig.from_dict(toy_config.to_dict())
        assert again.config_hash() == toy_config.config_hash()
        assert again.output.out_dir == toy_config.output.out_dir

    def test_print_summary(self, toy_config, capsys):
        toy_config.print_summary()
        out = capsys.readouterr().out
        assert "Configuration Summary" in out
        assert "epsilon=1e-06" in out


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
