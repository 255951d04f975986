# tests/test_commands.py
"""
Unit tests for command pattern implementation.
Run with: pytest tests/test_commands.py -v
"""
import csv
import json
import math

import pytest

from errors import Divergence, GateFailed

# Import commands - conftest.py handles the path
from commands import (
    BuildHamCommand,
    CheckCommand,
    CommandContext,
    CommandError,
    CommandParser,
    CountCommand,
    EnumerateCommand,
    GammaCommand,
    GlobalOptions,
    InvalidCommandError,
    MeasureCommand,
    PeriodCommand,
    PsiCommand,
    RunCommand,
    ScanCommand,
    SimulateCommand,
    StepCommand,
    TrigCommand,
    WeightCommand,
    build_problem,
)


# Fixtures
@pytest.fixture
def parser():
    """Create a CommandParser instance"""
    return CommandParser()


@pytest.fixture
def step_config(tmp_path, write_config):
    """
    A one-index configuration with a small cos(x) (1 + z) perturbation and
    Delta = 1, suitable for a single standalone step.
    """
    from config import load_config

    data = {
        "lattice": {"window": [0, 0], "subsets": [[0]]},
        "delta": {"kind": "table", "knots": [[0.0, 1.0]]},
        "schedule": {"m": 1.0, "r": 1.0, "s": 0.5, "w": 0.0, "h": 1.0, "mu": 0.5, "rho": 0.25},
        "resonance": {"omega": [1.0]},
        "hamiltonian": {
            "terms": [{"mode": [0, 1], "kind": "cos", "amplitude": [1e-8, 1e-8]}],
        },
    }
    return load_config(write_config(data)).with_output(out_dir=tmp_path / "step_out")


def read_csv(path):
    """Rows of a result CSV without its header comment."""
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("# kam-workbench")
    return list(csv.reader(lines[1:]))


# Parser Tests
class TestCommandParser:
    """Tests for the argparse subcommand tree"""

    def test_parse_lattice_weight(self, parser):
        cmd = parser.parse(["lattice", "weight", "--subset", "0,1", "--rho-w", "3"])
        assert isinstance(cmd, WeightCommand)
        assert cmd.subset == [0, 1]
        assert cmd.rho_w == 3.0

    def test_parse_lattice_count(self, parser):
        cmd = parser.parse(["lattice", "count", "--i", "1", "--t", "2.5"])
        assert isinstance(cmd, CountCommand)
        assert (cmd.i, cmd.t) == (1, 2.5)

    def test_parse_lattice_enumerate(self, parser):
        cmd = parser.parse(["lattice", "enumerate", "--order-cap", "2", "--component", "1"])
        assert isinstance(cmd, EnumerateCommand)
        assert cmd.order_cap == 2
        assert cmd.component == 1
        assert cmd.out == "indices.csv"

    def test_parse_approx(self, parser):
        assert isinstance(parser.parse(["approx", "gamma", "--mu", "1"]), GammaCommand)
        assert isinstance(parser.parse(["approx", "psi"]), PsiCommand)
        cmd = parser.parse(["approx", "check", "--strict"])
        assert isinstance(cmd, CheckCommand)
        assert cmd.strict is True

    def test_parse_resonance_scan(self, parser):
        cmd = parser.parse(
            ["resonance", "scan", "--omega-tilde", "1.6", "--alpha", "1e-3", "--order-cap", "4"]
        )
        assert isinstance(cmd, ScanCommand)
        assert cmd.omega_tilde == [1.6]
        assert cmd.alpha == 1e-3
        assert cmd.order_cap == 4
        assert cmd.no_parameter is False
        assert cmd.extended is False
        assert parser.parse(["resonance", "scan", "--extended"]).extended is True

    def test_parse_resonance_measure_repeated_alpha(self, parser):
        cmd = parser.parse(["resonance", "measure", "--alpha", "1e-2", "--alpha", "1e-3"])
        assert isinstance(cmd, MeasureCommand)
        assert cmd.alphas == [1e-2, 1e-3]

    def test_parse_kam(self, parser):
        cmd = parser.parse(["kam", "run", "--jmax", "3", "--stop-tol", "0"])
        assert isinstance(cmd, RunCommand)
        assert cmd.j_max == 3
        assert cmd.stop_tol == 0.0
        assert isinstance(parser.parse(["kam", "step", "--mu", "0.5"]), StepCommand)

    def test_parse_osc(self, parser):
        cmd = parser.parse(["osc", "trig", "--l", "2"])
        assert isinstance(cmd, TrigCommand)
        assert cmd.l == 2
        assert isinstance(parser.parse(["osc", "period", "--l", "1"]), PeriodCommand)
        cmd = parser.parse(["osc", "build-ham", "--enforce-gate"])
        assert isinstance(cmd, BuildHamCommand)
        assert cmd.enforce_gate is True
        cmd = parser.parse(["osc", "simulate", "--T", "10", "--integrator", "verlet", "--unforced"])
        assert isinstance(cmd, SimulateCommand)
        assert cmd.T == 10.0
        assert cmd.integrator == "verlet"
        assert cmd.unforced is True

    def test_build_ham_gate_defaults_to_config(self, parser):
        cmd = parser.parse(["osc", "build-ham"])
        assert cmd.enforce_gate is None
        assert parser.parse(["osc", "build-ham", "--no-enforce-gate"]).enforce_gate is False

    def test_global_options_before_and_after(self, parser):
        before = parser.parse(["--seed", "7", "--out-dir", "res", "lattice", "count", "--i", "1", "--t", "3"])
        after = parser.parse(["lattice", "count", "--i", "1", "--t", "3", "--seed", "7", "--out-dir", "res"])
        for cmd in (before, after):
            assert cmd.options.seed == 7
            assert cmd.options.out_dir == "res"
            assert cmd.options.overrides() == {"out_dir": "res", "seed": 7}

    def test_global_options_default(self, parser):
        cmd = parser.parse(["approx", "psi"])
        assert cmd.options == GlobalOptions()
        assert cmd.options.overrides() == {}

    def test_parse_unknown_subcommand(self, parser):
        with pytest.raises(InvalidCommandError):
            parser.parse(["unknown"])

    def test_parse_unknown_flag(self, parser):
        with pytest.raises(InvalidCommandError):
            parser.parse(["kam", "run", "--bogus"])

    def test_parse_bad_integer_list(self, parser):
        with pytest.raises(InvalidCommandError):
            parser.parse(["lattice", "weight", "--subset", "a,b"])

    def test_parse_bad_integrator(self, parser):
        with pytest.raises(InvalidCommandError):
            parser.parse(["osc", "simulate", "--integrator", "euler"])

    def test_usage_mentions_program(self, parser):
        assert "kam-workbench" in parser.format_usage()


class TestCommandContext:
    """Tests for the command context"""

    def test_config_required(self, mock_display_manager):
        with pytest.raises(ValueError):
            CommandContext(config=None, display_manager=mock_display_manager)

    def test_delta_defaults_from_config(self, toy_config, mock_display_manager):
        context = CommandContext(config=toy_config, display_manager=mock_display_manager)
        assert context.delta.kind == "power-exp"
        assert context.writer is None

    def test_require_writer(self, toy_config, mock_display_manager):
        context = CommandContext(config=toy_config, display_manager=mock_display_manager)
        with pytest.raises(CommandError):
            PsiCommand().execute(context)


# Command Execution Tests
class TestLatticeCommands:
    """Tests for the lattice commands"""

    def test_weight_of_subset(self, command_context):
        result = WeightCommand(subset=[0], rho_w=3.0).execute(command_context)
        assert "= 1.0" in result

    def test_weight_of_support(self, command_context):
        result = WeightCommand(k=[0, 2]).execute(command_context)
        assert "support [1]" in result
        assert "[[k]]" in result

    def test_weight_needs_exactly_one_argument(self):
        with pytest.raises(InvalidCommandError):
            WeightCommand()
        with pytest.raises(InvalidCommandError):
            WeightCommand(subset=[0], k=[1, 0])

    def test_weight_wrong_length(self, command_context):
        with pytest.raises(InvalidCommandError):
            WeightCommand(k=[1, 0, 0]).execute(command_context)

    def test_count(self, command_context):
        # singletons {0}, {1} weigh 1 and 1 + log(2)^3 = 1.333
        assert CountCommand(1, 1.0).execute(command_context).endswith("= 1")
        assert CountCommand(1, 2.0).execute(command_context).endswith("= 2")
        assert CountCommand(2, 2.0).execute(command_context).endswith("= 1")

    def test_count_rejects_zero(self):
        with pytest.raises(InvalidCommandError):
            CountCommand(0, 1.0)

    def test_enumerate_writes_csv(self, command_context, out_dir):
        result = EnumerateCommand(1, component=0).execute(command_context)
        rows = read_csv(out_dir / "indices.csv")
        assert rows[0] == ["component", "k0", "k1", "kt1", "weight", "order"]
        # component {0} x angle: 2 free columns, 5 indices of order <= 1
        assert len(rows) - 1 == 5
        assert all(row[2] == "0" for row in rows[1:])
        assert "5 indices" in result

    def test_enumerate_bad_component(self, command_context):
        with pytest.raises(InvalidCommandError):
            EnumerateCommand(1, component=9).execute(command_context)


class TestApproxCommands:
    """Tests for the approximation-function commands"""

    def test_gamma(self, command_context):
        result = GammaCommand(mu=1.0, rho=2.0).execute(command_context)
        # sup sqrt(t) - t = 1/4 at t = 1/4
        first = result.splitlines()[0]
        assert first.startswith("Gamma0(1.0) = ")
        assert float(first.split("=")[1]) == pytest.approx(math.exp(0.25), rel=1e-6)

    def test_psi_writes_report(self, command_context, out_dir):
        PsiCommand(refine=5).execute(command_context)
        report = json.loads((out_dir / "psi.json").read_text(encoding="utf-8"))
        assert report["_header"]["app"] == "kam-workbench"
        assert report["terms"] >= 1
        assert report["refinement_change"] < 1e-6
        assert report["log_product"] == pytest.approx(report["log_psi0"] + report["log_psi1"])

    def test_check(self, command_context):
        result = CheckCommand(t_max=1e4).execute(command_context)
        assert "⚠" not in result
        assert "Delta(0) = 1" in result


class TestResonanceCommands:
    """Tests for the resonance commands"""

    def test_scan_writes_certificate(self, command_context, out_dir):
        ScanCommand(alpha=1e-12, order_cap=3).execute(command_context)
        certificate = json.loads((out_dir / "certificate.json").read_text(encoding="utf-8"))
        assert certificate["order_cap"] == 3
        assert certificate["checked"] > 0
        assert certificate["worst_margin"] >= 0
        assert certificate["omega_tilde"] == [pytest.approx(1.618033988749895)]

    def test_scan_with_extended_divisors(self, command_context, out_dir):
        output = ScanCommand(alpha=1e-12, order_cap=3, extended=True).execute(command_context)
        certificate = json.loads((out_dir / "certificate.json").read_text(encoding="utf-8"))
        assert set(certificate["extended"]) == {
            "passed",
            "worst_margin",
            "worst_point",
            "checked_points",
            "checked_indices",
        }
        assert "extended divisors" in output

    def test_scan_without_parameter(self, command_context, out_dir):
        ScanCommand(alpha=1e-12, order_cap=3, no_parameter=True).execute(command_context)
        certificate = json.loads((out_dir / "certificate.json").read_text(encoding="utf-8"))
        assert certificate["omega_tilde"] is None
        # spatial indices of order <= 3 on two columns, k != 0
        assert certificate["checked"] == 24

    def test_measure_writes_csv(self, command_context, out_dir):
        MeasureCommand(alphas=[1e-2], samples=2000).execute(command_context)
        rows = read_csv(out_dir / "measure.csv")
        assert rows[0] == ["alpha", "fraction", "ci_lo", "ci_hi", "union_bound", "seed"]
        assert len(rows) == 2
        alpha, fraction, ci_lo, ci_hi, bound, seed = rows[1]
        assert float(alpha) == 1e-2
        assert float(ci_lo) <= float(fraction) <= float(ci_hi)
        assert int(seed) == command_context.config.output.seed


class TestKamCommands:
    """Tests for the KAM commands"""

    def test_build_problem_toy_passes_gate(self, command_context):
        hamiltonian, schedule = build_problem(command_context)
        norm = hamiltonian.perturbation_norm(schedule.m, schedule.r, schedule.s)
        assert 0 < norm / schedule.s <= schedule.E0
        schedule.gate(norm)

    def test_step_writes_report(self, step_config, mock_display_manager):
        from output_writer import ResultWriter

        writer = ResultWriter(step_config.output.out_dir, 1, step_config.config_hash())
        context = CommandContext(step_config, mock_display_manager, writer)
        result = StepCommand(mu=0.25, rho=0.25).execute(context)

        data = json.loads((step_config.output.out_dir / "step.json").read_text(encoding="utf-8"))
        report = data["report"]
        assert report["measured_norm"] <= report["bound_rhs"]
        assert report["measured_norm"] < 1e-3 * report["input_norm"]
        assert report["homological_residual"] <= 1e-10 * report["input_norm"]
        assert "|||P+|||" in result

    def test_oscillator_step_contracts_quadratically(
        self, toy_config_data, write_config, tmp_path, mock_display_manager
    ):
        from config import load_config
        from output_writer import ResultWriter

        toy_config_data["delta"] = {"kind": "table", "knots": [[0.0, 1.0]]}
        toy_config_data["hamiltonian"]["source"] = "oscillator"
        contraction = {}
        for eps in (1e-6, 1e-7):
            toy_config_data["oscillator"]["epsilon"] = eps
            config = load_config(write_config(toy_config_data, name=f"osc_{eps:g}.json")).with_output(
                out_dir=tmp_path / f"out_{eps:g}"
            )
            writer = ResultWriter(config.output.out_dir, 1, config.config_hash())
            StepCommand().execute(CommandContext(config, mock_display_manager, writer))

            data = json.loads((config.output.out_dir / "step.json").read_text(encoding="utf-8"))
            state, report = data["state"], data["report"]
            assert state["s"] == pytest.approx(math.sqrt(eps))
            assert (state["mu"], state["rho"]) == pytest.approx((0.5, 0.2))
            assert 0.0 < report["measured_norm"] < report["bound_rhs"]
            assert report["homological_residual"] <= 1e-10 * report["input_norm"]
            contraction[eps] = report["measured_norm"] / report["input_norm"] ** 2

        # P is led by the z^2 term of h, which survives through the eta^2
        # remainder: P+ ~ eta^2 P ~ P^2 / s with s = eps^(1/2)
        scaled = {eps: c * math.sqrt(eps) for eps, c in contraction.items()}
        assert all(math.isfinite(c) and c > 0 for c in contraction.values())
        assert scaled[1e-7] == pytest.approx(scaled[1e-6], rel=0.05)


class TestOscillatorCommands:
    """Tests for the oscillator commands"""

    def test_period(self, command_context):
        result = PeriodCommand(l=1, rho0=1.0).execute(command_context)
        lines = result.splitlines()
        assert float(lines[0].split("=")[1]) == pytest.approx(7.41630, abs=1e-5)
        assert float(lines[1].split("=")[1]) == pytest.approx(1.15635, abs=1e-4)

    def test_period_harmonic(self, command_context):
        result = PeriodCommand(l=0).execute(command_context)
        assert len(result.splitlines()) == 1

    def test_trig_writes_table(self, command_context, out_dir):
        TrigCommand(l=1, every=64).execute(command_context)
        rows = read_csv(out_dir / "trig_l1.csv")
        assert rows[0] == ["t", "C", "S"]
        assert float(rows[1][0]) == 0.0
        assert float(rows[1][1]) == pytest.approx(1.0)
        assert float(rows[1][2]) == pytest.approx(0.0, abs=1e-12)

    def test_build_ham_reports_without_gate(self, command_context, out_dir):
        result = BuildHamCommand(enforce_gate=False).execute(command_context)
        data = json.loads((out_dir / "hamiltonian.json").read_text(encoding="utf-8"))
        assert data["epsilon"] == 1e-6
        assert data["s"] == pytest.approx(1e-3)
        assert data["norm"] > 0
        assert data["forcing"]["l"] == 1
        assert 0 < data["E0"] < data["scaled_norm"]
        assert data["gate_passed"] is False
        assert (out_dir / "spectrum.csv").exists()
        assert "s^-1|||P||| > E0" in result

    def test_build_ham_enforces_gate_by_default(self, command_context, out_dir):
        assert command_context.config.oscillator.enforce_gate is True
        with pytest.raises(GateFailed) as exc_info:
            BuildHamCommand().execute(command_context)
        assert exc_info.value.context["inequality"] == "s^-1|||P||| <= E0"
        assert not (out_dir / "hamiltonian.json").exists()

    def test_build_ham_uses_configured_sequences(self, command_context):
        sequences = command_context.config.oscillator_sequences()
        assert sequences.decay == "inverse-square"
        assert (sequences.mu_total, sequences.rho_total) == pytest.approx((0.5, 0.2))

        # power-exp Delta with geometric sequences has no finite Psi
        command_context.config.schedule.decay = "geometric"
        with pytest.raises(Divergence):
            BuildHamCommand(enforce_gate=False).execute(command_context)

    def test_simulate_unforced(self, command_context, out_dir):
        SimulateCommand(T=10.0, dt=0.01, record_every=10, unforced=True).execute(command_context)
        rows = read_csv(out_dir / "traj.csv")
        assert rows[0] == ["t", "x", "v", "energy", "sup_so_far"]
        assert len(rows) - 1 == 101
        details = json.loads((out_dir / "simulation.json").read_text(encoding="utf-8"))
        assert details["metadata"]["unforced"] is True
        assert details["energy_drift"] < 1e-6
        assert len(details["metadata"]["solution_frequency"]) == 3


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
