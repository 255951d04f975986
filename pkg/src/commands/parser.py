# src/commands/parser.py
"""
Command parser for converting command-line arguments into Command objects.
"""
import argparse
from typing import List, Optional, Sequence

from .base import Command, GlobalOptions, InvalidCommandError
from .approx_commands import CheckCommand, GammaCommand, PsiCommand
from .kam_commands import RunCommand, StepCommand
from .lattice_commands import CountCommand, EnumerateCommand, WeightCommand
from .oscillator_commands import BuildHamCommand, PeriodCommand, SimulateCommand, TrigCommand
from .resonance_commands import MeasureCommand, ScanCommand
from constants import APP_DESCRIPTION, APP_NAME, APP_VERSION, INTEGRATORS, TRIG_SAMPLES


class _RaisingParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting on usage errors"""

    def error(self, message):
        raise InvalidCommandError(f"{self.prog}: {message}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


class CommandParser:
    """
    Parses command-line arguments and returns appropriate Command objects.

    Global options (--config, --out-dir, --seed, --threads, --log-level,
    --summary) are accepted before or after the subcommand.
    """

    def __init__(self):
        self._parser = self._build()

    def _globals(self) -> argparse.ArgumentParser:
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--config", default=argparse.SUPPRESS, help="JSON run configuration")
        common.add_argument("--out-dir", default=argparse.SUPPRESS, help="Output directory")
        common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Random seed")
        common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="Worker cap")
        common.add_argument("--log-level", default=argparse.SUPPRESS, help="Logging level")
        common.add_argument(
            "--summary", action="store_true", default=argparse.SUPPRESS,
            help="Print the title banner and configuration summary first",
        )
        return common

    def _build(self) -> argparse.ArgumentParser:
        common = self._globals()
        parser = _RaisingParser(prog=APP_NAME, description=APP_DESCRIPTION, parents=[common])
        parser.add_argument("--version", action="version", version=f"{APP_NAME} {APP_VERSION}")
        areas = parser.add_subparsers(dest="area", required=True, parser_class=_RaisingParser)

        def leaf(group, name, help_text):
            return group.add_parser(name, help=help_text, parents=[common])

        # lattice
        lattice = areas.add_parser("lattice", help="Index lattice and spatial structures")
        ops = lattice.add_subparsers(dest="op", required=True, parser_class=_RaisingParser)
        p = leaf(ops, "weight", "Weight of an index set or of a support")
        p.add_argument("--subset", type=_int_list)
        p.add_argument("--k", type=_int_list)
        p.add_argument("--rho-w", type=float)
        p = leaf(ops, "count", "Distribution count N_i(t)")
        p.add_argument("--i", type=int, required=True)
        p.add_argument("--t", type=float, required=True)
        p = leaf(ops, "enumerate", "Enumerate component indices up to an order cap")
        p.add_argument("--order-cap", type=int, default=3)
        p.add_argument("--component", type=int)
        p.add_argument("--out", default="indices.csv")

        # approx
        approx = areas.add_parser("approx", help="Approximation functions and Psi products")
        ops = approx.add_subparsers(dest="op", required=True, parser_class=_RaisingParser)
        p = leaf(ops, "gamma", "Gamma0(mu) and Gamma1(rho)")
        p.add_argument("--mu", type=float)
        p.add_argument("--rho", type=float)
        p = leaf(ops, "psi", "Psi0 * Psi1 for the configured sequences")
        p.add_argument("--refine", type=int, default=10)
        p.add_argument("--out", default="psi.json")
        p = leaf(ops, "check", "Check the approximation function properties")
        p.add_argument("--t-max", type=float, default=1.0e6)
        p.add_argument("--strict", action="store_true")

        # resonance
        resonance = areas.add_parser("resonance", help="Small divisors and resonant measure")
        ops = resonance.add_subparsers(dest="op", required=True, parser_class=_RaisingParser)
        p = leaf(ops, "scan", "Exhaustive nonresonance scan")
        p.add_argument("--omega-tilde", type=_float_list)
        p.add_argument("--alpha", type=float)
        p.add_argument("--weight-cap", type=float)
        p.add_argument("--order-cap", type=int)
        p.add_argument("--no-parameter", action="store_true")
        p.add_argument("--extended", action="store_true", help="Also check the extended divisors around omega_tilde")
        p.add_argument("--out", default="certificate.json")
        p = leaf(ops, "measure", "Monte-Carlo resonant fraction")
        p.add_argument("--alpha", type=float, action="append", dest="alphas")
        p.add_argument("--samples", type=int)
        p.add_argument("--out", default="measure.csv")

        # kam
        kam = areas.add_parser("kam", help="KAM iteration")
        ops = kam.add_subparsers(dest="op", required=True, parser_class=_RaisingParser)
        p = leaf(ops, "run", "Iterate KAM steps under the schedule")
        p.add_argument("--jmax", type=int)
        p.add_argument("--stop-tol", type=float)
        p.add_argument("--out", default="report.csv")
        p.add_argument("--details", default="run.json")
        p = leaf(ops, "step", "Single KAM step")
        p.add_argument("--mu", type=float)
        p.add_argument("--rho", type=float)
        p.add_argument("--out", default="step.json")

        # osc
        osc = areas.add_parser("osc", help="Superquadratic oscillator")
        ops = osc.add_subparsers(dest="op", required=True, parser_class=_RaisingParser)
        p = leaf(ops, "trig", "Tabulate C and S")
        p.add_argument("--l", type=int)
        p.add_argument("--samples", type=int, default=TRIG_SAMPLES)
        p.add_argument("--every", type=int, default=1)
        p.add_argument("--out")
        p = leaf(ops, "period", "Period T_* and frequency map")
        p.add_argument("--l", type=int)
        p.add_argument("--rho0", type=float)
        p = leaf(ops, "build-ham", "Assemble the KAM Hamiltonian")
        p.add_argument("--enforce-gate", action=argparse.BooleanOptionalAction, default=None)
        p.add_argument("--out", default="hamiltonian.json")
        p.add_argument("--spectrum", default="spectrum.csv")
        p = leaf(ops, "simulate", "Integrate the forced oscillator")
        p.add_argument("--T", type=float)
        p.add_argument("--dt", type=float)
        p.add_argument("--integrator", choices=INTEGRATORS)
        p.add_argument("--x0", type=float)
        p.add_argument("--v0", type=float)
        p.add_argument("--record-every", type=int)
        p.add_argument("--unforced", action="store_true")
        p.add_argument("--out", default="traj.csv")
        p.add_argument("--section", default="section.csv")
        p.add_argument("--details", default="simulation.json")
        return parser

    def parse(self, argv: Sequence[str]) -> Command:
        """
        Parse command-line arguments and return a Command object.

        Args:
                argv: Arguments without the program name

        Returns:
                Command object carrying its GlobalOptions

        Raises:
                InvalidCommandError: If the arguments are invalid
        """
        args = self._parser.parse_args(list(argv))
        command = self._dispatch(args)
        command.options = GlobalOptions(
            config=getattr(args, "config", None),
            out_dir=getattr(args, "out_dir", None),
            seed=getattr(args, "seed", None),
            threads=getattr(args, "threads", None),
            log_level=getattr(args, "log_level", None),
            summary=getattr(args, "summary", False),
        )
        return command

    def _dispatch(self, args: argparse.Namespace) -> Command:
        parse_area = getattr(self, f"_parse_{args.area}_command")
        return parse_area(args)

    def _parse_lattice_command(self, args) -> Command:
        if args.op == "weight":
            return WeightCommand(subset=args.subset, k=args.k, rho_w=args.rho_w)
        if args.op == "count":
            return CountCommand(args.i, args.t)
        return EnumerateCommand(args.order_cap, component=args.component, out=args.out)

    def _parse_approx_command(self, args) -> Command:
        if args.op == "gamma":
            return GammaCommand(mu=args.mu, rho=args.rho)
        if args.op == "psi":
            return PsiCommand(refine=args.refine, out=args.out)
        return CheckCommand(t_max=args.t_max, strict=args.strict)

    def _parse_resonance_command(self, args) -> Command:
        if args.op == "scan":
            return ScanCommand(
                omega_tilde=args.omega_tilde,
                alpha=args.alpha,
                weight_cap=args.weight_cap,
                order_cap=args.order_cap,
                no_parameter=args.no_parameter,
                extended=args.extended,
                out=args.out,
            )
        return MeasureCommand(alphas=args.alphas, samples=args.samples, out=args.out)

    def _parse_kam_command(self, args) -> Command:
        if args.op == "run":
            return RunCommand(j_max=args.jmax, stop_tol=args.stop_tol, out=args.out, details=args.details)
        return StepCommand(mu=args.mu, rho=args.rho, out=args.out)

    def _parse_osc_command(self, args) -> Command:
        if args.op == "trig":
            return TrigCommand(l=args.l, samples=args.samples, every=args.every, out=args.out)
        if args.op == "period":
            return PeriodCommand(l=args.l, rho0=args.rho0)
        if args.op == "build-ham":
            return BuildHamCommand(enforce_gate=args.enforce_gate, out=args.out, spectrum=args.spectrum)
        return SimulateCommand(
            T=args.T,
            dt=args.dt,
            integrator=args.integrator,
            x0=args.x0,
            v0=args.v0,
            record_every=args.record_every,
            unforced=args.unforced,
            out=args.out,
            section=args.section,
            details=args.details,
        )

    def format_usage(self) -> str:
        return self._parser.format_usage()


# Convenience function for quick parsing
def parse_command(argv: Sequence[str]) -> Optional[Command]:
    """
    Parse command-line arguments and return a Command object.

    Raises:
            InvalidCommandError: If the arguments are invalid
    """
    parser = CommandParser()
    return parser.parse(argv)
