# src/commands/kam_commands.py
"""
KAM commands: the iterated scheme on the configured Hamiltonian, and a
single step with parameters derived from the perturbation itself.
"""
import logging
from dataclasses import asdict
from typing import Optional, Tuple

from .base import Command, CommandContext
from apseries import Analyticity
from constants import ICON_SUCCESS, KAM_REPORT_COLUMNS, SEPARATOR_LINE, SUCCESS_WROTE_FILE
from kam import Hamiltonian, KamSchedule, kam_step, run, standalone_state
from oscillator import build_hamiltonian

logger = logging.getLogger(__name__)


def build_problem(context: CommandContext) -> Tuple[Hamiltonian, KamSchedule]:
    """
    Initial Hamiltonian and schedule from the configuration.

    For the oscillator source the schedule takes m, r from the oscillator
    section, s = eps^(1/2), and the configured sequences with mu and rho
    rescaled by config.oscillator_sequences(). The smallness gate is left
    to run(); a standalone step checks its own preconditions.
    """
    config = context.config
    sched = config.schedule
    if config.hamiltonian.source == "oscillator":
        osc = config.oscillator
        sequences = config.oscillator_sequences()
        built = build_hamiltonian(
            osc.forcing(config.frequency()),
            rho0=osc.rho0,
            structure=config.structure(),
            m=osc.m,
            r=osc.r,
            degree=osc.degree,
            harmonic_cap=osc.harmonic_cap,
            delta=context.delta,
            sequences=sequences,
            enforce_gate=False,
        )
        logger.info(
            "oscillator problem: eps=%g, s=%.3e, s^-1|||P|||=%.3e, E0=%.3e",
            osc.epsilon,
            built.s,
            built.scaled_norm,
            built.E0,
        )
        schedule = KamSchedule(context.delta, sequences, m=osc.m, r=osc.r, s=built.s)
        return built.hamiltonian, schedule

    schedule = sched.schedule(context.delta)
    analyticity = Analyticity(m=sched.m, r=sched.r, s=sched.s, h=schedule.h, w=sched.w)
    hamiltonian = config.hamiltonian.hamiltonian(config.structure(), config.frequency(), analyticity)
    return hamiltonian, schedule


class RunCommand(Command):
    """Iterate KAM steps under the schedule and write the per-step report"""

    def __init__(
        self,
        j_max: Optional[int] = None,
        stop_tol: Optional[float] = None,
        out: str = "report.csv",
        details: str = "run.json",
    ):
        super().__init__()
        self.j_max = j_max
        self.stop_tol = stop_tol
        self.out = out
        self.details = details

    def execute(self, context: CommandContext) -> str:
        """
        Raises:
                GateFailed: If the initial smallness gate fails
                ErrorBoundExceeded: If a step leaves its bounds
        """
        sched = context.config.schedule
        j_max = self.j_max if self.j_max is not None else sched.j_max
        stop_tol = self.stop_tol if self.stop_tol is not None else sched.stop_tol
        hamiltonian, schedule = build_problem(context)
        logger.info("kam run: source=%s, j_max=%d", context.config.hamiltonian.source, j_max)
        result = run(hamiltonian, schedule, j_max=j_max, stop_tol=stop_tol)

        writer = self.require_writer(context)
        report_path = writer.write_csv(
            self.out, KAM_REPORT_COLUMNS, [r.as_row() for r in result.reports]
        )
        details = {
            "schedule": schedule.to_dict(),
            "identities": [dict(asdict(i), passed=i.passed) for i in result.identities],
            "states": [s.to_dict() for s in result.states],
            "steps": [asdict(r) for r in result.reports],
            "stopped_early": result.stopped_early,
            "final_normal_form": result.hamiltonian.normal.to_dict(),
        }
        details_path = writer.write_json(self.details, details)

        lines = [SEPARATOR_LINE]
        for r in result.reports:
            lines.append(
                f"j={r.j}: |||P+||| = {r.measured_norm!r} <= {r.bound_rhs!r}, "
                f"freq shift {r.frequency_shift!r}"
            )
        status = "stopped early" if result.stopped_early else f"{result.steps} steps"
        lines.append(f"{ICON_SUCCESS} KAM run complete ({status})")
        lines.append(SUCCESS_WROTE_FILE.format(path=report_path))
        lines.append(SUCCESS_WROTE_FILE.format(path=details_path))
        lines.append(SEPARATOR_LINE)
        return "\n".join(lines)


class StepCommand(Command):
    """A single KAM step with E = |||P|||/s, spending the whole mu and rho budget"""

    def __init__(self, mu: Optional[float] = None, rho: Optional[float] = None, out: str = "step.json"):
        super().__init__()
        self.mu = mu
        self.rho = rho
        self.out = out

    def execute(self, context: CommandContext) -> str:
        """
        Raises:
                SmallnessViolated: If the step preconditions fail
                ErrorBoundExceeded: If the new perturbation exceeds its bound
        """
        hamiltonian, schedule = build_problem(context)
        mu = self.mu if self.mu is not None else schedule.sequences.mu_total
        rho = self.rho if self.rho is not None else schedule.sequences.rho_total
        state = standalone_state(hamiltonian.perturbation, context.delta, mu, rho)
        new, _flow, inverse, report = kam_step(hamiltonian, state, delta=context.delta)

        path = self.require_writer(context).write_json(
            self.out,
            {
                "state": state.to_dict(),
                "report": asdict(report),
                "inverse_residual": inverse.residual,
                "normal_form": new.normal.to_dict(),
            },
        )
        return "\n".join(
            [
                f"|||P||| = {report.input_norm!r} -> |||P+||| = {report.measured_norm!r}",
                f"bound: {report.bound_rhs!r}",
                f"homological residual {report.homological_residual!r}, "
                f"symplectic residual {report.symplectic_residual!r}",
                SUCCESS_WROTE_FILE.format(path=path),
            ]
        )
