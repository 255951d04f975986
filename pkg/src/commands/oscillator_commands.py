# src/commands/oscillator_commands.py
import logging
from typing import Optional

from .base import Command, CommandContext
from constants import (
    ICON_SUCCESS,
    ICON_WARNING,
    SECTION_COLUMNS,
    SEPARATOR_LINE,
    SPECTRUM_COLUMNS,
    SUCCESS_WROTE_FILE,
    TRAJECTORY_COLUMNS,
    TRIG_COLUMNS,
    TRIG_SAMPLES,
)
from oscillator import ActionAngleChart, ForcingSpec, build_hamiltonian, gen_trig, period, simulate

logger = logging.getLogger(__name__)


class TrigCommand(Command):
    """Tabulate the generalized trigonometric functions C, S"""

    def __init__(
        self, l: Optional[int] = None, samples: int = TRIG_SAMPLES, every: int = 1, out: Optional[str] = None
    ):
        super().__init__()
        self.l = l
        self.samples = samples
        self.every = every
        self.out = out

    def execute(self, context: CommandContext) -> str:
        """
        Raises:
                PropertyViolation: If a defining identity of C, S fails
        """
        l = self.l if self.l is not None else context.config.oscillator.l
        trig = gen_trig(l, self.samples)
        report = trig.check_properties()
        out = self.out or f"trig_l{l}.csv"
        path = self.require_writer(context).write_csv(out, TRIG_COLUMNS, trig.rows(self.every))
        lines = [f"T_*({l}) = {trig.period!r}"]
        lines += [f"{ICON_SUCCESS} {name}: {value!r}" for name, value in report.items()]
        lines.append(SUCCESS_WROTE_FILE.format(path=path))
        return "\n".join(lines)


class PeriodCommand(Command):
    """Period T_* and, for l >= 1, the frequency map at the configured action"""

    writes_output = False

    def __init__(self, l: Optional[int] = None, rho0: Optional[float] = None):
        super().__init__()
        self.l = l
        self.rho0 = rho0

    def execute(self, context: CommandContext) -> str:
        l = self.l if self.l is not None else context.config.oscillator.l
        rho0 = self.rho0 if self.rho0 is not None else context.config.oscillator.rho0
        lines = [f"T_*({l}) = {period(l)!r}"]
        if l > 0:
            chart = ActionAngleChart.for_l(l)
            lines.append(f"w~({rho0!r}) = {float(chart.frequency_of_action(rho0))!r}")
            lines.append(f"dw~/drho({rho0!r}) = {float(chart.nondegeneracy(rho0))!r}")
        return "\n".join(lines)


class BuildHamCommand(Command):
    """Assemble the KAM Hamiltonian of the rescaled oscillator"""

    def __init__(
        self,
        enforce_gate: Optional[bool] = None,
        out: str = "hamiltonian.json",
        spectrum: str = "spectrum.csv",
    ):
        super().__init__()
        self.enforce_gate = enforce_gate
        self.out = out
        self.spectrum = spectrum

    def execute(self, context: CommandContext) -> str:
        """
        Raises:
                GateFailed: If the gate is enforced and s^-1 |||P||| > E0
                Divergence: If Psi diverges for the configured delta and sequences
        """
        config = context.config
        osc = config.oscillator
        enforce = self.enforce_gate if self.enforce_gate is not None else osc.enforce_gate
        kwargs = dict(
            rho0=osc.rho0,
            structure=config.structure(),
            m=osc.m,
            r=osc.r,
            degree=osc.degree,
            harmonic_cap=osc.harmonic_cap,
        )
        spec = osc.forcing(config.frequency())
        logger.info("osc build-ham: eps=%g, rho0=%g, enforce_gate=%s", osc.epsilon, osc.rho0, enforce)
        built = build_hamiltonian(
            spec,
            delta=context.delta,
            sequences=config.oscillator_sequences(),
            enforce_gate=enforce,
            **kwargs,
        )

        writer = self.require_writer(context)
        data = built.to_dict()
        data["forcing"] = spec.to_dict()
        json_path = writer.write_json(self.out, data)
        spectrum_path = writer.write_csv(
            self.spectrum, SPECTRUM_COLUMNS, built.hamiltonian.perturbation.spectrum(built.s)
        )

        if built.gate_passed:
            gate = f"{ICON_SUCCESS} s^-1|||P||| <= E0 = {built.E0!r}"
        else:
            gate = f"{ICON_WARNING} s^-1|||P||| > E0 = {built.E0!r}"
        return "\n".join(
            [
                SEPARATOR_LINE,
                f"eps = {built.system.epsilon!r}, s = {built.s!r}",
                f"|||P||| = {built.norm!r} (|||P|||/eps = {built.constant_estimate!r})",
                f"s^-1|||P||| = {built.scaled_norm!r}",
                gate,
                SUCCESS_WROTE_FILE.format(path=json_path),
                SUCCESS_WROTE_FILE.format(path=spectrum_path),
                SEPARATOR_LINE,
            ]
        )


class SimulateCommand(Command):
    """Integrate the forced oscillator and record trajectory, section and drift"""

    def __init__(
        self,
        T: Optional[float] = None,
        dt: Optional[float] = None,
        integrator: Optional[str] = None,
        x0: Optional[float] = None,
        v0: Optional[float] = None,
        record_every: Optional[int] = None,
        unforced: bool = False,
        out: str = "traj.csv",
        section: str = "section.csv",
        details: str = "simulation.json",
    ):
        super().__init__()
        self.T = T
        self.dt = dt
        self.integrator = integrator
        self.x0 = x0
        self.v0 = v0
        self.record_every = record_every
        self.unforced = unforced
        self.out = out
        self.section = section
        self.details = details

    def _pick(self, name: str, osc):
        value = getattr(self, name)
        return value if value is not None else getattr(osc, name)

    def execute(self, context: CommandContext) -> str:
        """
        Raises:
                StepRejected: If the integration fails
        """
        config = context.config
        osc = config.oscillator
        spec = osc.forcing(config.frequency())
        if self.unforced:
            spec = ForcingSpec(spec.l, spec.frequency, {}, spec.epsilon)
        result = simulate(
            spec,
            self._pick("x0", osc),
            self._pick("v0", osc),
            self._pick("T", osc),
            self._pick("dt", osc),
            integrator=self._pick("integrator", osc),
            record_every=self._pick("record_every", osc),
            section_phase=osc.section_phase,
        )

        metadata = dict(result.metadata)
        metadata["unforced"] = self.unforced
        if spec.l > 0:
            chart = ActionAngleChart.for_l(spec.l)
            metadata["solution_frequency"] = list(
                spec.frequency.scaled(spec.epsilon**spec.l).values
            ) + [float(chart.frequency_of_action(osc.rho0))]

        writer = self.require_writer(context)
        traj_path = writer.write_csv(self.out, TRAJECTORY_COLUMNS, result.trajectory_rows())
        section_path = writer.write_csv(self.section, SECTION_COLUMNS, result.section_rows())
        details_path = writer.write_json(
            self.details,
            {
                "metadata": metadata,
                "sup": result.sup,
                "energy_drift": result.energy_drift,
                "drift_slope": result.drift_slope,
            },
        )
        return "\n".join(
            [
                SEPARATOR_LINE,
                f"sup|x| = {result.sup!r}",
                f"amplitude drift slope = {result.drift_slope!r}",
                f"relative energy change = {result.energy_drift!r}",
                SUCCESS_WROTE_FILE.format(path=traj_path),
                SUCCESS_WROTE_FILE.format(path=section_path),
                SUCCESS_WROTE_FILE.format(path=details_path),
                SEPARATOR_LINE,
            ]
        )
