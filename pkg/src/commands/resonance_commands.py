# src/commands/resonance_commands.py
import math
from dataclasses import asdict
from typing import Optional, Sequence

from scipy.stats import linregress

from .base import Command, CommandContext
from constants import ICON_SUCCESS, ICON_WARNING, MEASURE_COLUMNS, SEPARATOR_LINE, SUCCESS_WROTE_FILE
from resonance import FrequencyBox, check_extended_divisors, measure_estimate, scan


class ScanCommand(Command):
    """Exhaustive nonresonance scan within the configured caps"""

    def __init__(
        self,
        omega_tilde: Optional[Sequence[float]] = None,
        alpha: Optional[float] = None,
        weight_cap: Optional[float] = None,
        order_cap: Optional[int] = None,
        no_parameter: bool = False,
        extended: bool = False,
        out: str = "certificate.json",
    ):
        """
        Args:
                omega_tilde: Internal frequency (default: the configured one)
                alpha: Nonresonance constant
                weight_cap, order_cap: Scope of the scan
                no_parameter: Scan the spatial condition on omega alone
                extended: Also sample the halved inequality around omega_tilde
                        with h, mu, rho and K of the first scheduled step
                out: JSON certificate file
        """
        super().__init__()
        self.omega_tilde = omega_tilde
        self.alpha = alpha
        self.weight_cap = weight_cap
        self.order_cap = order_cap
        self.no_parameter = no_parameter
        self.extended = extended
        self.out = out

    def execute(self, context: CommandContext) -> str:
        """
        Raises:
                Violation: With the offending index and both sides of the inequality
        """
        cfg = context.config.resonance
        omega_tilde = None
        if not self.no_parameter:
            omega_tilde = self.omega_tilde if self.omega_tilde is not None else cfg.omega_tilde
        certificate = scan(
            context.config.frequency(),
            omega_tilde,
            context.config.structure(),
            context.delta,
            self.alpha if self.alpha is not None else cfg.alpha,
            self.weight_cap if self.weight_cap is not None else cfg.weight_cap,
            self.order_cap if self.order_cap is not None else cfg.order_cap,
            threads=context.config.output.threads,
            budget=cfg.budget,
        )
        data = certificate.to_dict()
        lines = [
            f"{ICON_SUCCESS} nonresonant over {certificate.checked} indices "
            f"(weight <= {certificate.weight_cap!r}, order <= {certificate.order_cap})",
            f"worst index {certificate.worst_mode}: margin {certificate.worst_margin!r}",
        ]
        if self.extended and omega_tilde is not None:
            report = self._extended(context, omega_tilde)
            data["extended"] = asdict(report)
            icon = ICON_SUCCESS if report.passed else ICON_WARNING
            lines.append(
                f"{icon} extended divisors on {report.checked_indices} indices at "
                f"{report.checked_points} points: worst margin {report.worst_margin!r}"
            )
        path = self.require_writer(context).write_json(self.out, data)
        lines.append(SUCCESS_WROTE_FILE.format(path=path))
        return "\n".join(lines)

    def _extended(self, context: CommandContext, omega_tilde):
        cfg = context.config.resonance
        state = context.config.schedule.schedule(context.delta).state(0)
        return check_extended_divisors(
            context.config.frequency(),
            omega_tilde,
            state.h,
            context.config.structure(),
            context.delta,
            self.alpha if self.alpha is not None else cfg.alpha,
            state.mu,
            state.rho,
            state.K,
            self.weight_cap if self.weight_cap is not None else cfg.weight_cap,
            self.order_cap if self.order_cap is not None else cfg.order_cap,
            seed=context.config.output.seed,
        )


class MeasureCommand(Command):
    """Monte-Carlo measure of resonant parameters for one or more alphas"""

    def __init__(
        self,
        alphas: Optional[Sequence[float]] = None,
        samples: Optional[int] = None,
        out: str = "measure.csv",
    ):
        super().__init__()
        self.alphas = alphas
        self.samples = samples
        self.out = out

    def execute(self, context: CommandContext) -> str:
        cfg = context.config.resonance
        alphas = list(self.alphas) if self.alphas else list(cfg.alphas)
        samples = self.samples if self.samples is not None else cfg.samples
        box = FrequencyBox.from_dict(cfg.box)
        seed = context.config.output.seed

        estimates = [
            measure_estimate(
                context.config.frequency(),
                context.config.structure(),
                context.delta,
                alpha,
                box,
                cfg.weight_cap,
                cfg.order_cap,
                samples,
                seed=seed,
                threads=context.config.output.threads,
                budget=cfg.budget,
            )
            for alpha in alphas
        ]
        path = self.require_writer(context).write_csv(
            self.out, MEASURE_COLUMNS, [e.as_row() for e in estimates]
        )

        lines = [SEPARATOR_LINE]
        for e in estimates:
            icon = ICON_SUCCESS if e.fraction <= e.union_bound else ICON_WARNING
            lines.append(
                f"{icon} alpha={e.alpha!r}: fraction {e.fraction!r} "
                f"[{e.ci_lo!r}, {e.ci_hi!r}], union bound {e.union_bound!r}"
            )
        usable = [e for e in estimates if e.fraction > 0]
        if len(usable) >= 2:
            fit = linregress(
                [math.log(e.alpha) for e in usable], [math.log(e.fraction) for e in usable]
            )
            lines.append(f"log-log slope: {fit.slope!r}")
        lines.append(SUCCESS_WROTE_FILE.format(path=path))
        lines.append(SEPARATOR_LINE)
        return "\n".join(lines)
