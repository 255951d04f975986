# src/commands/approx_commands.py
from typing import Optional

from .base import Command, CommandContext
from approx import (
    check_delta_properties,
    gamma0,
    gamma1,
    gamma_ratio_diagnostic,
    partial_psi,
    psi_factors,
)
from constants import ICON_SUCCESS, ICON_WARNING, SEPARATOR_LINE, SUCCESS_WROTE_FILE


class GammaCommand(Command):
    """Gamma0(mu), Gamma1(rho) and the Gamma0 <= rho Gamma1 comparison"""

    writes_output = False

    def __init__(self, mu: Optional[float] = None, rho: Optional[float] = None):
        super().__init__()
        self.mu = mu
        self.rho = rho

    def execute(self, context: CommandContext) -> str:
        mu = self.mu if self.mu is not None else context.config.schedule.mu
        rho = self.rho if self.rho is not None else context.config.schedule.rho
        g0 = gamma0(context.delta, mu)
        g1 = gamma1(context.delta, rho)
        r0, rg1, holds = gamma_ratio_diagnostic(context.delta, rho)
        icon = ICON_SUCCESS if holds else ICON_WARNING
        return "\n".join(
            [
                f"Gamma0({mu!r}) = {g0!r}",
                f"Gamma1({rho!r}) = {g1!r}",
                f"{icon} Gamma0({rho!r}) = {r0!r} vs rho*Gamma1(rho) = {rg1!r}",
            ]
        )


class PsiCommand(Command):
    """Psi0 * Psi1 for the configured sequences, with a refinement check"""

    def __init__(self, refine: int = 10, out: str = "psi.json"):
        """
        Args:
                refine: Extra terms used for the partial-product refinement
                out: JSON report file
        """
        super().__init__()
        self.refine = refine
        self.out = out

    def execute(self, context: CommandContext) -> str:
        """
        Raises:
                Divergence: If the product does not converge
        """
        sequences = context.config.schedule.sequences()
        result = psi_factors(context.delta, sequences)
        refined = partial_psi(context.delta, sequences, result.terms + self.refine)
        report = {
            "delta": context.delta.to_dict(),
            "log_psi0": result.log_psi0,
            "log_psi1": result.log_psi1,
            "log_product": result.log_product,
            "terms": result.terms,
            "tail_estimate": result.tail_estimate,
            "refined_log_product": refined,
            "refinement_change": abs(refined - result.log_product),
        }
        path = self.require_writer(context).write_json(self.out, report)
        return "\n".join(
            [
                SEPARATOR_LINE,
                f"Psi0 = {result.psi0!r}",
                f"Psi1 = {result.psi1!r}",
                f"log(Psi0 Psi1) = {result.log_product!r} after {result.terms} terms",
                f"log change with {self.refine} more terms: {report['refinement_change']!r}",
                SUCCESS_WROTE_FILE.format(path=path),
                SEPARATOR_LINE,
            ]
        )


class CheckCommand(Command):
    """Check the defining properties of the configured approximation function"""

    writes_output = False

    def __init__(self, t_max: float = 1.0e6, strict: bool = False):
        super().__init__()
        self.t_max = t_max
        self.strict = strict

    def execute(self, context: CommandContext) -> str:
        """
        Raises:
                PropertyViolation: If strict and a property fails
        """
        report = check_delta_properties(context.delta, t_max=self.t_max, strict=self.strict)
        checks = [
            ("Delta(0) = 1", report.at_zero),
            ("nondecreasing", report.nondecreasing),
            ("log Delta(t)/t nonincreasing", report.log_ratio_nonincreasing),
            ("int log Delta(t)/t^2 converges", report.integral_converges),
        ]
        lines = [f"{ICON_SUCCESS if ok else ICON_WARNING} {name}" for name, ok in checks]
        if report.block_ratios:
            lines.append(f"largest dyadic block ratio: {max(report.block_ratios)!r}")
        return "\n".join(lines)
