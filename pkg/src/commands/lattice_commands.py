# src/commands/lattice_commands.py
from typing import List, Optional, Sequence

import numpy as np

from .base import Command, CommandContext, InvalidCommandError
from constants import SEPARATOR_LINE, SUCCESS_WROTE_FILE
from lattice import IndexVector, distribution_count, enumerate_indices, support_weight, weight


class WeightCommand(Command):
    """Weight of an index set, or of the support of an index vector"""

    writes_output = False

    def __init__(
        self,
        subset: Optional[Sequence[int]] = None,
        k: Optional[Sequence[int]] = None,
        rho_w: Optional[float] = None,
    ):
        """
        Args:
                subset: Explicit index set A
                k: Dense vector over the window; its support is weighed
                rho_w: Weight exponent (default: the configured one)
        """
        super().__init__()
        if (subset is None) == (k is None):
            raise InvalidCommandError("lattice weight needs exactly one of --subset or --k")
        self.subset = subset
        self.k = k
        self.rho_w = rho_w

    def execute(self, context: CommandContext) -> str:
        rho_w = self.rho_w if self.rho_w is not None else context.config.lattice.rho_w
        if self.subset is not None:
            value = weight(self.subset, rho_w)
            return f"[{sorted(set(self.subset))}] = {value!r}"

        structure = context.config.structure()
        window = structure.window
        if len(self.k) != window.size:
            raise InvalidCommandError(
                f"--k needs {window.size} entries for window [{window.lo}, {window.hi}]"
            )
        vector = IndexVector.from_dense(window, self.k)
        spatial = support_weight(vector, structure.base)
        product = structure.support_weight(self.k)
        return (
            f"support {sorted(vector.support)}: [[k]] = {spatial!r}, "
            f"[[(k, k~)]] = {product!r}"
        )


class CountCommand(Command):
    """Distribution count N_i(t) of the configured structure"""

    writes_output = False

    def __init__(self, i: int, t: float):
        super().__init__()
        if i < 1:
            raise InvalidCommandError(f"--i must be >= 1, got {i}")
        self.i = i
        self.t = t

    def execute(self, context: CommandContext) -> str:
        count = distribution_count(context.config.structure().base, self.i, self.t)
        return f"N_{self.i}({self.t!r}) = {count}"


class EnumerateCommand(Command):
    """Enumerate the indices of one or all product components up to an order cap"""

    def __init__(self, order_cap: int, component: Optional[int] = None, out: str = "indices.csv"):
        super().__init__()
        self.order_cap = order_cap
        self.component = component
        self.out = out

    def _columns(self, structure) -> List[str]:
        window = [f"k{i}" for i in structure.window.indices]
        angles = [f"kt{b}" for b in range(1, structure.n + 1)]
        return ["component"] + window + angles + ["weight", "order"]

    def execute(self, context: CommandContext) -> str:
        """
        Raises:
                InvalidCommandError: If the component index is out of range
                CapTooLarge: If a component exceeds the enumeration budget
        """
        structure = context.config.structure()
        components = structure.components()
        if self.component is not None and not 0 <= self.component < len(components):
            raise InvalidCommandError(
                f"--component must lie in 0..{len(components) - 1}, got {self.component}"
            )
        selected = range(len(components)) if self.component is None else [self.component]

        rows = []
        budget = context.config.resonance.budget
        for idx in selected:
            positions = structure.component_positions(idx)
            modes = enumerate_indices(positions, structure.dim, self.order_cap, budget)
            w = components[idx][1]
            orders = np.abs(modes).sum(axis=1)
            rows.extend((idx, *mode, w, int(o)) for mode, o in zip(modes.tolist(), orders))

        writer = self.require_writer(context)
        path = writer.write_csv(self.out, self._columns(structure), rows)
        lines = [SEPARATOR_LINE]
        for idx in selected:
            subset, w = components[idx]
            lines.append(f"component {idx}: {sorted(subset)} x angles, weight {w!r}")
        lines.append(f"{len(rows)} indices with order <= {self.order_cap}")
        lines.append(SUCCESS_WROTE_FILE.format(path=path))
        lines.append(SEPARATOR_LINE)
        return "\n".join(lines)
