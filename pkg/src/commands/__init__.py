# src/commands/__init__.py
"""
Command pattern implementation for the KAM Workbench.

This package provides a clean separation between argument parsing,
execution, and presentation logic.
"""

from .base import (
	Command,
	CommandContext,
	CommandError,
	GlobalOptions,
	InvalidCommandError
)

from .lattice_commands import CountCommand, EnumerateCommand, WeightCommand
from .approx_commands import CheckCommand, GammaCommand, PsiCommand
from .resonance_commands import MeasureCommand, ScanCommand
from .kam_commands import RunCommand, StepCommand, build_problem
from .oscillator_commands import (
	BuildHamCommand,
	PeriodCommand,
	SimulateCommand,
	TrigCommand
)

from .parser import CommandParser, parse_command

__all__ = [
	# Base classes
	'Command',
	'CommandContext',
	'CommandError',
	'GlobalOptions',
	'InvalidCommandError',

	# Lattice
	'WeightCommand',
	'CountCommand',
	'EnumerateCommand',

	# Approximation functions
	'GammaCommand',
	'PsiCommand',
	'CheckCommand',

	# Resonance
	'ScanCommand',
	'MeasureCommand',

	# KAM
	'RunCommand',
	'StepCommand',
	'build_problem',

	# Oscillator
	'TrigCommand',
	'PeriodCommand',
	'BuildHamCommand',
	'SimulateCommand',

	# Parser
	'CommandParser',
	'parse_command',
]
