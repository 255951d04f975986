# src/commands/base.py
"""
Base command interface and context for the command pattern.
"""
from abc import ABC, abstractmethod
from typing import Any, Dict, Optional
from dataclasses import dataclass

from constants import ERROR_CONFIG_REQUIRED


@dataclass
class GlobalOptions:
	"""
	Options shared by every subcommand; None means "use the configuration".
	"""
	config: Optional[str] = None
	out_dir: Optional[str] = None
	seed: Optional[int] = None
	threads: Optional[int] = None
	log_level: Optional[str] = None
	summary: bool = False

	def overrides(self) -> Dict[str, Any]:
		"""Output settings given on the command line"""
		values = {
			'out_dir': self.out_dir,
			'seed': self.seed,
			'threads': self.threads,
			'log_level': self.log_level,
		}
		return {k: v for k, v in values.items() if v is not None}


@dataclass
class CommandContext:
	"""
	Context object passed to all commands containing necessary dependencies.
	"""
	config: Any  # AppConfig instance
	display_manager: Any  # ConsoleOutputManager instance
	writer: Any = None  # ResultWriter instance (None for commands that write nothing)
	delta: Any = None  # ApproxFunction built from the configuration

	def __post_init__(self):
		"""Validate that required dependencies are present"""
		if self.config is None:
			raise ValueError(ERROR_CONFIG_REQUIRED)
		if self.delta is None:
			self.delta = self.config.delta.delta()


class Command(ABC):
	"""
	Abstract base class for all commands.
	
	All commands should inherit from this class and implement the execute method.
	"""

	#: Whether the command writes result files into the output directory
	writes_output: bool = True

	def __init__(self):
		self.options = GlobalOptions()

	@abstractmethod
	def execute(self, context: CommandContext) -> str:
		"""
		Execute the command with the given context.
		
		Args:
			context: CommandContext containing dependencies
			
		Returns:
			String summary of the command execution
			
		Raises:
			WorkbenchError: If a validation or numerical check fails
		"""
		pass

	def require_writer(self, context: CommandContext):
		"""
		Raises:
			CommandError: If the context has no result writer
		"""
		if context.writer is None:
			raise CommandError(f"{type(self).__name__} needs a result writer")
		return context.writer


class CommandError(Exception):
	"""Base exception for command execution errors"""
	pass


class InvalidCommandError(CommandError, ValueError):
	"""Raised when command syntax is invalid"""
	pass
