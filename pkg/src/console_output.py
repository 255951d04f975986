# src/console_output.py
from constants import (
    APP_TITLE,
    APP_VERSION,
    APP_DESCRIPTION,
    COLOR_OK,
    COLOR_END,
    COLOR_ERROR,
    ICON_ERROR,
    INFO_CONFIG_HASH,
    SEPARATOR_LINE,
)


class ConsoleOutputManager:
    """Manages console output and formatting for the KAM Workbench."""

    def __init__(self, color: bool = True) -> None:
        """
        Initialize the ConsoleOutputManager.

        Args:
                color: Wrap titles and errors in ANSI color codes
        """
        self.color = color

    def _paint(self, color: str, text: str) -> str:
        return f"{color}{text}{COLOR_END}" if self.color else text

    def print_error(self, error: Exception) -> None:
        """
        Print an error message in colored text.

        Args:
                error: The exception to display
        """
        print(self._paint(COLOR_ERROR, f"\nError: {error}"))

    def print_failure(self, kind: str, error: Exception) -> None:
        """
        Print a one-line failure such as "❌ Configuration error: ...".

        Args:
                kind: Failure category shown before the message
                error: The exception to display
        """
        print(f"{ICON_ERROR} {kind}: {error}")

    def print_gate_failure(self, error: Exception) -> None:
        """
        Print a failed smallness gate with the inequality and both sides.

        Args:
                error: GateFailed (or another error with lhs/rhs context)
        """
        self.print_failure("Numerical gate failure", error)
        context = getattr(error, "context", {}) or {}
        inequality = getattr(error, "inequality", "") or context.get("inequality", "")
        if inequality:
            print(f"Failed inequality: {inequality}")
        if "lhs" in context and "rhs" in context:
            print(f"  lhs = {context['lhs']!r}")
            print(f"  rhs = {context['rhs']!r}")

    def print_result(self, text: str) -> None:
        """Print the summary returned by a command."""
        if text:
            print(text)

    def print_config_hash(self, config_hash: str) -> None:
        print(INFO_CONFIG_HASH.format(config_hash=config_hash))

    def print_title(self) -> None:
        """Print the application title with colored formatting."""
        print(SEPARATOR_LINE)
        print(self._paint(COLOR_OK, f"\n{APP_TITLE}\nVersion: {APP_VERSION}\n"))
        print(APP_DESCRIPTION)
        print(SEPARATOR_LINE)
