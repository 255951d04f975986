# src/main.py
"""
Command-line entry point for the KAM Workbench.

Exit codes: 0 on success, 2 on usage or validation errors, 3 when a
numerical gate or bound fails, 1 for anything else.
"""
import logging
import sys
from typing import Optional, Sequence

from commands import CommandContext, InvalidCommandError
from console_output import ConsoleOutputManager
from constants import EXIT_GATE, EXIT_INTERNAL, EXIT_OK, EXIT_VALIDATION, LOG_FORMAT
from di_container import get_container, reset_container
from errors import GateFailed, NumericalError

logger = logging.getLogger(__name__)


def dispatch(argv: Sequence[str]) -> int:
    """
    Parse argv, run the selected command and map failures to exit codes.

    Args:
            argv: Arguments without the program name

    Returns:
            Process exit code
    """
    display_manager = ConsoleOutputManager()
    try:
        # Get the DI container (initializes all dependencies)
        container = get_container()
        display_manager = container.get("output_manager")
        command = container.get("command_parser").parse(argv)

        options = command.options
        container.configure(options.config, **options.overrides())
        config = container.get("config")
        logging.basicConfig(level=config.output.numeric_log_level, format=LOG_FORMAT, force=True)

        if options.summary:
            display_manager.print_title()
            config.print_summary()
            display_manager.print_config_hash(config.config_hash())

        writer = container.get("writer") if command.writes_output else None
        if writer is not None:
            writer.write_effective_config(config.to_dict())
        context = CommandContext(
            config=config,
            display_manager=display_manager,
            writer=writer,
            delta=container.get("delta"),
        )
        display_manager.print_result(command.execute(context))
        return EXIT_OK

    except SystemExit as e:
        # --help and --version
        return EXIT_OK if not e.code else EXIT_VALIDATION
    except InvalidCommandError as e:
        display_manager.print_failure("Usage error", e)
        return EXIT_VALIDATION
    except ValueError as e:
        display_manager.print_failure("Configuration error", e)
        return EXIT_VALIDATION
    except GateFailed as e:
        display_manager.print_gate_failure(e)
        return EXIT_GATE
    except NumericalError as e:
        display_manager.print_failure("Numerical error", e)
        return EXIT_GATE
    except KeyError as e:
        display_manager.print_failure("Dependency injection error", e)
        return EXIT_INTERNAL
    except Exception as e:
        logger.debug("unhandled error", exc_info=True)
        display_manager.print_failure("Fatal error", e)
        return EXIT_INTERNAL
    finally:
        # Cleanup
        reset_container()


def main(argv: Optional[Sequence[str]] = None) -> None:
    """Main entry point for the console application."""
    sys.exit(dispatch(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    main()
