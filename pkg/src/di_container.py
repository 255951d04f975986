# src/di_container.py
"""
Service registry for the KAM Workbench.

The console and the command parser live for the whole process. The run
configuration, the approximation function built from it and the result
writer are rebuilt whenever a command brings its own --config or output
overrides.
"""
from typing import Any, Callable, Dict, List, Optional

from config import AppConfig, load_config
from console_output import ConsoleOutputManager
from commands import CommandParser
from constants import ERROR_DEPENDENCY_NOT_REGISTERED
from output_writer import ResultWriter


class DIContainer:
    """
    Named services, either shared instances or factories called on each get().
    """

    def __init__(self):
        self._singletons: Dict[str, Any] = {}
        self._factories: Dict[str, Callable[[], Any]] = {}
        self._config: Optional[AppConfig] = None

    def register_singleton(self, name: str, instance: Any) -> None:
        """Share instance under name, replacing any factory of that name."""
        self._factories.pop(name, None)
        self._singletons[name] = instance

    def register_factory(self, name: str, factory: Callable[[], Any]) -> None:
        """Build a fresh object with factory on every get(name)."""
        self._singletons.pop(name, None)
        self._factories[name] = factory

    def get(self, name: str) -> Any:
        """
        Raises:
                KeyError: If nothing is registered under name
        """
        if name in self._singletons:
            return self._singletons[name]
        factory = self._factories.get(name)
        if factory is None:
            raise KeyError(ERROR_DEPENDENCY_NOT_REGISTERED.format(name=name))
        return factory()

    def has(self, name: str) -> bool:
        return name in self._singletons or name in self._factories

    def names(self) -> List[str]:
        """Registered service names, sorted."""
        return sorted(set(self._singletons) | set(self._factories))

    def bootstrap(self, config_path=None, **output_overrides) -> None:
        """
        Register the process-wide services, then load the run configuration.

        Args:
                config_path: JSON run configuration (defaults when omitted)
                output_overrides: out_dir, seed, threads, log_level from the command line
        """
        self.register_singleton("output_manager", ConsoleOutputManager())
        self.register_singleton("command_parser", CommandParser())
        self.configure(config_path, **output_overrides)

    def configure(self, config_path=None, **output_overrides) -> None:
        """
        Load the run configuration and rebuild config, delta and writer.

        Raises:
                ValueError: If the configuration is invalid
        """
        config = load_config(config_path).with_output(**output_overrides)
        self._config = config
        self.register_singleton("config", config)
        self.register_singleton("delta", config.delta.delta())
        self.register_factory(
            "writer",
            lambda: ResultWriter(config.output.out_dir, config.output.seed, config.config_hash()),
        )


_container: Optional[DIContainer] = None


def get_container(config_path=None, **output_overrides) -> DIContainer:
    """
    The process-wide container, bootstrapped on first use.

    Later calls that pass a config path or overrides reconfigure it.
    """
    global _container
    if _container is None:
        _container = DIContainer()
        _container.bootstrap(config_path, **output_overrides)
    elif config_path is not None or output_overrides:
        _container.configure(config_path, **output_overrides)
    return _container


def reset_container() -> None:
    """Drop the process-wide container; the next get_container() bootstraps anew."""
    global _container
    _container = None
