# tests/conftest.py
"""
Pytest configuration and shared fixtures.
Provides the toy configuration, small series spaces and dependency injection
fixtures shared across the test modules.
"""
import json
import sys
from pathlib import Path
from unittest.mock import Mock

import pytest

# Add src directory to Python path
src_path = Path(__file__).parent.parent / "src"
sys.path.insert(0, str(src_path))

# Now we can import our modules
from di_container import DIContainer, reset_container

TOY_CONFIG = Path(__file__).parent.parent / "configs" / "toy.json"


@pytest.fixture(scope="function")
def toy_config_path():
    """Path of the shipped toy configuration."""
    return TOY_CONFIG


@pytest.fixture(scope="function")
def toy_config_data():
    """
    Parsed toy configuration.

    Returns:
            Dict that tests may modify before writing it back out
    """
    return json.loads(TOY_CONFIG.read_text(encoding="utf-8"))


@pytest.fixture(scope="function")
def write_config(tmp_path):
    """
    Write a configuration dict to a temporary JSON file.

    Args:
            tmp_path: Pytest fixture providing temporary directory

    Returns:
            Callable taking the dict (and an optional file name) and returning the path
    """

    def _write(data, name="config.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return path

    return _write


@pytest.fixture(scope="function")
def out_dir(tmp_path):
    """Output directory inside the pytest temporary directory."""
    return tmp_path / "out"


@pytest.fixture(scope="function")
def toy_config(toy_config_path, out_dir):
    """The toy AppConfig writing into a temporary output directory."""
    from config import load_config

    return load_config(toy_config_path).with_output(out_dir=out_dir)


@pytest.fixture(scope="function")
def single_structure():
    """Window [0, 0] with the single subset {0} and one internal angle."""
    from lattice import IndexWindow, ProductStructure, SpatialStructure

    window = IndexWindow(0, 0)
    return ProductStructure(SpatialStructure(window, (frozenset([0]),)), n=1)


@pytest.fixture(scope="function")
def pair_structure():
    """Window [0, 1] with singletons plus the full window and one internal angle."""
    from lattice import IndexWindow, ProductStructure, SpatialStructure

    window = IndexWindow(0, 1)
    subsets = (frozenset([0]), frozenset([1]), frozenset([0, 1]))
    return ProductStructure(SpatialStructure(window, subsets), n=1)


@pytest.fixture(scope="function")
def single_space(single_structure):
    """Series space over the single-index structure at w~ = golden ratio."""
    from apseries import MonomialBasis, ParameterGrid, SeriesSpace

    golden = (1.0 + 5.0**0.5) / 2.0
    return SeriesSpace(single_structure, MonomialBasis(1, 4), ParameterGrid.single([golden]))


@pytest.fixture(scope="function")
def pair_space(pair_structure):
    """Series space over the two-index structure at w~ = golden ratio."""
    from apseries import MonomialBasis, ParameterGrid, SeriesSpace

    golden = (1.0 + 5.0**0.5) / 2.0
    return SeriesSpace(pair_structure, MonomialBasis(1, 4), ParameterGrid.single([golden]))


@pytest.fixture(scope="function")
def mock_display_manager():
    """
    Create a mock ConsoleOutputManager instance.

    Returns:
            Mock ConsoleOutputManager object
    """
    mock = Mock()
    mock.print_title = Mock()
    mock.print_error = Mock()
    mock.print_failure = Mock()
    mock.print_gate_failure = Mock()
    mock.print_result = Mock()
    return mock


@pytest.fixture(scope="function")
def mock_command_parser():
    """
    Create a real CommandParser instance.

    Returns:
            CommandParser object
    """
    from commands import CommandParser

    return CommandParser()


@pytest.fixture(scope="function")
def test_container(toy_config, mock_display_manager, mock_command_parser):
    """
    Create a test DI container around the toy configuration.

    Args:
            toy_config: Toy configuration with a temporary output directory
            mock_display_manager: Mock display manager
            mock_command_parser: Command parser

    Returns:
            DIContainer instance configured for testing
    """
    from output_writer import ResultWriter

    container = DIContainer()
    container.register_singleton("config", toy_config)
    container.register_singleton("delta", toy_config.delta.delta())
    container.register_singleton("output_manager", mock_display_manager)
    container.register_singleton("command_parser", mock_command_parser)
    container.register_factory(
        "writer",
        lambda: ResultWriter(
            toy_config.output.out_dir, toy_config.output.seed, toy_config.config_hash()
        ),
    )
    return container


@pytest.fixture(scope="function")
def command_context(test_container):
    """CommandContext built from the test container."""
    from commands import CommandContext

    return CommandContext(
        config=test_container.get("config"),
        display_manager=test_container.get("output_manager"),
        writer=test_container.get("writer"),
        delta=test_container.get("delta"),
    )


@pytest.fixture(autouse=True)
def cleanup_container():
    """
    Automatically reset the DI container after each test.

    This ensures test isolation by preventing state leakage between tests.
    """
    yield
    reset_container()
