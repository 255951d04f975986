# tests/test_di_container.py
"""
Unit tests for the service registry.
Run with: pytest tests/test_di_container.py -v
"""
import pytest
from unittest.mock import Mock, patch

from di_container import DIContainer, get_container, reset_container


class TestRegistry:
    """Tests for singletons, factories and lookup"""

    @pytest.fixture
    def container(self):
        return DIContainer()

    def test_singleton_is_shared(self, container):
        console = Mock()
        container.register_singleton("output_manager", console)

        assert container.has("output_manager")
        assert container.get("output_manager") is console

    def test_factory_builds_on_each_get(self, container):
        container.register_factory("writer", Mock)

        assert container.get("writer") is not container.get("writer")

    def test_unknown_name(self, container):
        assert not container.has("vectorstore")
        with pytest.raises(KeyError) as exc_info:
            container.get("vectorstore")
        assert "vectorstore" in str(exc_info.value)

    def test_registration_replaces_previous_kind(self, container):
        shared = Mock()
        container.register_factory("delta", Mock)
        container.register_singleton("delta", shared)
        assert container.get("delta") is shared

        container.register_factory("delta", Mock)
        assert container.get("delta") is not shared
        assert container.names() == ["delta"]


class TestContainerBootstrap:
    """Tests for bootstrap and configure"""

    @patch("di_container.load_config")
    def test_bootstrap_registers_all_dependencies(self, mock_load_config):
        mock_config = Mock()
        mock_config.with_output.return_value = mock_config
        mock_load_config.return_value = mock_config

        container = DIContainer()
        container.bootstrap()

        assert container.has("config")
        assert container.has("output_manager")
        assert container.has("command_parser")
        assert container.has("delta")
        assert container.has("writer")
        assert container.names() == ["command_parser", "config", "delta", "output_manager", "writer"]

    @patch("di_container.load_config")
    def test_bootstrap_passes_path_and_overrides(self, mock_load_config):
        """Test that bootstrap forwards the config path and output overrides"""
        mock_config = Mock()
        mock_config.with_output.return_value = mock_config
        mock_load_config.return_value = mock_config

        container = DIContainer()
        container.bootstrap("toy.json", seed=7)

        mock_load_config.assert_called_once_with("toy.json")
        mock_config.with_output.assert_called_once_with(seed=7)
        assert container.get("config") is mock_config

    def test_bootstrap_with_toy_config(self, toy_config_path, out_dir):
        """Test a real bootstrap on the shipped toy configuration"""
        container = DIContainer()
        container.bootstrap(toy_config_path, out_dir=out_dir, seed=11)

        config = container.get("config")
        assert config.output.seed == 11
        assert container.get("delta").kind == "power-exp"

        writer = container.get("writer")
        assert writer.out_dir == out_dir
        assert writer.seed == 11
        assert writer.config_hash == config.config_hash()
        # the writer is a factory
        assert container.get("writer") is not writer

    def test_configure_replaces_config(self, toy_config_path):
        """Test that configure swaps the configuration and dependent services"""
        container = DIContainer()
        container.bootstrap()
        assert container.get("delta").kind == "default"

        container.configure(toy_config_path)
        assert container.get("delta").kind == "power-exp"

    def test_bootstrap_invalid_override(self):
        """Test that an invalid override surfaces as ValueError"""
        container = DIContainer()
        with pytest.raises(ValueError):
            container.bootstrap(threads=0)


class TestGlobalContainer:
    """Tests for the process-wide container"""

    @patch("di_container.DIContainer")
    def test_get_container_creates_singleton(self, mock_container_class):
        reset_container()

        mock_instance = Mock()
        mock_container_class.return_value = mock_instance

        container1 = get_container()
        container2 = get_container()

        assert container1 is container2
        assert mock_container_class.call_count == 1
        mock_instance.bootstrap.assert_called_once()

    @patch("di_container.DIContainer")
    def test_get_container_reconfigures(self, mock_container_class):
        """Test that later calls with arguments reconfigure the container"""
        reset_container()
        mock_instance = Mock()
        mock_container_class.return_value = mock_instance

        get_container()
        get_container("toy.json", seed=3)

        mock_instance.configure.assert_called_once_with("toy.json", seed=3)

    def test_reset_container(self):
        reset_container()
        reset_container()
        container = get_container()
        reset_container()
        assert get_container() is not container


class TestDependencyInjection:
    """Tests for assembling a command context"""

    def test_context_receives_dependencies(self, test_container):
        """Test that a command context can be assembled from the container"""
        from commands import CommandContext

        context = CommandContext(
            config=test_container.get("config"),
            display_manager=test_container.get("output_manager"),
            writer=test_container.get("writer"),
            delta=test_container.get("delta"),
        )

        assert context.config is test_container.get("config")
        assert context.delta is test_container.get("delta")
        assert context.writer is not None


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
