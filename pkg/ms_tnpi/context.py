from __future__ import annotations

from argparse import Namespace
from logging import getLogger
from pathlib import Path
from typing import Any

from .config import SimulationConfig, get_config_obj
from .sources import (
    CONFIG_FIELDS,
    CLIConfigSource,
    ConfigSource,
    EnvConfigSource,
    FileConfigSource,
)
from .system import SystemConfiguration

#: Logger used to give warnings and errors
logger = getLogger(__name__)


class Context:
    """
    Gathers every configuration parameter of a run. Values come from

    - CLI arguments/options
    - Environment variables (``MSTNPI_<KEY>``)
    - Configuration files
    - System level facts provided by the SystemConfiguration object

    The first source that defines a value wins; the order is ``CONFIG_PARSE_ORDER``.
    """

    #: SystemConfiguration object with process level facts (threads, versions)
    _system_config: SystemConfiguration

    #: Determines the order of precedence for our configuration sources
    CONFIG_PARSE_ORDER = ("cli", "env", "file")

    def __init__(
        self,
        system_config: SystemConfiguration,
        file_config_source: FileConfigSource | None = None,
        env_config_source: EnvConfigSource | None = None,
        cli_config_source: CLIConfigSource | None = None,
    ):
        self._file_config_source = file_config_source
        self._env_config_source = env_config_source
        self._cli_config_source = cli_config_source
        self._system_config = system_config

    def _sources(self) -> list[ConfigSource]:
        sources = []
        for name in self.CONFIG_PARSE_ORDER:
            source = super().__getattribute__(f"_{name}_config_source")
            if source is not None:
                sources.append(source)
        return sources

    def __getattr__(self, item) -> Any:
        """
        Looks ``item`` up in the configuration sources in order of precedence and then on
        the SystemConfiguration object. Attributes defined on the Context itself are
        returned before anything else.
        """
        for source in self._sources():
            if source.has_parameter(item):
                return source.get_parameter(item)

        if hasattr(self._system_config, item):
            return getattr(self._system_config, item)

        raise AttributeError(
            f"The following attribute '{item}' was not found on {self.__class__.__name__}, "
            f"its configuration sources or {self.__class__.__name__}._system_config"
        )

    @property
    def system(self) -> SystemConfiguration:
        return self._system_config

    def resolved_values(self) -> dict[str, Any]:
        """Every configuration field some source defines, after precedence is applied"""
        values: dict[str, Any] = {}
        for name in CONFIG_FIELDS:
            for source in self._sources():
                if source.has_parameter(name):
                    values[name] = source.get_parameter(name)
                    break
        return values

    def simulation_config(self) -> SimulationConfig:
        """
        Validates the merged values into a :class:`SimulationConfig`.

        :raises ConfigError: when a required key is missing or a value is out of range
        """
        path = self._file_config_source.path if self._file_config_source else None
        return get_config_obj(((path, self.resolved_values()),))


def create_context(
    args_obj: Namespace | None = None,
    system_config: SystemConfiguration | None = None,
    config_files: tuple[Path, ...] = (),
) -> Context:
    """
    Collects configuration from every source and combines them in a Context object.

    :param args_obj: Namespace object that is created after parsing CLI arguments
    :param system_config: SystemConfiguration object with process level facts
    :param config_files: Configuration files; later files override earlier ones
    """
    system_config = system_config or SystemConfiguration()
    file_config_source = FileConfigSource(config_files)

    args_obj = args_obj or Namespace()

    return Context(
        system_config,
        file_config_source=file_config_source,
        env_config_source=EnvConfigSource(),
        cli_config_source=CLIConfigSource(args_obj),
    )
