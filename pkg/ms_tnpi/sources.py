from __future__ import annotations

import abc
import json
import logging
import os
from argparse import Namespace
from collections.abc import Sequence
from pathlib import Path
from typing import Any, BinaryIO, Callable, Literal, Union

import ruamel.yaml as yaml

from .config import SimulationConfig, parse_key_value, remap_aliases, split_observables
from .constants import ENV_VAR_PREFIX
from .errors import CONFIG_ERROR_PREFIX
from .exceptions import ConfigError

logger = logging.getLogger(__name__)

ConfigFileTypes = Union[Literal["json"], Literal["yaml"], Literal["kv"]]

#: Suffixes recognised by :func:`guess_file_type`; everything else is ``key = value`` text
FILE_SUFFIXES: dict[str, ConfigFileTypes] = {
    ".yaml": "yaml",
    ".yml": "yaml",
    ".json": "json",
}


def yaml_parser() -> yaml.YAML:
    """Safe round-trip-free YAML parser shared by configuration files and run manifests"""
    parser = yaml.YAML(typ="safe", pure=True)
    parser.indent(mapping=2, offset=2, sequence=4)
    parser.default_flow_style = False
    return parser


def _read_file(
    path: Path, load: Callable[[BinaryIO], Any], parse_errors: tuple[type[Exception], ...]
) -> Any:
    """
    Unreadable files are logged and read as empty; contents that do not parse raise
    :class:`ConfigError` naming the file.
    """
    try:
        with path.open("rb") as file_handle:
            try:
                return load(file_handle)
            except parse_errors as exc:
                raise ConfigError(f"{CONFIG_ERROR_PREFIX}: {path}: {exc}", exc)
    except OSError as exc:
        logger.error(f"Skipping configuration file {path}: {exc}")
        return {}


def read_yaml_file(path: Path) -> dict[str, Any]:
    return _read_file(path, lambda handle: yaml_parser().load(handle), (yaml.YAMLError,))


def read_json_file(path: Path) -> dict[str, Any]:
    return _read_file(path, lambda handle: json.load(handle), (ValueError,))


def read_key_value_file(path: Path) -> dict[str, Any]:
    """Malformed lines are reported with their line number"""
    return _read_file(path, lambda handle: parse_key_value(handle.read().decode()), ())


#: Reader of every supported file type
FILE_READERS: dict[str, Callable[[Path], dict]] = {
    "yaml": read_yaml_file,
    "json": read_json_file,
    "kv": read_key_value_file,
}


def get_config_file_parser(file_type: ConfigFileTypes) -> Callable[[Path], dict]:
    try:
        return FILE_READERS[file_type]
    except KeyError:
        raise NotImplementedError(f"File type '{file_type}' is not currently supported")


def guess_file_type(path: Path) -> ConfigFileTypes:
    return FILE_SUFFIXES.get(Path(path).suffix.lower(), "kv")


class ConfigSource(abc.ABC):
    @abc.abstractmethod
    def get_parameter(self, name) -> Any:
        """Retrieves the named parameter from the configuration implementation"""

    @abc.abstractmethod
    def has_parameter(self, name) -> bool:
        """Determines whether the underlying storage object actually has this parameter"""


class FileConfigSource(ConfigSource):
    #: Parsed contents of every file, in the order they were given
    raw_data: tuple[tuple[Path, dict], ...]

    #: Merged data; later files override earlier ones
    parsed_data: dict[str, Any]

    def __init__(self, config_files: Sequence[Path], file_type: ConfigFileTypes | None = None):
        """
        Creates a FileConfigSource object that holds all the given config files.

        :param config_files: Files to read configuration from. Later files override values
                             from earlier ones.
        :param file_type: Parser to use for every file; guessed from each suffix if omitted
        """
        self.config_files = tuple(Path(path) for path in config_files)
        self.raw_data = tuple(
            (path, get_config_file_parser(file_type or guess_file_type(path))(path))
            for path in self.config_files
        )
        self.parsed_data = self._merge()

    def _merge(self) -> dict[str, Any]:
        merged: dict[str, Any] = {}
        for path, data in self.raw_data:
            if not isinstance(data, dict):
                raise ConfigError(f"Configuration file {path} does not hold a mapping")
            data = dict(data)
            remap_aliases(data)
            merged.update(data)
        return merged

    @property
    def path(self) -> Path | None:
        return self.config_files[-1] if self.config_files else None

    def get_parameter(self, name) -> Any:
        return self.parsed_data.get(name)

    def has_parameter(self, name) -> bool:
        return name in self.parsed_data


class EnvConfigSource(ConfigSource):
    COMMA_SEPARATED_PARAMS: set[str] = {"bath_modes"}

    ENV_VAR_PREFIX = ENV_VAR_PREFIX

    def get_parameter(self, name) -> Any:
        value = os.getenv(f"{self.ENV_VAR_PREFIX}{name.upper()}")

        if value is not None:
            if name == "observables":
                return split_observables(value)
            elif name in self.COMMA_SEPARATED_PARAMS:
                return value.split(",")

        return value

    def has_parameter(self, name) -> bool:
        return f"{self.ENV_VAR_PREFIX}{name.upper()}" in os.environ


class CLIConfigSource(ConfigSource):
    """
    Exposes the options of an argparse ``Namespace``; options left at ``None`` count as
    not given.
    """

    #: This is the Namespace class from the argparse module
    args_obj: Namespace

    def __init__(self, args_obj: Namespace):
        self.args_obj = args_obj

    def get_parameter(self, name) -> Any:
        return getattr(self.args_obj, name, None)

    def has_parameter(self, name) -> bool:
        return getattr(self.args_obj, name, None) is not None


#: Fields of :class:`SimulationConfig`, the only names sources are asked about
CONFIG_FIELDS = tuple(SimulationConfig.__fields__)
