from __future__ import annotations

import logging
import os
import platform
import socket

from . import __version__
from . import constants as const

logger = logging.getLogger(__name__)


class SystemConfiguration:
    """
    Process-level facts: how many worker threads a scan may use and what to record
    about the running interpreter in a run manifest.
    """

    #: Upper bound on worker threads of a convergence scan
    threads: int

    #: Version of this package
    version: str

    #: Version of the running interpreter
    python_version: str

    #: Host the run executes on
    hostname: str

    def __init__(self, **kwargs):
        """
        This method sets the default values for our properties. These mostly
        come from the environment and can be overridden.
        """
        self.threads = kwargs.get("threads") or threads_from_env()
        self.version = kwargs.get("version") or __version__
        self.python_version = kwargs.get("python_version") or platform.python_version()
        self.hostname = kwargs.get("hostname") or socket.gethostname()

    @property
    def platform(self) -> str:
        """Grab the platform we are using (wrapper around platform module)"""
        platform_name = platform.system().lower()

        if "darwin" in platform_name:
            return "osx"

        return platform_name


def threads_from_env(env_var_name: str = const.THREADS_ENV_VAR_NAME) -> int:
    """
    Reads the worker cap from the environment; missing or invalid values fall back to
    the number of CPUs.
    """
    default = os.cpu_count() or 1
    value = os.getenv(env_var_name)

    if value is None:
        return default

    try:
        threads = int(value)
    except ValueError:
        logger.warning(f'Ignoring "{env_var_name}={value}": not an integer')
        return default

    if threads < 1:
        logger.warning(f'Ignoring "{env_var_name}={value}": must be at least 1')
        return default

    return threads
