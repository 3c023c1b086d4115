import numpy as np
import pytest

from ms_tnpi.config import parse_config


ISING_CONFIG = """
# Ising chain with an ohmic bath on every site
model = ising
P = 7
Omega = 1
Jz = 0.2
xi = 0.25
omega_c = 5
beta = 1
dt = 0.25
N = 40
L = 4
chi = 1e-11
observables = sz@4
"""

ISING_CONFIG_YAML = """
model: ising
P: 7
Omega: 1
Jz: 0.2
xi: 0.25
omega_c: 5
beta: 1
dt: 0.25
N: 40
L: 4
chi: 1.0e-11
observables:
  - sz@4
"""

SPIN_BOSON_CONFIG = """
P = 1
Omega = 1
xi = 0.25
omega_c = 5
beta = 1
dt = 0.25
N = 5
L = 5
chi = 1e-14
observables = sz@1
"""

BARE_CONFIG = """
P = 3
Omega = 1
Jz = 0.2
dt = 0.25
N = 6
L = 2
chi = 0
observables = sz,szsz@1,2
"""


@pytest.fixture()
def ising_config_text():
    yield ISING_CONFIG


@pytest.fixture()
def ising_config_yaml():
    yield ISING_CONFIG_YAML


@pytest.fixture()
def spin_boson_config_text():
    yield SPIN_BOSON_CONFIG


@pytest.fixture()
def bare_config_text():
    yield BARE_CONFIG


@pytest.fixture()
def spin_boson_config():
    yield parse_config(SPIN_BOSON_CONFIG)


@pytest.fixture()
def bare_config():
    yield parse_config(BARE_CONFIG)


@pytest.fixture()
def config_file(tmp_path):
    """Writes a configuration text to ``tmp_path`` and returns its path"""

    def write(text, name="run.cfg"):
        path = tmp_path / name
        path.write_text(text)
        return path

    yield write


@pytest.fixture()
def rng():
    yield np.random.default_rng(1234)


@pytest.fixture()
def clean_env(monkeypatch):
    """Removes every MSTNPI_ variable so tests do not pick up the caller's environment"""
    import os

    for name in list(os.environ):
        if name.startswith("MSTNPI_"):
            monkeypatch.delenv(name)
    yield monkeypatch
