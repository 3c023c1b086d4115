"""
Module that is used for declaring constant values for this library.

Units: hbar = 1 and the transverse field frequency Omega sets the energy scale, so every
configuration value is dimensionless.
"""
from __future__ import annotations

from enum import Enum

import numpy as np

APP_NAME = "ms-tnpi"

#: Local dimension of a spin site
SPIN_DIM = 2

#: Default truncation threshold chi
DEFAULT_CUTOFF = 1e-11

#: Relative tolerance used to treat singular values as degenerate at the truncation edge
DEGENERACY_RTOL = 1e-12

#: Trace drift above which the engine emits a warning
TRACE_DRIFT_WARNING = 1e-6

#: Relative tolerance requested from the adaptive quadrature routines
QUADRATURE_EPSREL = 1e-10

#: Subdivision limit handed to ``scipy.integrate.quad``
QUADRATURE_LIMIT = 500

#: Relative error estimate above which a quadrature result is rejected instead of used
QUADRATURE_FAILURE_RTOL = 1e-6

#: Multiples of the cutoff frequency after which an ohmic spectral density is neglected
OHMIC_FREQUENCY_SPAN = 60.0

#: Name of the environment variable capping worker threads of a scan
THREADS_ENV_VAR_NAME = "MSTNPI_THREADS"

#: Prefix of environment variables that override configuration keys
ENV_VAR_PREFIX = "MSTNPI_"

#: Version of the binary MPS container
MPS_FILE_FORMAT_VERSION = 1

#: Version of the eta table cache layout
ETA_CACHE_FORMAT_VERSION = 1

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

#: Single-site operators available as observables
PAULI_OPERATORS = {
    "sx": SIGMA_X,
    "sy": SIGMA_Y,
    "sz": SIGMA_Z,
}

#: Eigenvalues of sigma_z in basis order; |+1> is basis state 0
SPIN_VALUES = np.array([1.0, -1.0])


class ValueEnum(Enum):
    """Subclass of enum that returns the value of the enum as its str representation"""

    def __str__(self):
        return f"{self.value}"


class IndexKind(ValueEnum):
    SITE = "site"
    SPATIAL_BOND = "spatial-bond"
    TEMPORAL_BOND = "temporal-bond"


class WindowKind(ValueEnum):
    """Quadrature window attached to a time point along the path"""

    INITIAL = "initial"
    INTERIOR = "interior"
    TERMINAL = "terminal"


class TruncationNorm(ValueEnum):
    """What ``chi`` bounds in the compressions of a simulation"""

    #: relative Frobenius error of each compression, i.e. discarded weight below chi**2
    ERROR = "error"
    #: relative discarded weight of squared singular values
    WEIGHT = "weight"


class ModelPreset(ValueEnum):
    ISING = "ising"
    XXZ = "xxz"
    HEISENBERG = "heisenberg"


class ColumnRole(ValueEnum):
    INITIAL = "initial"
    INTERMEDIATE = "intermediate"
    TERMINAL = "terminal"


class OracleKind(ValueEnum):
    NONE = "none"
    PATH_SUM = "path-sum"
    DENSE = "dense"
    EXACT_DIAG = "exact-diag"


#: Named product initial states; each entry is the per-site pure state in the sigma_z basis
PRODUCT_STATES = {
    "all_up": (np.array([1.0, 0.0], dtype=complex),),
    "all_down": (np.array([0.0, 1.0], dtype=complex),),
    "neel": (np.array([1.0, 0.0], dtype=complex), np.array([0.0, 1.0], dtype=complex)),
    "x_plus": (np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0),),
}
