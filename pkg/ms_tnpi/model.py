"""
Physical description of a dissipative spin chain: the nearest-neighbour spin Hamiltonian
and the harmonic bath attached to every site.
"""
from __future__ import annotations

import logging
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, root_validator, validator

from .constants import (
    PAULI_OPERATORS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    SPIN_DIM,
    ModelPreset,
    ValueEnum,
)
from .exceptions import ParameterError

logger = logging.getLogger(__name__)


class SpectralKind(ValueEnum):
    OHMIC = "ohmic"
    DISCRETE = "discrete"


def check_preset(preset: ModelPreset, jx: float, jy: float) -> None:
    """Raises ``ValueError`` when the couplings do not fit the named model family"""
    if preset is ModelPreset.ISING and (jx != 0.0 or jy != 0.0):
        raise ValueError("the ising model only has a jz coupling")
    if preset is ModelPreset.XXZ and jx != jy:
        raise ValueError("the xxz model needs jx == jy")


class SpinChainModel(BaseModel):
    """
    Open chain of ``sites`` spins with one-body term ``epsilon sz - omega sx`` on every
    site and the coupling ``jx sx sx + jy sy sy + jz sz sz`` on every bond.
    """

    preset: ModelPreset = ModelPreset.HEISENBERG
    sites: int = Field(ge=1)
    d: int = SPIN_DIM
    epsilon: float = 0.0
    omega: float = 1.0
    jx: float = 0.0
    jy: float = 0.0
    jz: float = 0.0

    class Config:
        allow_mutation = False

    @validator("d")
    def spin_half_only(cls, value):
        if value != SPIN_DIM:
            raise ValueError(f"only spin-1/2 sites (d={SPIN_DIM}) are supported")
        return value

    @validator("epsilon", "omega", "jx", "jy", "jz")
    def finite(cls, value):
        if not np.isfinite(value):
            raise ValueError("must be finite")
        return value

    @root_validator(skip_on_failure=True)
    def preset_couplings(cls, values):
        check_preset(values["preset"], values["jx"], values["jy"])
        return values

    @property
    def P(self) -> int:
        return self.sites


def one_body_term(model: SpinChainModel, site: int) -> np.ndarray:
    """``epsilon sz - omega sx`` acting on ``site`` (counted from 1)"""
    if not 1 <= site <= model.sites:
        raise ParameterError(f"Site {site} is outside of the chain 1..{model.sites}")
    return model.epsilon * SIGMA_Z - model.omega * SIGMA_X


def two_body_term(model: SpinChainModel, bond: int) -> np.ndarray:
    """Coupling between ``bond`` and ``bond + 1`` (counted from 1), site ``bond`` slowest"""
    if not 1 <= bond <= model.sites - 1:
        raise ParameterError(f"Bond {bond} is outside of the chain 1..{model.sites - 1}")
    return (
        model.jx * np.kron(SIGMA_X, SIGMA_X)
        + model.jy * np.kron(SIGMA_Y, SIGMA_Y)
        + model.jz * np.kron(SIGMA_Z, SIGMA_Z)
    )


def embed_operator(operator: np.ndarray, site: int, sites: int) -> np.ndarray:
    """Dense operator acting on ``site`` (counted from 1) and on the next sites it spans"""
    span = int(round(np.log2(operator.shape[0])))
    left = np.eye(SPIN_DIM ** (site - 1))
    right = np.eye(SPIN_DIM ** (sites - site - span + 1))
    return np.kron(np.kron(left, operator), right)


def chain_hamiltonian(model: SpinChainModel) -> np.ndarray:
    """Dense Hamiltonian of the whole chain, site 1 slowest"""
    hamiltonian = np.zeros((SPIN_DIM**model.sites,) * 2, dtype=complex)
    for site in range(1, model.sites + 1):
        hamiltonian += embed_operator(one_body_term(model, site), site, model.sites)
    for bond in range(1, model.sites):
        hamiltonian += embed_operator(two_body_term(model, bond), bond, model.sites)
    return hamiltonian


class BathModel(BaseModel):
    """
    Harmonic bath attached to every site through ``coupling_operator``.

    ``ohmic`` baths use J(w) = pi/2 xi w exp(-w / omega_c); ``discrete`` baths hold a
    finite list of (frequency, coupling) modes with J(w) = pi/2 sum c**2 / w delta(w - w_l).
    """

    kind: SpectralKind = SpectralKind.OHMIC
    xi: float = Field(default=0.0, ge=0.0)
    omega_c: float = Field(default=1.0, gt=0.0)
    beta: float = Field(default=1.0, gt=0.0)
    modes: Tuple[Tuple[float, float], ...] = ()
    coupling_operator: str = "sz"

    class Config:
        allow_mutation = False

    @validator("modes", each_item=True)
    def positive_frequencies(cls, mode):
        frequency, _ = mode
        if frequency <= 0.0:
            raise ValueError("mode frequencies must be positive")
        return mode

    @validator("coupling_operator")
    def known_operator(cls, value):
        if value not in PAULI_OPERATORS:
            raise ValueError(f"coupling operator must be one of {sorted(PAULI_OPERATORS)}")
        matrix = PAULI_OPERATORS[value]
        if np.count_nonzero(matrix - np.diag(np.diag(matrix))):
            raise ValueError("the coupling operator must be diagonal in the sigma_z basis")
        return value

    @root_validator(skip_on_failure=True)
    def discrete_needs_modes(cls, values):
        if values["kind"] is SpectralKind.DISCRETE and not values["modes"]:
            raise ValueError("a discrete bath needs at least one mode")
        return values

    @property
    def coupling_matrix(self) -> np.ndarray:
        return PAULI_OPERATORS[self.coupling_operator]

    @property
    def coupling_values(self) -> np.ndarray:
        """Eigenvalues of the coupling operator in basis order"""
        return np.real(np.diag(self.coupling_matrix))

    @property
    def is_trivial(self) -> bool:
        if self.kind is SpectralKind.DISCRETE:
            return all(coupling == 0.0 for _, coupling in self.modes)
        return self.xi == 0.0

    def spectral_density(self, frequency):
        """J(w) of the ohmic form; discrete baths have no density function"""
        if self.kind is not SpectralKind.OHMIC:
            raise ParameterError("A discrete bath has a delta-comb spectral density")
        frequency = np.asarray(frequency, dtype=float)
        return 0.5 * np.pi * self.xi * frequency * np.exp(-frequency / self.omega_c)

    def cache_key(self) -> str:
        if self.kind is SpectralKind.DISCRETE:
            modes = ";".join(f"{w!r}:{c!r}" for w, c in self.modes)
            return f"discrete[{modes}],beta={self.beta!r},s={self.coupling_operator}"
        return (
            f"ohmic,xi={self.xi!r},omega_c={self.omega_c!r},beta={self.beta!r},"
            f"s={self.coupling_operator}"
        )

    def discretize(self, n_modes: int, omega_max: Optional[float] = None) -> BathModel:
        """
        Discrete bath with ``n_modes`` modes placed at equal-area points of J(w)/w on
        [0, omega_max]; each mode carries the reorganisation weight of its slice.
        """
        if self.kind is SpectralKind.DISCRETE:
            return self
        if n_modes < 1:
            raise ParameterError("At least one mode is needed to discretize a bath")

        omega_max = omega_max if omega_max is not None else 10.0 * self.omega_c
        # cumulative integral of J(w)/w is pi/2 xi omega_c (1 - exp(-w / omega_c))
        scale = 0.5 * np.pi * self.xi * self.omega_c
        total = scale * (1.0 - np.exp(-omega_max / self.omega_c))
        fractions = (np.arange(n_modes) + 0.5) / n_modes
        if scale == 0.0:
            frequencies = fractions * omega_max
        else:
            frequencies = -self.omega_c * np.log(1.0 - fractions * total / scale)
        couplings = np.sqrt(2.0 / np.pi * frequencies**2 * total / n_modes)

        logger.debug(f"Discretized {self.cache_key()} into {n_modes} modes")
        return BathModel(
            kind=SpectralKind.DISCRETE,
            beta=self.beta,
            modes=tuple(zip(frequencies.tolist(), couplings.tolist())),
            coupling_operator=self.coupling_operator,
        )

