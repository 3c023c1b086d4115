from __future__ import annotations

import json
import logging
from collections.abc import Sequence
from pathlib import Path
from typing import Any, NamedTuple, Optional, Tuple

from pydantic import BaseSettings, Field, ValidationError, root_validator, validator

from .constants import (
    DEFAULT_CUTOFF,
    ENV_VAR_PREFIX,
    PAULI_OPERATORS,
    ModelPreset,
    TruncationNorm,
)
from .errors import CONFIG_ERROR_PREFIX, format_all_validation_errors, format_validation_error
from .exceptions import ConfigError
from .model import BathModel, SpectralKind, SpinChainModel, check_preset

logger = logging.getLogger(__name__)

#: These are the multiple names that certain fields can have
FIELD_ALIASES = {
    "P": "sites",
    "eps": "epsilon",
    "Omega": "omega",
    "Jx": "jx",
    "Jy": "jy",
    "Jz": "jz",
    "N": "nsteps",
    "memory_L": "memory_length",
    "L": "memory_length",
    "chi": "cutoff",
    "chi_norm": "cutoff_norm",
}

#: Two-site observables; every other observable name is a single-site Pauli operator
CORRELATORS = {"sxsx": "sx", "sysy": "sy", "szsz": "sz"}


class ObservableSpec(NamedTuple):
    name: str
    sites: Tuple[int, ...]

    @property
    def label(self) -> str:
        return ",".join(str(site) for site in self.sites)

    def __str__(self) -> str:
        return f"{self.name}@{self.label}"


def split_observables(value: str) -> list[str]:
    """
    Splits a comma separated observable list; bare numbers continue the previous entry so
    that ``sz@1,szsz@1,2`` yields ``["sz@1", "szsz@1,2"]``.
    """
    tokens: list[str] = []
    for token in (part.strip() for part in value.split(",")):
        if not token:
            continue
        if token.isdigit() and tokens:
            tokens[-1] = f"{tokens[-1]},{token}"
        else:
            tokens.append(token)
    return tokens


def parse_observable(token: str, sites: int) -> list[ObservableSpec]:
    """``sz@3``, ``szsz@1,2`` or a bare ``sz`` meaning every site"""
    name, _, where = token.partition("@")
    name = name.strip()
    if name not in PAULI_OPERATORS and name not in CORRELATORS:
        raise ValueError(f"unknown observable '{name}'")

    if not where:
        if name in CORRELATORS:
            raise ValueError(f"'{name}' needs two sites, e.g. {name}@1,2")
        return [ObservableSpec(name, (site,)) for site in range(1, sites + 1)]

    try:
        positions = tuple(int(part) for part in where.split(","))
    except ValueError:
        raise ValueError(f"cannot read the sites of observable '{token}'")

    expected = 2 if name in CORRELATORS else 1
    if len(positions) != expected:
        raise ValueError(f"'{name}' takes {expected} site(s), got '{where}'")
    if len(set(positions)) != len(positions):
        raise ValueError(f"'{token}' names the same site twice")
    for site in positions:
        if not 1 <= site <= sites:
            raise ValueError(f"site {site} of '{token}' is outside of the chain 1..{sites}")
    return [ObservableSpec(name, positions)]


def remap_aliases(config: dict[str, Any]) -> None:
    """
    pydantic v1 supports a single alias per field, so alternative spellings are renamed
    here before the data reaches :class:`SimulationConfig`.
    """
    for alias, field_name in FIELD_ALIASES.items():
        if alias in config:
            config[field_name] = config.pop(alias)


def parse_key_value(text: str) -> dict[str, Any]:
    """
    Reads the native ``key = value`` format; ``#`` starts a comment. Empty values and
    ``none`` are read as unset.
    """
    data: dict[str, Any] = {}
    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        key, separator, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not separator or not key:
            raise ConfigError(f"{CONFIG_ERROR_PREFIX}: line {number}: expected 'key = value'")
        if key in data:
            logger.warning(f"Configuration key '{key}' given twice; using the last value")
        data[key] = None if value.lower() in ("", "none") else value
    return data


def get_config_obj(config_data: Sequence[tuple[Optional[Path], Any]]) -> SimulationConfig:
    """
    From a sequence of (path, parsed data) pairs, merge the data (later entries override
    earlier ones) and validate it into a single :class:`SimulationConfig`.

    :raises ConfigError: Thrown if the data cannot be parsed or validated
    """
    merged: dict[str, Any] = {}
    validation_errors: list[str] = []

    for path, single_config in config_data:
        # Anything other than a mapping means the file was not parsed correctly
        if not isinstance(single_config, dict):
            validation_errors.append(f"{CONFIG_ERROR_PREFIX}: {path}")
            continue
        single_config = dict(single_config)
        remap_aliases(single_config)
        merged.update(single_config)

    if validation_errors:
        raise ConfigError(format_all_validation_errors(validation_errors))

    try:
        return SimulationConfig(**merged)
    except ValidationError as exc:
        path = config_data[-1][0] if config_data else None
        raise ConfigError(
            format_all_validation_errors([format_validation_error(exc, path)]), exc
        )


def parse_config(text: str, path: Optional[Path] = None) -> SimulationConfig:
    """Validated configuration from text in the ``key = value`` format"""
    return get_config_obj(((path, parse_key_value(text)),))


class SimulationConfig(BaseSettings):
    """
    Full description of one simulation: the spin chain, its bath and the convergence
    parameters of the propagation.
    """

    ####################################################
    #                   Spin chain                     #
    ####################################################

    model: ModelPreset = Field(
        default=ModelPreset.ISING,
        description="""
        Model family: 'ising' (jz only), 'xxz' (jx == jy) or 'heisenberg'
        (independent jx, jy, jz).
        """,
    )

    sites: int = Field(
        ...,
        ge=1,
        description="""
        **aliases** -> P

        Number of spins in the open chain.
        """,
    )

    epsilon: float = Field(
        default=0.0,
        description="""
        **aliases** -> eps

        Longitudinal field: coefficient of sigma_z in the one-body term.
        """,
    )

    omega: float = Field(
        default=1.0,
        description="""
        **aliases** -> Omega

        Transverse field frequency; the one-body term is eps sz - Omega sx.
        """,
    )

    jx: float = Field(default=0.0, description="**aliases** -> Jx")
    jy: float = Field(default=0.0, description="**aliases** -> Jy")
    jz: float = Field(default=0.0, description="**aliases** -> Jz")

    ####################################################
    #                      Bath                        #
    ####################################################

    xi: Optional[float] = Field(
        default=None,
        ge=0.0,
        description="""
        Dimensionless Kondo parameter of the ohmic spectral density. Leaving it
        unset (and giving no bath_modes) simulates the bare chain.
        """,
    )

    omega_c: float = Field(
        default=1.0,
        gt=0.0,
        description="""
        Cutoff frequency of the ohmic spectral density.
        """,
    )

    beta: float = Field(
        default=1.0,
        gt=0.0,
        description="""
        Inverse temperature of the bath.
        """,
    )

    bath_kind: SpectralKind = Field(
        default=SpectralKind.OHMIC,
        description="""
        'ohmic' for the continuous spectral density, 'discrete' for a finite set of
        modes taken from bath_modes or, when those are absent, from discretizing the
        ohmic density into n_modes modes.
        """,
    )

    bath_modes: Tuple[Tuple[float, float], ...] = Field(
        default_factory=tuple,
        description="""
        **env_var_string_delimiter** ->  ','

        Discrete modes written as 'frequency:coupling' pairs.
        """,
    )

    n_modes: Optional[int] = Field(
        default=None,
        ge=1,
        description="""
        Number of modes used when a discrete bath is derived from the ohmic density.
        """,
    )

    omega_max: Optional[float] = Field(
        default=None,
        gt=0.0,
        description="""
        Largest frequency covered by the discretization; defaults to 10 omega_c.
        """,
    )

    ####################################################
    #               Convergence parameters             #
    ####################################################

    dt: float = Field(
        ...,
        gt=0.0,
        description="""
        Time step in units of 1 / Omega.
        """,
    )

    nsteps: int = Field(
        ...,
        ge=1,
        description="""
        **aliases** -> N

        Number of time steps to propagate.
        """,
    )

    memory_length: int = Field(
        ...,
        description="""
        **aliases** -> L, memory_L

        Number of past time steps kept in the influence functional (1 <= L <= N).
        """,
    )

    cutoff: float = Field(
        default=DEFAULT_CUTOFF,
        ge=0.0,
        lt=1.0,
        description="""
        **aliases** -> chi

        Truncation threshold of every SVD compression; see cutoff_norm.
        """,
    )

    cutoff_norm: TruncationNorm = Field(
        default=TruncationNorm.ERROR,
        description="""
        **aliases** -> chi_norm

        'error' keeps the relative Frobenius error of each compression below chi
        (discarded weight below chi**2); 'weight' keeps the relative discarded weight
        itself below chi.
        """,
    )

    max_dim: Optional[int] = Field(
        default=None,
        ge=1,
        description="""
        Optional hard cap on every bond dimension.
        """,
    )

    renormalize: bool = Field(
        default=False,
        description="""
        Divide the reduced density by its trace after every step.
        """,
    )

    eta_cache: Optional[Path] = Field(
        default=None,
        description="""
        Text file caching the bath coefficients for this bath, dt and L.
        """,
    )

    ####################################################
    #             Initial state and output             #
    ####################################################

    initial_state: str = Field(
        default="all_up",
        description="""
        One of 'all_up', 'all_down', 'neel', 'x_plus' or the path of an MPS file.
        """,
    )

    observables: Tuple[str, ...] = Field(
        default=("sz",),
        description="""
        **env_var_string_delimiter** ->  ','

        Observables to record, e.g. 'sz@16', 'sx' (every site) or 'szsz@1,2'.
        """,
    )

    fock_levels: int = Field(
        default=8,
        ge=2,
        description="""
        Oscillator levels per mode used by the exact-diagonalization reference.
        """,
    )

    class Config:
        env_prefix = ENV_VAR_PREFIX
        validate_assignment = True

        @classmethod
        def customise_sources(cls, init_settings, env_settings, file_secret_settings):
            # environment overrides are resolved by ``Context`` so precedence stays explicit
            return (init_settings,)

    @validator("memory_length")
    def memory_in_range(cls, value, values):
        nsteps = values.get("nsteps")
        if value < 1 or (nsteps is not None and value > nsteps):
            raise ValueError(f"L out of range: need 1 <= L <= N, got L={value}, N={nsteps}")
        return value

    @validator("bath_modes", pre=True)
    def read_modes(cls, value):
        if isinstance(value, str):
            value = [part for part in value.split(",") if part.strip()]
        modes = []
        for mode in value:
            if isinstance(mode, str):
                frequency, _, coupling = mode.partition(":")
                mode = (frequency, coupling)
            modes.append(tuple(mode))
        return tuple(modes)

    @validator("observables", pre=True)
    def read_observables(cls, value):
        if isinstance(value, str):
            return tuple(split_observables(value))
        return tuple(value)

    @root_validator(skip_on_failure=True)
    def consistent_model(cls, values):
        check_preset(values["model"], values["jx"], values["jy"])
        for token in values["observables"]:
            parse_observable(token, values["sites"])
        if values["bath_kind"] is SpectralKind.DISCRETE:
            if not values["bath_modes"] and not (values["n_modes"] and values["xi"] is not None):
                raise ValueError("a discrete bath needs bath_modes or xi together with n_modes")
        return values

    @property
    def svd_cutoff(self) -> float:
        """Relative discarded weight handed to every truncating SVD"""
        if self.cutoff_norm is TruncationNorm.WEIGHT:
            return self.cutoff
        return self.cutoff**2

    @property
    def spin_model(self) -> SpinChainModel:
        return SpinChainModel(
            preset=self.model,
            sites=self.sites,
            epsilon=self.epsilon,
            omega=self.omega,
            jx=self.jx,
            jy=self.jy,
            jz=self.jz,
        )

    @property
    def bath(self) -> Optional[BathModel]:
        """The bath on every site, or ``None`` for the bare chain"""
        if self.bath_modes:
            return BathModel(kind=SpectralKind.DISCRETE, beta=self.beta, modes=self.bath_modes)
        if self.xi is None:
            return None
        ohmic = BathModel(xi=self.xi, omega_c=self.omega_c, beta=self.beta)
        if self.bath_kind is SpectralKind.DISCRETE:
            assert self.n_modes is not None
            return ohmic.discretize(self.n_modes, self.omega_max)
        return ohmic

    @property
    def observable_specs(self) -> list[ObservableSpec]:
        specs: list[ObservableSpec] = []
        for token in self.observables:
            specs.extend(parse_observable(token, self.sites))
        return specs

    def snapshot(self) -> dict[str, Any]:
        """Plain (JSON/YAML ready) copy of every field"""
        return json.loads(self.json())

    def with_overrides(self, **changes: Any) -> SimulationConfig:
        """Validated copy with some fields replaced (aliases accepted)"""
        remap_aliases(changes)
        data = self.dict()
        data.update(changes)
        try:
            return SimulationConfig(**data)
        except ValidationError as exc:
            raise ConfigError(format_validation_error(exc), exc)
