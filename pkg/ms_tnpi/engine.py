"""
Time stepping of the two-dimensional network.

The state holds a window of grid columns (the last ``memory_length`` time points plus the
newest one) and a frontier MPS that already contains every column older than the window.
Each step recomputes the factors that change once the previous last point becomes an
interior point, retires the oldest column into the frontier, turns the last column into
a full propagator column, attaches a new last column and the influence functional
factors of the new point, then contracts the window to read out the reduced density.
"""
from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from .config import CORRELATORS, ObservableSpec, SimulationConfig
from .constants import PAULI_OPERATORS, SPIN_VALUES, TRACE_DRIFT_WARNING, ColumnRole, IndexKind
from .exceptions import EngineError, StructuralError
from .grid import GridColumn
from .influence import EtaTable, apply_if_rows, eta_coefficients
from .mp import (
    MatrixProductOperator,
    MatrixProductState,
    apply_mpo,
    bond_stats,
    expectation,
    expectation_product,
    identity_mpo,
    mpo_product,
    trace,
)
from .model import SpinChainModel
from .propagator import PropagatorFactors, build_fb_mpo, split_fb_mpo
from .storage import initial_state
from .tensor import Index, Tensor, TruncationRecord, multiply, reindex

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Observation:
    """Everything recorded after one step; dense reference runs carry no bond data"""

    step: int
    time: float
    values: dict[str, complex]
    trace: complex
    max_bond: Optional[int] = None
    avg_bond: Optional[Fraction] = None


@dataclass
class Trajectory:
    """Observations of a run, one per time point starting at t = 0"""

    config: SimulationConfig
    observations: list[Observation] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.observations)

    @property
    def times(self) -> np.ndarray:
        return np.array([observation.time for observation in self.observations])

    def series(self, observable: Union[ObservableSpec, str]) -> np.ndarray:
        """Values of one observable (``sz@1`` or an :class:`ObservableSpec`) over time"""
        key = str(observable)
        try:
            return np.array([observation.values[key] for observation in self.observations])
        except KeyError:
            raise EngineError(f"Observable '{key}' was not recorded")

    def max_bonds(self) -> list[int]:
        return [o.max_bond for o in self.observations if o.max_bond is not None]


@dataclass
class EngineState:
    """
    Mutable state of one run. ``columns`` are ordered by time point; ``frontier`` carries
    the site indices of the oldest window column (the initial density before any column
    is retired).
    """

    config: SimulationConfig
    model: SpinChainModel
    factors: PropagatorFactors
    eta: tuple[EtaTable, ...]
    coupling_values: np.ndarray
    initial: MatrixProductState
    frontier: MatrixProductState
    columns: list[GridColumn]
    density: MatrixProductState
    step_count: int = 0
    history: list[Observation] = field(default_factory=list)
    record: TruncationRecord = field(default_factory=TruncationRecord)

    @property
    def has_bath(self) -> bool:
        return not all(table.is_zero for table in self.eta)

    @property
    def time(self) -> float:
        return self.step_count * self.config.dt

    def column(self, point: int) -> GridColumn:
        for column in self.columns:
            if column.point == point:
                return column
        raise StructuralError(f"Column {point} is not in the window")


def _site_indices(sites: int, point: int, d2: int) -> tuple[Index, ...]:
    return tuple(Index(d2, IndexKind.SITE, ("i", i, "n", point)) for i in range(sites))


def _instantiate_u(
    factors: PropagatorFactors, sites: Sequence[Index]
) -> tuple[list[Tensor], tuple[Index, ...], tuple[Index, ...]]:
    """Copies of the U factors on ``sites`` with fresh spatial and temporal bonds"""
    spatial = tuple(bond.clone() for bond in factors.spatial_bonds)
    temporal = tuple(bond.clone() for bond in factors.temporal_bonds)
    mapping = dict(zip(factors.in_indices, sites))
    mapping.update(zip(factors.spatial_bonds, spatial))
    mapping.update(zip(factors.temporal_bonds, temporal))
    return [reindex(u, mapping) for u in factors.u_tensors], spatial, temporal


def _instantiate_r(
    factors: PropagatorFactors, temporal: Sequence[Index], sites: Sequence[Index]
) -> list[Tensor]:
    mapping = dict(zip(factors.temporal_bonds, temporal))
    mapping.update(zip(factors.out_indices, sites))
    return [reindex(r, mapping) for r in factors.r_tensors]


def _observe(state: EngineState) -> Observation:
    density = state.density
    values = {}
    for spec in state.config.observable_specs:
        if spec.name in CORRELATORS:
            operator = PAULI_OPERATORS[CORRELATORS[spec.name]]
            values[str(spec)] = expectation_product(
                density, {site - 1: operator for site in spec.sites}
            )
        else:
            values[str(spec)] = expectation(density, spec.sites[0], PAULI_OPERATORS[spec.name])

    max_bond, avg_bond = bond_stats(density)
    return Observation(
        step=state.step_count,
        time=state.time,
        values=values,
        max_bond=max_bond,
        avg_bond=avg_bond,
        trace=trace(density),
    )


def _record(state: EngineState) -> None:
    observation = _observe(state)
    if abs(observation.trace - 1.0) > TRACE_DRIFT_WARNING:
        logger.warning(
            f"Trace of the reduced density drifted to {observation.trace:.8f} "
            f"at step {state.step_count}"
        )
    state.history.append(observation)
    logger.debug(
        f"step {observation.step}: bonds max={observation.max_bond} "
        f"avg={float(observation.avg_bond or 0):.2f}, {len(state.columns)} columns in the window"
    )


def _readout(state: EngineState) -> MatrixProductState:
    """Frontier contracted with every window column; site indices of the newest point"""
    config = state.config
    density = state.frontier
    for column in state.columns:
        density = apply_mpo(column.to_mpo(), density, config.svd_cutoff, config.max_dim)
    return density


def _renormalize(state: EngineState) -> None:
    norm = trace(state.density)
    if norm == 0:
        raise EngineError(f"The reduced density vanished at step {state.step_count}")
    first = state.density.tensors[0].scale(1.0 / norm)
    state.density = state.density.with_tensors(
        (first, *state.density.tensors[1:]), state.density.bonds
    )
    first = state.frontier.tensors[0].scale(1.0 / norm)
    state.frontier = state.frontier.with_tensors(
        (first, *state.frontier.tensors[1:]), state.frontier.bonds
    )


def _new_state(
    config: SimulationConfig,
    model: SpinChainModel,
    factors: PropagatorFactors,
    eta: tuple[EtaTable, ...],
    coupling_values: np.ndarray,
    rho0: MatrixProductState,
) -> EngineState:
    """Window holding only the first column, with the factors of the initial point"""
    sites = _site_indices(model.sites, 0, model.d**2)
    tensors, spatial, temporal = _instantiate_u(factors, sites)
    first = GridColumn(
        point=0,
        role=ColumnRole.INITIAL,
        tensors=tuple(tensors),
        site_indices=sites,
        spatial_bonds=spatial,
        temporal_out=temporal,
    )

    state = EngineState(
        config=config,
        model=model,
        factors=factors,
        eta=eta,
        coupling_values=coupling_values,
        initial=rho0,
        frontier=rho0,
        columns=[first],
        density=rho0,
    )
    if state.has_bath:
        state.columns = apply_if_rows(
            state.columns,
            eta,
            0,
            0,
            config.svd_cutoff,
            config.max_dim,
            values=coupling_values,
            record=state.record,
        )
    return state


def init_grid(
    config: SimulationConfig,
    fill_window: bool = True,
    rho0: Optional[MatrixProductState] = None,
    site_eta: Optional[Sequence[EtaTable]] = None,
) -> EngineState:
    """
    Builds the propagator factors and the bath coefficients and places the first column.
    With ``fill_window`` the grid is stepped until the window holds ``memory_length``
    steps (or the whole run when it is shorter).

    ``rho0`` replaces the configured initial state and ``site_eta`` gives every site its
    own bath coefficients.
    """
    model = config.spin_model
    bath = config.bath

    propagator = build_fb_mpo(model, config.dt, config.svd_cutoff, config.max_dim)
    factors = split_fb_mpo(propagator, config.svd_cutoff, config.max_dim)
    logger.info(
        f"Propagator for P={model.sites}: spatial bonds {propagator.bond_dims()}, "
        f"temporal bonds {factors.temporal_dims()}"
    )

    if site_eta is not None:
        eta = tuple(site_eta)
        if len(eta) != model.sites:
            raise StructuralError(f"{len(eta)} eta tables given for {model.sites} sites")
    else:
        eta = (eta_coefficients(bath, config.dt, config.memory_length, config.eta_cache),)
        eta = eta * model.sites

    coupling_values = bath.coupling_values if bath is not None else SPIN_VALUES
    rho0 = rho0 if rho0 is not None else initial_state(config.initial_state, model.sites)
    if rho0.P != model.sites:
        raise StructuralError(f"Initial state has {rho0.P} sites, the chain has {model.sites}")

    state = _new_state(config, model, factors, eta, coupling_values, rho0)
    _record(state)

    if fill_window:
        for _ in range(min(config.memory_length, config.nsteps)):
            step(state)
    return state


def step(state: EngineState) -> EngineState:
    """Advances the state by one time step and records the observables of the new point"""
    config = state.config
    current = state.step_count
    memory = config.memory_length

    if state.has_bath and current >= 1:
        state.columns = apply_if_rows(
            state.columns,
            state.eta,
            current,
            min(current, memory),
            config.svd_cutoff,
            config.max_dim,
            final_point=current + 1,
            previous_final=current,
            values=state.coupling_values,
            record=state.record,
        )

    while state.columns and state.columns[0].point <= current - memory:
        retired = state.columns.pop(0)
        state.frontier = apply_mpo(
            retired.to_mpo(), state.frontier, config.svd_cutoff, config.max_dim, state.record
        )
        bonds = state.frontier.bond_dims()
        logger.debug(f"Retired column {retired.point}, frontier bonds {bonds}")

    last = state.columns[-1]
    if current >= 1:
        u_tensors, spatial, temporal = _instantiate_u(state.factors, last.site_indices)
        state.columns[-1] = last.replace(
            role=ColumnRole.INTERMEDIATE,
            tensors=tuple(multiply(r, u) for r, u in zip(last.tensors, u_tensors)),
            spatial_bonds=spatial,
            temporal_out=temporal,
        )
    last = state.columns[-1]
    assert last.temporal_out is not None

    sites = _site_indices(state.model.sites, current + 1, state.model.d**2)
    state.columns.append(
        GridColumn(
            point=current + 1,
            role=ColumnRole.TERMINAL,
            tensors=tuple(_instantiate_r(state.factors, last.temporal_out, sites)),
            site_indices=sites,
            temporal_in=last.temporal_out,
        )
    )

    if state.has_bath:
        state.columns = apply_if_rows(
            state.columns,
            state.eta,
            current + 1,
            min(current + 1, memory),
            config.svd_cutoff,
            config.max_dim,
            final_point=current + 1,
            values=state.coupling_values,
            record=state.record,
        )

    state.step_count = current + 1
    state.density = _readout(state)
    if config.renormalize:
        _renormalize(state)
    _record(state)
    return state


def density_at(state: EngineState) -> MatrixProductState:
    """Reduced density MPS at the current time point"""
    return state.density


def augmented_propagator(state: EngineState, n: int) -> MatrixProductOperator:
    """
    Operator mapping the initial density onto the density ``n`` steps later, including
    every bath factor within those steps. Requires ``0 <= n <= memory_length``.
    """
    config = state.config
    if not 0 <= n <= config.memory_length:
        raise EngineError(
            f"Augmented propagators are available for 0 <= n <= {config.memory_length}, got {n}"
        )
    if n == 0:
        return identity_mpo(state.initial.site_indices)

    scratch = _new_state(
        config, state.model, state.factors, state.eta, state.coupling_values, state.initial
    )
    for _ in range(n):
        step(scratch)

    operator = scratch.columns[0].to_mpo()
    for column in scratch.columns[1:]:
        operator = mpo_product(column.to_mpo(), operator, config.svd_cutoff, config.max_dim)
    return operator


def run_simulation(
    config: SimulationConfig, rho0: Optional[MatrixProductState] = None
) -> Trajectory:
    """Runs ``config.nsteps`` steps and returns every recorded observation"""
    logger.info(
        f"Running P={config.sites}, dt={config.dt}, N={config.nsteps}, "
        f"L={config.memory_length}, cutoff={config.cutoff} ({config.cutoff_norm})"
    )
    state = init_grid(config, rho0=rho0)
    while state.step_count < config.nsteps:
        step(state)

    trajectory = Trajectory(config, list(state.history))
    logger.info(
        f"Finished {config.nsteps} steps; largest bond {max(trajectory.max_bonds())}, "
        f"largest discarded weight {state.record.max_discarded:.1e}"
    )
    return trajectory
