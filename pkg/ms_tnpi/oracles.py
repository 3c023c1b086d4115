"""
Brute-force reference solvers.

Everything here works on dense matrices and is only usable for very small chains; each
solver checks its problem size first and raises :class:`OracleSizeError` instead of
running out of memory. Dense density matrices use the standard ordering (site 1 slowest,
kets before bras); :meth:`DenseState.site_vector` converts to the per-site
forward-backward ordering of the matrix product states.
"""
from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from functools import reduce
from itertools import product
from typing import Optional, Union

import numpy as np
import scipy.linalg

from .config import CORRELATORS, SimulationConfig
from .constants import PAULI_OPERATORS, SIGMA_Z, SPIN_DIM, SPIN_VALUES, OracleKind
from .engine import Observation, Trajectory
from .exceptions import ConfigError, OracleSizeError, ParameterError
from .influence import EtaTable, eta_coefficients
from .model import SpectralKind, SpinChainModel, chain_hamiltonian, embed_operator, one_body_term
from .mp import MatrixProductState
from .propagator import pair_hamiltonian, unitary
from .storage import initial_state

logger = logging.getLogger(__name__)

#: Largest chain the dense propagation oracles accept
DENSE_SITE_LIMIT = 10

#: Largest chain the path sum accepts
PATH_SUM_SITE_LIMIT = 2

#: Largest number of path amplitudes the path sum holds at once
PATH_SUM_TERM_LIMIT = 2**24

#: Largest Hilbert space dimension of the system plus bath diagonalization
EXACT_DIAG_DIM_LIMIT = 2**14

#: Tolerance used when checking that an oracle state is a density matrix
PHYSICAL_ATOL = 1e-10


def _site_order(sites: int) -> list[int]:
    """Axis order taking (k_1..k_P, b_1..b_P) to (k_1, b_1, ..., k_P, b_P)"""
    return [axis for site in range(sites) for axis in (site, sites + site)]


def _site_permutation(sites: int, d: int = SPIN_DIM) -> np.ndarray:
    """``v_site = v_std[perm]`` for vectorised density matrices"""
    positions = np.arange(d ** (2 * sites)).reshape((d,) * (2 * sites))
    return positions.transpose(_site_order(sites)).reshape(-1)


@dataclass(frozen=True)
class DenseState:
    """Reduced density matrix of a short chain as a dense matrix"""

    rho: np.ndarray
    sites: int
    d: int = SPIN_DIM

    @classmethod
    def from_site_vector(cls, vector: np.ndarray, sites: int, d: int = SPIN_DIM) -> DenseState:
        vector = np.asarray(vector, dtype=complex).reshape((d,) * (2 * sites))
        inverse = np.argsort(_site_order(sites))
        dim = d**sites
        return cls(vector.transpose(inverse).reshape(dim, dim), sites, d)

    @classmethod
    def from_mps(cls, state: MatrixProductState) -> DenseState:
        return cls.from_site_vector(state.to_dense(), state.P)

    def site_vector(self) -> np.ndarray:
        """Vectorisation in the per-site forward-backward ordering of the MPS"""
        return self.rho.reshape(-1)[_site_permutation(self.sites, self.d)]

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    def expectation(self, operators: dict[int, np.ndarray]) -> complex:
        """Tr(rho . prod_i O_i) for single-site operators keyed by site (counted from 1)"""
        full = np.eye(self.d**self.sites, dtype=complex)
        for site, operator in operators.items():
            if not 1 <= site <= self.sites:
                raise ParameterError(f"Site {site} is outside of the chain 1..{self.sites}")
            full = full @ embed_operator(operator, site, self.sites)
        return complex(np.trace(self.rho @ full))

    def reduced(self, site: int) -> np.ndarray:
        """One-body reduced density matrix of ``site`` (counted from 1)"""
        tensor = self.rho.reshape((self.d,) * (2 * self.sites))
        kets = [chr(ord("a") + i) for i in range(self.sites)]
        bras = list(kets)
        bras[site - 1] = "z"
        subscripts = "".join(kets + bras) + "->" + kets[site - 1] + "z"
        return np.einsum(subscripts, tensor)

    def is_physical(self, atol: float = PHYSICAL_ATOL) -> bool:
        """Hermitian, unit trace and positive semidefinite within ``atol``"""
        if not np.allclose(self.rho, self.rho.conj().T, rtol=0.0, atol=atol):
            return False
        if abs(self.trace - 1.0) > atol:
            return False
        return bool(np.min(np.linalg.eigvalsh(self.rho)) > -atol)


def _check_dense_size(model: SpinChainModel) -> None:
    if model.sites > DENSE_SITE_LIMIT:
        raise OracleSizeError(
            f"Dense propagation is limited to {DENSE_SITE_LIMIT} sites, got {model.sites}"
        )


def _propagate(u: np.ndarray, rho0: DenseState, nsteps: int) -> list[DenseState]:
    states = [rho0]
    rho = rho0.rho
    for _ in range(nsteps):
        rho = u @ rho @ u.conj().T
        states.append(DenseState(rho, rho0.sites, rho0.d))
    return states


def dense_liouville_trajectory(
    model: SpinChainModel, rho0: DenseState, dt: float, nsteps: int
) -> list[DenseState]:
    """States at every step 0..nsteps under the exact unitary exp(-i H dt)"""
    _check_dense_size(model)
    return _propagate(unitary(chain_hamiltonian(model), dt), rho0, nsteps)


def dense_liouville_propagate(
    model: SpinChainModel, rho0: DenseState, dt: float, n: int
) -> DenseState:
    """rho(n dt) = U^n rho0 U^-n without any splitting error"""
    _check_dense_size(model)
    return _propagate(unitary(chain_hamiltonian(model), n * dt), rho0, 1)[-1]


def trotter_unitary(model: SpinChainModel, dt: float) -> np.ndarray:
    """Dense ``U_odd(dt/2) U_even(dt) U_odd(dt/2)`` built from the same bond terms"""
    _check_dense_size(model)
    if model.sites == 1:
        return unitary(one_body_term(model, 1), dt)

    def layer(bonds, tau):
        result = np.eye(model.d**model.sites, dtype=complex)
        for bond in bonds:
            pair = unitary(pair_hamiltonian(model, bond), tau)
            result = embed_operator(pair, bond + 1, model.sites) @ result
        return result

    odd = layer(range(0, model.sites - 1, 2), dt / 2)
    even = layer(range(1, model.sites - 1, 2), dt)
    return odd @ even @ odd


def fb_superoperator(u: np.ndarray, sites: int, d: int = SPIN_DIM) -> np.ndarray:
    """``rho -> U rho U^dagger`` on per-site forward-backward vectors, laid out [out, in]"""
    perm = _site_permutation(sites, d)
    return np.kron(u, u.conj())[np.ix_(perm, perm)]


def dense_bare_trotter(
    model: SpinChainModel, rho0: DenseState, dt: float, nsteps: int
) -> list[DenseState]:
    """States at every step 0..nsteps under the split-operator propagator"""
    return _propagate(trotter_unitary(model, dt), rho0, nsteps)


def trotter_error(
    model: SpinChainModel, dt: float, horizon: float, rho0: Optional[DenseState] = None
) -> float:
    """Largest elementwise deviation of the split-operator run from the exact one"""
    nsteps = int(round(horizon / dt))
    if nsteps < 1:
        raise ParameterError(f"Horizon {horizon} is shorter than one step of {dt}")
    if rho0 is None:
        rho0 = DenseState.from_mps(initial_state("all_up", model.sites))

    split = dense_bare_trotter(model, rho0, dt, nsteps)
    exact = dense_liouville_trajectory(model, rho0, dt, nsteps)
    return max(float(np.max(np.abs(a.rho - b.rho))) for a, b in zip(split, exact))


def _pair_multipliers(eta: complex, values: np.ndarray) -> np.ndarray:
    """exp(-(s+ - s-)(eta s'+ - conj(eta) s'-)) over all (s+, s-) and (s'+, s'-)"""
    pairs = list(product(values, values))
    multipliers = np.empty((len(pairs), len(pairs)), dtype=complex)
    for a, (plus, minus) in enumerate(pairs):
        for b, (plus_prime, minus_prime) in enumerate(pairs):
            exponent = (plus - minus) * (eta * plus_prime - np.conj(eta) * minus_prime)
            multipliers[a, b] = np.exp(-exponent)
    return multipliers


def _broadcast_pair(matrix: np.ndarray, k: int, k_prime: int, length: int) -> np.ndarray:
    """``matrix[a_k, a_k']`` reshaped to act on axes k > k' of a path array"""
    shape = [1] * length
    shape[k_prime] = matrix.shape[1]
    shape[k] = matrix.shape[0]
    return matrix.T.reshape(shape)


def _broadcast_diagonal(vector: np.ndarray, k: int, length: int) -> np.ndarray:
    shape = [1] * length
    shape[k] = vector.size
    return vector.reshape(shape)


def brute_force_path_sum(
    model: SpinChainModel,
    eta: Union[EtaTable, Sequence[EtaTable]],
    rho0: DenseState,
    nsteps: int,
    values: np.ndarray = SPIN_VALUES,
) -> list[DenseState]:
    """
    States at every step 0..nsteps from an explicit sum over all forward-backward paths:
    split-operator path amplitudes times the influence functional of every site. Pairs of
    points further apart than the memory length of the table are left out.
    """
    tables = [eta] * model.sites if isinstance(eta, EtaTable) else list(eta)
    if len(tables) != model.sites:
        raise ParameterError(f"{len(tables)} eta tables given for {model.sites} sites")
    if model.sites > PATH_SUM_SITE_LIMIT:
        raise OracleSizeError(
            f"The path sum is limited to {PATH_SUM_SITE_LIMIT} sites, got {model.sites}"
        )

    d2 = model.d ** (2 * model.sites)
    terms = d2 ** (nsteps + 1)
    if terms > PATH_SUM_TERM_LIMIT:
        raise OracleSizeError(
            f"The path sum over {nsteps} steps of {model.sites} site(s) needs {terms} terms, "
            f"more than {PATH_SUM_TERM_LIMIT}"
        )

    dt = tables[0].dt
    memory = tables[0].memory_length
    propagator = fb_superoperator(trotter_unitary(model, dt), model.sites, model.d)
    start = rho0.site_vector()

    states = [rho0]
    for final in range(1, nsteps + 1):
        amplitudes = start
        for j in range(final):
            amplitudes = amplitudes[..., np.newaxis] * propagator.T.reshape((1,) * j + (d2, d2))

        for k in range(final + 1):
            for k_prime in range(max(0, k - memory), k + 1):
                joint = reduce(
                    np.kron,
                    [_pair_multipliers(table.get(k, k_prime, final), values) for table in tables],
                )
                if k == k_prime:
                    amplitudes = amplitudes * _broadcast_diagonal(np.diag(joint), k, final + 1)
                else:
                    amplitudes = amplitudes * _broadcast_pair(joint, k, k_prime, final + 1)

        vector = amplitudes.reshape(-1, d2).sum(axis=0)
        states.append(DenseState.from_site_vector(vector, model.sites, model.d))
        logger.debug(f"Path sum to step {final}: {d2 ** (final + 1)} terms")

    return states


def _ladder(levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, levels, dtype=float)), 1).astype(complex)


def _kron_all(factors: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, factors)


def exact_diag_trajectory(
    model: SpinChainModel,
    modes: Sequence[tuple[float, float]],
    fock_levels: int,
    beta: float,
    rho0: DenseState,
    times: Sequence[float],
    coupling: np.ndarray = SIGMA_Z,
) -> list[DenseState]:
    """
    System marginals at ``times`` of the chain coupled to its own copy of the discrete
    bath on every site. Each mode is a truncated oscillator with
    ``w a^dag a - c x s + c**2 s**2 / (2 w**2)`` and ``x = (a + a^dag) / sqrt(2 w)``; the
    bath starts in the Boltzmann state of the uncoupled, truncated oscillators.
    """
    sites = model.sites
    if sites > PATH_SUM_SITE_LIMIT:
        raise OracleSizeError(f"Exact diagonalization is limited to 2 sites, got {sites}")
    if fock_levels < 2:
        raise ParameterError(f"At least two oscillator levels are needed, got {fock_levels}")
    if not modes:
        raise ParameterError("Exact diagonalization needs at least one bath mode")

    n_oscillators = sites * len(modes)
    system_dim = model.d**sites
    bath_dim = fock_levels**n_oscillators
    if system_dim * bath_dim > EXACT_DIAG_DIM_LIMIT:
        raise OracleSizeError(
            f"System plus bath dimension {system_dim * bath_dim} exceeds {EXACT_DIAG_DIM_LIMIT}"
        )

    identities = [np.eye(model.d)] * sites + [np.eye(fock_levels)] * n_oscillators

    def embed(operators: dict[int, np.ndarray]) -> np.ndarray:
        return _kron_all([operators.get(i, identity) for i, identity in enumerate(identities)])

    ladder = _ladder(fock_levels)
    number = ladder.conj().T @ ladder
    hamiltonian = np.kron(chain_hamiltonian(model), np.eye(bath_dim))

    thermal = []
    for site in range(sites):
        s = embed({site: coupling})
        for mode, (frequency, strength) in enumerate(modes):
            slot = sites + site * len(modes) + mode
            x = (ladder + ladder.conj().T) / np.sqrt(2.0 * frequency)
            hamiltonian += frequency * embed({slot: number})
            hamiltonian -= strength * embed({site: coupling, slot: x})
            hamiltonian += strength**2 / (2.0 * frequency**2) * (s @ s)
            weights = np.exp(-beta * frequency * np.arange(fock_levels))
            thermal.append(np.diag(weights / weights.sum()))

    energies, vectors = scipy.linalg.eigh(hamiltonian)
    rho_total = np.kron(rho0.rho, _kron_all(thermal))
    rho_eigen = vectors.conj().T @ rho_total @ vectors

    states = []
    for t in times:
        phases = np.exp(-1j * energies * t)
        evolved = vectors @ (phases[:, np.newaxis] * rho_eigen * phases.conj()) @ vectors.conj().T
        marginal = np.einsum(
            "ibjb->ij", evolved.reshape(system_dim, bath_dim, system_dim, bath_dim)
        )
        states.append(DenseState(marginal, sites, model.d))
    logger.debug(f"Exact diagonalization of dimension {system_dim * bath_dim}")
    return states


def exact_diag_system_bath(
    model: SpinChainModel,
    modes: Sequence[tuple[float, float]],
    fock_levels: int,
    beta: float,
    rho0: DenseState,
    t: float,
    coupling: np.ndarray = SIGMA_Z,
) -> DenseState:
    """System marginal at time ``t``; see :func:`exact_diag_trajectory`"""
    return exact_diag_trajectory(model, modes, fock_levels, beta, rho0, [t], coupling)[0]


def dense_observation(config: SimulationConfig, step: int, state: DenseState) -> Observation:
    values = {}
    for spec in config.observable_specs:
        if spec.name in CORRELATORS:
            operator = PAULI_OPERATORS[CORRELATORS[spec.name]]
            values[str(spec)] = state.expectation({site: operator for site in spec.sites})
        else:
            values[str(spec)] = state.expectation({spec.sites[0]: PAULI_OPERATORS[spec.name]})
    return Observation(step=step, time=step * config.dt, values=values, trace=state.trace)


def oracle_trajectory(config: SimulationConfig, kind: OracleKind) -> Trajectory:
    """Reference trajectory of a configuration computed by one of the oracles"""
    model = config.spin_model
    bath = config.bath
    rho0 = DenseState.from_mps(initial_state(config.initial_state, model.sites))

    if kind is OracleKind.DENSE:
        if bath is not None and not bath.is_trivial:
            logger.warning("The dense oracle ignores the bath")
        states = dense_liouville_trajectory(model, rho0, config.dt, config.nsteps)
    elif kind is OracleKind.PATH_SUM:
        eta = eta_coefficients(bath, config.dt, config.memory_length, config.eta_cache)
        values = bath.coupling_values if bath is not None else SPIN_VALUES
        states = brute_force_path_sum(model, eta, rho0, config.nsteps, values)
    elif kind is OracleKind.EXACT_DIAG:
        if bath is None or bath.kind is not SpectralKind.DISCRETE:
            raise ConfigError(
                "The exact-diag oracle needs a discrete bath: set bath_modes, or "
                "bath_kind = discrete with n_modes"
            )
        times = [step * config.dt for step in range(config.nsteps + 1)]
        states = exact_diag_trajectory(
            model,
            bath.modes,
            config.fock_levels,
            bath.beta,
            rho0,
            times,
            bath.coupling_matrix,
        )
    else:
        raise ParameterError(f"No oracle of kind '{kind}'")

    observations = [dense_observation(config, step, state) for step, state in enumerate(states)]
    logger.info(f"Oracle '{kind}' produced {len(observations)} time points")
    return Trajectory(config, observations)
