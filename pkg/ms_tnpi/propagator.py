"""
Forward-backward propagator of the bare spin chain as an MPO, built from a symmetric
second-order odd/even splitting of the nearest-neighbour Hamiltonian, and its per-site
factorization into the U and R tensors the grid is assembled from.

A forward-backward propagator maps a vectorised density matrix at one time point onto
the next: ``K[a_out, a_in] = U[s+', s+] * conj(U[s-', s-])`` with ``a = s+ * d + s-``.
"""
from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .constants import IndexKind
from .exceptions import ParameterError
from .model import SpinChainModel, one_body_term, two_body_term
from .mp import MatrixProductOperator, mpo_product
from .tensor import Index, Tensor, contract, svd_truncate, unit_index

logger = logging.getLogger(__name__)

#: Absolute tolerance used to accept a matrix as Hermitian
HERMITIAN_ATOL = 1e-12


def unitary(hamiltonian: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i H dt) by Hermitian eigendecomposition"""
    hamiltonian = np.asarray(hamiltonian, dtype=complex)
    if not np.allclose(hamiltonian, hamiltonian.conj().T, rtol=0.0, atol=HERMITIAN_ATOL):
        raise ParameterError("Propagators can only be built from Hermitian matrices")
    energies, vectors = scipy.linalg.eigh(hamiltonian)
    return (vectors * np.exp(-1j * energies * dt)[np.newaxis, :]) @ vectors.conj().T


def single_site_fb_propagator(hamiltonian: np.ndarray, dt: float) -> np.ndarray:
    """Forward-backward propagator of one site, laid out ``[in, out]`` (each of size d**2)"""
    u = unitary(hamiltonian, dt)
    d = u.shape[0]
    return np.einsum("wy,WY->yYwW", u, u.conj()).reshape(d * d, d * d)


def two_body_fb_propagator(hamiltonian: np.ndarray, dt: float) -> np.ndarray:
    """
    Forward-backward propagator of a pair of sites, laid out
    ``[in_left, in_right, out_left, out_right]`` with every leg a fused (s+, s-) pair.
    """
    u = unitary(hamiltonian, dt)
    d = int(round(np.sqrt(u.shape[0])))
    u = u.reshape(d, d, d, d)
    blocks = np.einsum("wxyz,WXYZ->yYzZwWxX", u, u.conj())
    return blocks.reshape((d * d,) * 4)


def pair_hamiltonian(model: SpinChainModel, bond: int) -> np.ndarray:
    """
    Two-body term of ``bond`` (0-based, joining sites ``bond`` and ``bond + 1``) plus the
    one-body terms of both sites: half of each, or all of it for a chain end.
    """
    left, right = bond + 1, bond + 2
    weight_left = 1.0 if left == 1 else 0.5
    weight_right = 1.0 if right == model.sites else 0.5
    identity = np.eye(model.d)
    return (
        two_body_term(model, left)
        + weight_left * np.kron(one_body_term(model, left), identity)
        + weight_right * np.kron(identity, one_body_term(model, right))
    )


def _layer_mpo(
    model: SpinChainModel, bonds: Sequence[int], dt: float, cutoff: float
) -> MatrixProductOperator:
    """Product of the pair propagators of non-overlapping ``bonds`` as an MPO"""
    d2 = model.d**2
    in_indices = [Index(d2, IndexKind.SITE, ("i", i)) for i in range(model.sites)]
    out_indices = [index.clone() for index in in_indices]
    spatial = [unit_index(IndexKind.SPATIAL_BOND, ("i", i)) for i in range(model.sites - 1)]

    legs: list[list[Index]] = [[in_indices[i], out_indices[i]] for i in range(model.sites)]
    data: dict[int, Tensor] = {}

    for bond in bonds:
        block = Tensor(
            [in_indices[bond], in_indices[bond + 1], out_indices[bond], out_indices[bond + 1]],
            two_body_fb_propagator(pair_hamiltonian(model, bond), dt),
        )
        rows = [in_indices[bond], out_indices[bond]]
        result = svd_truncate(block, rows, cutoff, absorb="both", bond=spatial[bond])
        spatial[bond] = result.bond
        data[bond], data[bond + 1] = result.u, result.v

    tensors = []
    for site in range(model.sites):
        tensor = data[site] if site in data else Tensor(legs[site], np.eye(d2))
        for position in (site - 1, site):
            if 0 <= position < model.sites - 1 and not tensor.has(spatial[position]):
                tensor = Tensor.from_array(
                    (*tensor.indices, spatial[position]), tensor.data[..., np.newaxis]
                )
        tensors.append(tensor)

    return MatrixProductOperator(tensors, in_indices, out_indices, spatial)


def build_fb_mpo(
    model: SpinChainModel, dt: float, cutoff: float, max_dim: int | None = None
) -> MatrixProductOperator:
    """
    Forward-backward propagator of one time step,
    ``K = K_odd(dt / 2) K_even(dt) K_odd(dt / 2)``, where odd bonds are the first, third,
    ... bond of the chain. A single site needs no splitting.
    """
    if model.sites < 1:
        raise ParameterError("A chain needs at least one site")

    if model.sites == 1:
        site_in = Index(model.d**2, IndexKind.SITE, ("i", 0))
        site_out = site_in.clone()
        propagator = single_site_fb_propagator(one_body_term(model, 1), dt)
        tensor = Tensor([site_in, site_out], propagator)
        return MatrixProductOperator([tensor], [site_in], [site_out], [])

    odd_bonds = range(0, model.sites - 1, 2)
    even_bonds = range(1, model.sites - 1, 2)

    half_odd = _layer_mpo(model, odd_bonds, dt / 2, cutoff)
    even = _layer_mpo(model, even_bonds, dt, cutoff)
    second_half_odd = _layer_mpo(model, odd_bonds, dt / 2, cutoff)

    propagator = mpo_product(even, half_odd, cutoff, max_dim)
    propagator = mpo_product(second_half_odd, propagator, cutoff, max_dim)
    logger.debug(f"Propagator MPO for P={model.sites}, dt={dt}: bonds {propagator.bond_dims()}")
    return propagator


@dataclass(frozen=True)
class PropagatorFactors:
    """
    Per-site split ``W_i = U_i . R_i`` of a propagator MPO. ``u_tensors[i]`` carries the
    spatial bonds, the input site index and ``temporal_bonds[i]``; ``r_tensors[i]`` carries
    ``temporal_bonds[i]`` and the output site index.
    """

    u_tensors: tuple[Tensor, ...]
    r_tensors: tuple[Tensor, ...]
    in_indices: tuple[Index, ...]
    out_indices: tuple[Index, ...]
    spatial_bonds: tuple[Index, ...]
    temporal_bonds: tuple[Index, ...]

    @property
    def P(self) -> int:
        return len(self.u_tensors)

    def temporal_dims(self) -> list[int]:
        return [bond.dim for bond in self.temporal_bonds]

    def to_mpo(self) -> MatrixProductOperator:
        tensors = [contract(u, r) for u, r in zip(self.u_tensors, self.r_tensors)]
        return MatrixProductOperator(
            tensors, self.in_indices, self.out_indices, self.spatial_bonds
        )


def split_fb_mpo(
    propagator: MatrixProductOperator, cutoff: float, max_dim: int | None = None
) -> PropagatorFactors:
    """Splits every MPO tensor across (spatial bonds, input | output)"""
    u_tensors, r_tensors, temporal = [], [], []
    for site, (tensor, index_out) in enumerate(zip(propagator.tensors, propagator.out_indices)):
        rows = [index for index in tensor.indices if index != index_out]
        result = svd_truncate(
            tensor,
            rows,
            cutoff,
            max_dim,
            absorb="both",
            bond=Index(1, IndexKind.TEMPORAL_BOND, ("i", site)),
        )
        u_tensors.append(result.u)
        r_tensors.append(result.v)
        temporal.append(result.bond)

    logger.debug(f"Temporal bond dimensions of the propagator: {[b.dim for b in temporal]}")
    return PropagatorFactors(
        tuple(u_tensors),
        tuple(r_tensors),
        propagator.in_indices,
        propagator.out_indices,
        propagator.bonds,
        tuple(temporal),
    )
