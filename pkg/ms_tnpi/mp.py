"""
Matrix product states and operators built on :mod:`ms_tnpi.tensor`.

A site index of dimension d**2 holds a forward-backward pair (s+, s-) in row-major order,
s+ slow and s- fast, i.e. the row-major vectorisation of a d x d density matrix.
Operators map their ``in_indices`` onto their ``out_indices``; as dense matrices they are
laid out ``[out, in]`` so that applying an operator is a matrix-vector product.
"""
from __future__ import annotations

import logging
from collections.abc import Iterable, Mapping, Sequence
from fractions import Fraction
from math import isqrt, prod

import numpy as np

from .constants import IndexKind
from .exceptions import ParameterError, StructuralError
from .tensor import (
    Index,
    Tensor,
    TruncationRecord,
    compress_chain,
    contract,
    fuse,
    reindex,
    sum_over,
    svd_truncate,
)

logger = logging.getLogger(__name__)


def local_dim(site_index: Index) -> int:
    """Hilbert space dimension d of a forward-backward site index of size d**2"""
    d = isqrt(site_index.dim)
    if d * d != site_index.dim:
        raise StructuralError(f"{site_index!r} is not a forward-backward site index")
    return d


def trace_vector(d: int) -> np.ndarray:
    """Weights that turn a vectorised d x d matrix into its trace"""
    return np.eye(d, dtype=complex).reshape(-1)


def observable_vector(observable: np.ndarray) -> np.ndarray:
    """Weights w such that sum(w * vec(rho)) equals Tr(rho O)"""
    return np.asarray(observable, dtype=complex).T.reshape(-1)


class _Chain:
    """Shared wiring checks of open-boundary chains"""

    tensors: tuple[Tensor, ...]
    bonds: tuple[Index, ...]

    def _check_wiring(self, legs: Sequence[Sequence[Index]]) -> None:
        if len(self.tensors) == 0:
            raise ParameterError("A matrix product chain needs at least one tensor")
        if len(self.bonds) != len(self.tensors) - 1:
            raise StructuralError(
                f"{len(self.tensors)} tensors need {len(self.tensors) - 1} spatial bonds"
            )
        for position, tensor in enumerate(self.tensors):
            expected = set(legs[position])
            if position > 0:
                expected.add(self.bonds[position - 1])
            if position < len(self.bonds):
                expected.add(self.bonds[position])
            if set(tensor.indices) != expected:
                raise StructuralError(
                    f"Tensor {position} carries {list(tensor.indices)}, expected {expected}"
                )

    def __len__(self) -> int:
        return len(self.tensors)

    def __getitem__(self, position: int) -> Tensor:
        return self.tensors[position]

    def __iter__(self):
        return iter(self.tensors)

    @property
    def P(self) -> int:
        return len(self.tensors)

    def bond_dims(self) -> list[int]:
        return [bond.dim for bond in self.bonds]

    def _contract_all(self) -> Tensor:
        result = self.tensors[0]
        for tensor in self.tensors[1:]:
            result = contract(result, tensor)
        return result


class MatrixProductState(_Chain):
    """
    Chain of P tensors, each with one site index and its spatial bonds. Holds the
    vectorised reduced density tensor of the spin chain.
    """

    site_indices: tuple[Index, ...]

    def __init__(
        self,
        tensors: Iterable[Tensor],
        site_indices: Iterable[Index],
        bonds: Iterable[Index],
    ):
        self.tensors = tuple(tensors)
        self.site_indices = tuple(site_indices)
        self.bonds = tuple(bonds)
        if len(self.site_indices) != len(self.tensors):
            raise StructuralError("Every tensor of an MPS needs exactly one site index")
        self._check_wiring([[site] for site in self.site_indices])

    def __repr__(self) -> str:
        return f"MatrixProductState(P={self.P}, bonds={self.bond_dims()})"

    def indices(self) -> set[Index]:
        return {index for tensor in self.tensors for index in tensor.indices}

    def to_dense(self) -> np.ndarray:
        """Full coefficient vector, site 1 slowest"""
        return self._contract_all().to_array(self.site_indices).reshape(-1)

    def with_tensors(
        self, tensors: Sequence[Tensor], bonds: Sequence[Index]
    ) -> MatrixProductState:
        return MatrixProductState(tensors, self.site_indices, bonds)


class MatrixProductOperator(_Chain):
    """
    Chain of P tensors, each with an input and an output site index plus spatial bonds.
    Holds forward-backward propagators, grid columns and influence functional operators.
    """

    in_indices: tuple[Index, ...]
    out_indices: tuple[Index, ...]

    def __init__(
        self,
        tensors: Iterable[Tensor],
        in_indices: Iterable[Index],
        out_indices: Iterable[Index],
        bonds: Iterable[Index],
    ):
        self.tensors = tuple(tensors)
        self.in_indices = tuple(in_indices)
        self.out_indices = tuple(out_indices)
        self.bonds = tuple(bonds)
        if not len(self.in_indices) == len(self.out_indices) == len(self.tensors):
            raise StructuralError("Every tensor of an MPO needs one input and one output index")
        self._check_wiring(list(zip(self.in_indices, self.out_indices)))

    def __repr__(self) -> str:
        return f"MatrixProductOperator(P={self.P}, bonds={self.bond_dims()})"

    def indices(self) -> set[Index]:
        return {index for tensor in self.tensors for index in tensor.indices}

    def to_dense(self) -> np.ndarray:
        """Dense matrix laid out ``[out, in]``, site 1 slowest on both sides"""
        dense = self._contract_all().to_array(self.out_indices + self.in_indices)
        rows = prod(index.dim for index in self.out_indices)
        return dense.reshape(rows, -1)

    def relabel(self, mapping: Mapping[Index, Index]) -> MatrixProductOperator:
        def swap(index):
            return mapping.get(index, index)

        return MatrixProductOperator(
            (reindex(tensor, mapping) for tensor in self.tensors),
            map(swap, self.in_indices),
            map(swap, self.out_indices),
            map(swap, self.bonds),
        )

    def detached(self, taken: set[Index]) -> MatrixProductOperator:
        """Copy whose indices avoid ``taken``; colliding indices are replaced by clones"""
        mapping = {index: index.clone() for index in self.indices() if index in taken}
        return self.relabel(mapping) if mapping else self


def product_mps(site_states: Sequence[np.ndarray], atol: float = 1e-10) -> MatrixProductState:
    """
    Bond-dimension-one MPS from vectorised single-site density matrices.
    """
    if len(site_states) == 0:
        raise ParameterError("product_mps needs at least one site state")

    sites = []
    for position, state in enumerate(site_states):
        vector = np.asarray(state, dtype=complex).reshape(-1)
        d = isqrt(vector.size)
        if d * d != vector.size:
            raise ParameterError(f"Site state {position} has length {vector.size}, not d**2")
        if abs(np.trace(vector.reshape(d, d)) - 1.0) > atol:
            raise ParameterError(f"Site state {position} does not have unit trace")
        sites.append(Index(d * d, IndexKind.SITE, ("i", position)))

    bonds = [Index(1, IndexKind.SPATIAL_BOND, ("i", i)) for i in range(len(site_states) - 1)]
    tensors = []
    for position, state in enumerate(site_states):
        legs = [sites[position]]
        if position > 0:
            legs.insert(0, bonds[position - 1])
        if position < len(bonds):
            legs.append(bonds[position])
        tensors.append(Tensor(legs, np.asarray(state, dtype=complex)))

    return MatrixProductState(tensors, sites, bonds)


def mps_from_dense(
    vector: np.ndarray, site_dims: Sequence[int], cutoff: float = 0.0
) -> MatrixProductState:
    """Sequential SVD of a dense coefficient vector (site 1 slowest) into an MPS"""
    sites = [Index(dim, IndexKind.SITE, ("i", i)) for i, dim in enumerate(site_dims)]
    rest = Tensor(sites, np.asarray(vector, dtype=complex))
    tensors, bonds = [], []
    left: list[Index] = []
    for position in range(len(sites) - 1):
        template = Index(1, IndexKind.SPATIAL_BOND, ("i", position))
        rows = left + [sites[position]]
        result = svd_truncate(rest, rows, cutoff, absorb="right", bond=template)
        tensors.append(result.u)
        bonds.append(result.bond)
        rest = result.v
        left = [result.bond]
    tensors.append(rest)
    return MatrixProductState(tensors, sites, bonds)


def identity_mpo(in_indices: Sequence[Index]) -> MatrixProductOperator:
    """Identity operator on the given site indices; outputs are fresh clones"""
    out_indices = [index.clone() for index in in_indices]
    bonds = [Index(1, IndexKind.SPATIAL_BOND, ("i", i)) for i in range(len(in_indices) - 1)]
    tensors = []
    for position, (index_in, index_out) in enumerate(zip(in_indices, out_indices)):
        legs = [index_in, index_out]
        if position > 0:
            legs.append(bonds[position - 1])
        if position < len(bonds):
            legs.append(bonds[position])
        tensors.append(Tensor(legs, np.eye(index_in.dim)))
    return MatrixProductOperator(tensors, in_indices, out_indices, bonds)


def _fuse_bond_pairs(
    tensors: list[Tensor], first: Sequence[Index], second: Sequence[Index]
) -> list[Index]:
    """Fuses bond ``first[j]`` with ``second[j]`` on both neighbours, first slowest"""
    fused = []
    for position, (bond_a, bond_b) in enumerate(zip(first, second)):
        new_bond = Index(bond_a.dim * bond_b.dim, IndexKind.SPATIAL_BOND, bond_a.tags)
        tensors[position] = fuse(tensors[position], [bond_a, bond_b], new_bond)
        tensors[position + 1] = fuse(tensors[position + 1], [bond_a, bond_b], new_bond)
        fused.append(new_bond)
    return fused


def apply_mpo(
    op: MatrixProductOperator,
    state: MatrixProductState,
    cutoff: float,
    max_dim: int | None = None,
    record: TruncationRecord | None = None,
) -> MatrixProductState:
    """
    Contracts ``op`` onto ``state`` site by site and recompresses the result. The new
    site indices are the operator's output indices.
    """
    if op.P != state.P:
        raise StructuralError(f"MPO has {op.P} sites but the MPS has {state.P}")
    for index_in, site in zip(op.in_indices, state.site_indices):
        if index_in.dim != site.dim:
            raise StructuralError(f"Site dimension mismatch between {index_in!r} and {site!r}")

    op = op.detached(state.indices())
    op = op.relabel(dict(zip(op.in_indices, state.site_indices)))

    tensors = [contract(a, b) for a, b in zip(state.tensors, op.tensors)]
    bonds = _fuse_bond_pairs(tensors, state.bonds, op.bonds)
    tensors, bonds, truncation = compress_chain(tensors, bonds, cutoff, max_dim)
    if record is not None:
        record.ranks.extend(truncation.ranks)
        record.discarded.extend(truncation.discarded)

    return MatrixProductState(tensors, op.out_indices, bonds)


def mpo_product(
    a: MatrixProductOperator,
    b: MatrixProductOperator,
    cutoff: float,
    max_dim: int | None = None,
) -> MatrixProductOperator:
    """
    Operator product ``a . b`` (``b`` acts first), recompressed at ``cutoff``.
    """
    if a.P != b.P:
        raise StructuralError(f"MPO lengths differ: {a.P} and {b.P}")

    a = a.detached(b.indices())
    a = a.relabel(dict(zip(a.in_indices, b.out_indices)))

    tensors = [contract(tensor_b, tensor_a) for tensor_a, tensor_b in zip(a.tensors, b.tensors)]
    bonds = _fuse_bond_pairs(tensors, b.bonds, a.bonds)
    tensors, bonds, _ = compress_chain(tensors, bonds, cutoff, max_dim)
    return MatrixProductOperator(tensors, b.in_indices, a.out_indices, bonds)


def compress(
    state: MatrixProductState, cutoff: float, max_dim: int | None = None
) -> MatrixProductState:
    tensors, bonds, _ = compress_chain(state.tensors, state.bonds, cutoff, max_dim)
    return state.with_tensors(tensors, bonds)


def contract_with_vectors(state: MatrixProductState, vectors: Sequence[np.ndarray]) -> complex:
    """Contracts every site index of ``state`` with the matching weight vector"""
    environment: Tensor | None = None
    for tensor, site, vector in zip(state.tensors, state.site_indices, vectors):
        reduced = sum_over(tensor, site, vector)
        environment = reduced if environment is None else contract(environment, reduced)
    assert environment is not None
    return complex(environment.data.reshape(-1)[0])


def trace(state: MatrixProductState) -> complex:
    return contract_with_vectors(
        state, [trace_vector(local_dim(site)) for site in state.site_indices]
    )


def expectation_product(
    state: MatrixProductState, operators: Mapping[int, np.ndarray]
) -> complex:
    """Tr(rho . prod_i O_i) for operators acting on distinct sites (0-based)"""
    vectors = []
    for position, site in enumerate(state.site_indices):
        if position in operators:
            vectors.append(observable_vector(operators[position]))
        else:
            vectors.append(trace_vector(local_dim(site)))
    for position in operators:
        if not 0 <= position < state.P:
            raise ParameterError(f"Site {position + 1} is outside of the chain 1..{state.P}")
    return contract_with_vectors(state, vectors)


def expectation(state: MatrixProductState, site: int, observable: np.ndarray) -> complex:
    """Tr(rho O_site) with ``site`` counted from 1"""
    if not 1 <= site <= state.P:
        raise ParameterError(f"Site {site} is outside of the chain 1..{state.P}")
    return expectation_product(state, {site - 1: observable})


def reduced_density(state: MatrixProductState, site: int) -> np.ndarray:
    """One-body reduced density matrix of ``site`` (counted from 1)"""
    if not 1 <= site <= state.P:
        raise ParameterError(f"Site {site} is outside of the chain 1..{state.P}")
    d = local_dim(state.site_indices[site - 1])
    environment: Tensor | None = None
    for position, (tensor, index) in enumerate(zip(state.tensors, state.site_indices)):
        reduced = tensor if position == site - 1 else sum_over(tensor, index, trace_vector(d))
        environment = reduced if environment is None else contract(environment, reduced)
    assert environment is not None
    target = state.site_indices[site - 1]
    return environment.to_array([target]).reshape(d, d)


def bond_stats(state: MatrixProductState) -> tuple[int, Fraction]:
    """Maximum and mean spatial bond dimension; a single site reports (1, 1)"""
    dims = state.bond_dims()
    if not dims:
        return 1, Fraction(1)
    return max(dims), Fraction(sum(dims), len(dims))
