"""
Dense tensors with named indices.

Indices are matched by identity, never by position: two tensors are wired together by
holding the same :class:`Index` object (or one carrying the same id). Every other module
builds its networks by sharing indices and lets :func:`contract` work out the axes.
"""
from __future__ import annotations

import itertools
import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from math import prod
from typing import Any, NamedTuple

import numpy as np
import scipy.linalg

from .constants import DEGENERACY_RTOL, IndexKind
from .exceptions import ParameterError, StructuralError

logger = logging.getLogger(__name__)

_index_ids = itertools.count()


def _next_id() -> int:
    return next(_index_ids)


@dataclass(frozen=True, eq=False)
class Index:
    """
    One leg of a tensor.

    ``kind`` separates physical forward-backward site legs from spatial (same time
    point, neighbouring sites) and temporal (same site, neighbouring time points) bonds.
    ``tags`` are free-form labels such as ``("i", 3)`` or ``("n", 7)``.
    """

    dim: int
    kind: IndexKind = IndexKind.SITE
    tags: tuple[Any, ...] = ()
    id: int = field(default_factory=_next_id)

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ParameterError(f"Index dimension must be at least 1, got {self.dim}")

    def __eq__(self, other) -> bool:
        return isinstance(other, Index) and other.id == self.id

    def __hash__(self) -> int:
        return hash(self.id)

    def __repr__(self) -> str:
        tags = ",".join(str(tag) for tag in self.tags)
        return f"Index(#{self.id}, dim={self.dim}, {self.kind}{', ' + tags if tags else ''})"

    def clone(self, dim: int | None = None) -> Index:
        """Same kind and tags, fresh identity (and optionally a new dimension)"""
        return Index(self.dim if dim is None else dim, self.kind, self.tags)


class Tensor:
    """
    Immutable dense complex array whose axes are labelled by :class:`Index` objects.
    """

    __slots__ = ("indices", "data")

    indices: tuple[Index, ...]
    data: np.ndarray

    def __init__(self, indices: Iterable[Index], data: Any):
        indices = tuple(indices)
        array = np.array(data, dtype=complex)
        self._setup(indices, array)

    def _setup(self, indices: tuple[Index, ...], array: np.ndarray) -> None:
        if len(set(indices)) != len(indices):
            raise StructuralError(f"Duplicate index in tensor: {indices}")

        shape = tuple(index.dim for index in indices)
        if array.size != prod(shape):
            raise StructuralError(
                f"Tensor data has {array.size} elements but indices {indices} "
                f"require {prod(shape)}"
            )
        array = array.reshape(shape)
        array.flags.writeable = False

        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "data", array)

    @classmethod
    def from_array(cls, indices: Iterable[Index], array: np.ndarray) -> Tensor:
        """Wraps a freshly computed array without copying it"""
        tensor = cls.__new__(cls)
        tensor._setup(tuple(indices), np.asarray(array, dtype=complex))
        return tensor

    def __setattr__(self, key, value):
        raise AttributeError("Tensor objects are immutable")

    def __repr__(self) -> str:
        return f"Tensor({list(self.indices)})"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return len(self.indices)

    def axis(self, index: Index) -> int:
        try:
            return self.indices.index(index)
        except ValueError:
            raise StructuralError(f"{index!r} is not an index of {self!r}")

    def has(self, index: Index) -> bool:
        return index in self.indices

    def to_array(self, order: Sequence[Index] | None = None) -> np.ndarray:
        """Returns the data with axes arranged in ``order``"""
        if order is None:
            return np.array(self.data)
        if len(order) != self.ndim or set(order) != set(self.indices):
            raise StructuralError(f"Order {list(order)} does not match {self!r}")
        return np.transpose(self.data, [self.axis(index) for index in order])

    def conj(self) -> Tensor:
        return Tensor.from_array(self.indices, np.conj(self.data))

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def scale(self, factor: complex) -> Tensor:
        return Tensor.from_array(self.indices, self.data * factor)

    def __add__(self, other: Tensor) -> Tensor:
        return Tensor.from_array(self.indices, self.data + other.to_array(self.indices))

    def __sub__(self, other: Tensor) -> Tensor:
        return Tensor.from_array(self.indices, self.data - other.to_array(self.indices))


def contract(a: Tensor, b: Tensor) -> Tensor:
    """
    Sums over every index shared by ``a`` and ``b``. The result carries the remaining
    indices of ``a`` followed by those of ``b``.
    """
    shared = [index for index in a.indices if b.has(index)]
    free_a = [index for index in a.indices if index not in shared]
    free_b = [index for index in b.indices if index not in shared]
    result_indices = free_a + free_b

    if len(set(result_indices)) != len(result_indices):
        raise StructuralError(f"Contraction of {a!r} and {b!r} duplicates an index")

    data = np.tensordot(
        a.data,
        b.data,
        axes=([a.axis(index) for index in shared], [b.axis(index) for index in shared]),
    )
    return Tensor.from_array(result_indices, data)


def multiply(a: Tensor, b: Tensor) -> Tensor:
    """
    Elementwise product over the shared indices (which are kept), outer product over the
    rest. Attaches diagonal factors to a leg without turning it into a hyperedge.
    """
    labels: dict[Index, int] = {}
    for index in (*a.indices, *b.indices):
        labels.setdefault(index, len(labels))

    result_indices = list(labels)
    data = np.einsum(
        a.data,
        [labels[index] for index in a.indices],
        b.data,
        [labels[index] for index in b.indices],
        [labels[index] for index in result_indices],
        optimize=True,
    )
    return Tensor.from_array(result_indices, data)


def reindex(tensor: Tensor, mapping: Mapping[Index, Index]) -> Tensor:
    """Swaps indices for others of the same dimension; unmapped indices are kept"""
    new_indices = []
    for index in tensor.indices:
        replacement = mapping.get(index, index)
        if replacement.dim != index.dim:
            raise StructuralError(f"Cannot replace {index!r} by {replacement!r}")
        new_indices.append(replacement)
    return Tensor.from_array(new_indices, tensor.data)


def fuse(tensor: Tensor, group: Sequence[Index], new_index: Index) -> Tensor:
    """
    Merges ``group`` (in the given order, first index slowest) into ``new_index``, which
    is appended as the last axis.
    """
    if prod(index.dim for index in group) != new_index.dim:
        raise StructuralError(f"Cannot fuse {list(group)} into {new_index!r}")

    rest = [index for index in tensor.indices if index not in group]
    data = tensor.to_array(rest + list(group))
    data = data.reshape(tuple(index.dim for index in rest) + (new_index.dim,))
    return Tensor.from_array(rest + [new_index], data)


def sum_over(tensor: Tensor, index: Index, weights: np.ndarray | None = None) -> Tensor:
    """Contracts ``index`` against ``weights`` (all ones when omitted)"""
    if weights is None:
        weights = np.ones(index.dim)
    return contract(tensor, Tensor.from_array([index], np.asarray(weights, dtype=complex)))


def unit_index(kind: IndexKind = IndexKind.SPATIAL_BOND, tags: tuple = ()) -> Index:
    return Index(1, kind, tags)


def attach_unit_index(tensor: Tensor, index: Index) -> Tensor:
    """Adds a dimension-one leg, used to give unconnected tensors a trivial bond"""
    if index.dim != 1:
        raise StructuralError(f"{index!r} is not a unit index")
    return Tensor.from_array((*tensor.indices, index), tensor.data[..., np.newaxis])


class Factorization(NamedTuple):
    u: Tensor
    s: np.ndarray
    v: Tensor
    bond: Index
    discarded: float


def _split_matrix(tensor: Tensor, row_indices: Sequence[Index]):
    row_set = set(row_indices)
    if not row_set or not row_set < set(tensor.indices):
        raise StructuralError(
            f"Row indices {list(row_indices)} must be a nonempty proper subset of {tensor!r}"
        )
    rows = [index for index in tensor.indices if index in row_set]
    cols = [index for index in tensor.indices if index not in row_set]
    matrix = tensor.to_array(rows + cols).reshape(
        prod(index.dim for index in rows), prod(index.dim for index in cols)
    )
    return rows, cols, matrix


def _svd(matrix: np.ndarray):
    if not np.all(np.isfinite(matrix)):
        raise ParameterError("Cannot factorize a tensor holding non-finite values")
    try:
        return scipy.linalg.svd(matrix, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        logger.debug("gesdd did not converge, falling back to gesvd")
        return scipy.linalg.svd(matrix, full_matrices=False, lapack_driver="gesvd")


def retained_rank(singular_values: np.ndarray, cutoff: float, max_dim: int | None = None) -> int:
    """
    Smallest rank whose discarded squared weight, relative to the total, is below
    ``cutoff``. Values tied with the last kept one are kept too; ``max_dim`` caps the
    result. With ``cutoff == 0`` only exact zeros are dropped.
    """
    weights = np.abs(singular_values) ** 2
    total = weights.sum()
    count = len(singular_values)
    if total == 0.0:
        return 1

    if cutoff == 0.0:
        rank = max(1, int(np.count_nonzero(weights)))
    else:
        tails = np.concatenate([np.cumsum(weights[::-1])[::-1], [0.0]])
        rank = int(np.argmax(tails[1:] < cutoff * total)) + 1

    edge = singular_values[rank - 1]
    while rank < count and singular_values[rank] >= edge * (1.0 - DEGENERACY_RTOL):
        rank += 1

    if max_dim is not None:
        rank = min(rank, max_dim)
    return rank


def svd_truncate(
    tensor: Tensor,
    row_indices: Iterable[Index],
    cutoff: float,
    max_dim: int | None = None,
    absorb: str | None = None,
    bond: Index | None = None,
) -> Factorization:
    """
    Splits ``tensor`` into ``U . S . V`` across ``row_indices``.

    Singular values are dropped while their relative squared weight stays below
    ``cutoff``. ``absorb`` is one of ``None`` (U and V isometric), ``"both"`` (square
    root of S in each factor), ``"left"`` or ``"right"``. ``bond`` is a template for the
    new index; its kind and tags are copied.
    """
    if not 0.0 <= cutoff < 1.0:
        raise ParameterError(f"Truncation cutoff must lie in [0, 1), got {cutoff}")
    if max_dim is not None and max_dim < 1:
        raise ParameterError(f"max_dim must be positive, got {max_dim}")

    rows, cols, matrix = _split_matrix(tensor, list(row_indices))
    u, s, vh = _svd(matrix)

    total = float(np.sum(s**2))
    if total == 0.0:
        rank = 1
        u = np.zeros((matrix.shape[0], 1), dtype=complex)
        u[0, 0] = 1.0
        vh = np.zeros((1, matrix.shape[1]), dtype=complex)
        vh[0, 0] = 1.0
        s = np.zeros(1)
    else:
        rank = retained_rank(s, cutoff, max_dim)

    discarded = float(np.sum(s[rank:] ** 2) / total) if total > 0.0 else 0.0
    u, s, vh = u[:, :rank], s[:rank], vh[:rank, :]

    template = bond or Index(1, IndexKind.SPATIAL_BOND)
    new_bond = template.clone(dim=rank)

    if absorb == "both":
        root = np.sqrt(s)
        u = u * root[np.newaxis, :]
        vh = root[:, np.newaxis] * vh
    elif absorb == "left":
        u = u * s[np.newaxis, :]
    elif absorb == "right":
        vh = s[:, np.newaxis] * vh
    elif absorb is not None:
        raise ParameterError(f"Unknown absorb mode '{absorb}'")

    u_tensor = Tensor.from_array(
        rows + [new_bond], u.reshape(tuple(index.dim for index in rows) + (rank,))
    )
    v_tensor = Tensor.from_array(
        [new_bond] + cols, vh.reshape((rank,) + tuple(index.dim for index in cols))
    )
    return Factorization(u_tensor, s, v_tensor, new_bond, discarded)


def qr_split(tensor: Tensor, row_indices: Iterable[Index], bond: Index) -> tuple[Tensor, Tensor]:
    """Isometric Q over ``row_indices`` and the remainder R, joined by a clone of ``bond``"""
    rows, cols, matrix = _split_matrix(tensor, list(row_indices))
    q, r = scipy.linalg.qr(matrix, mode="economic")
    new_bond = bond.clone(dim=q.shape[1])
    q_tensor = Tensor.from_array(
        rows + [new_bond], q.reshape(tuple(index.dim for index in rows) + (q.shape[1],))
    )
    r_tensor = Tensor.from_array(
        [new_bond] + cols, r.reshape((q.shape[1],) + tuple(index.dim for index in cols))
    )
    return q_tensor, r_tensor


@dataclass
class TruncationRecord:
    """Retained rank and relative discarded weight of every bond touched by a sweep"""

    ranks: list[int] = field(default_factory=list)
    discarded: list[float] = field(default_factory=list)

    def add(self, factorization: Factorization) -> None:
        self.ranks.append(factorization.bond.dim)
        self.discarded.append(factorization.discarded)

    @property
    def max_discarded(self) -> float:
        return max(self.discarded, default=0.0)


def compress_chain(
    tensors: Sequence[Tensor],
    bonds: Sequence[Index],
    cutoff: float,
    max_dim: int | None = None,
) -> tuple[list[Tensor], list[Index], TruncationRecord]:
    """
    Two-sweep compression of an open chain: a QR sweep from the left puts the chain in
    left-canonical form, then a truncating SVD sweep from the right. ``bonds[j]`` must be
    shared by ``tensors[j]`` and ``tensors[j + 1]``; every other leg is left untouched.
    """
    tensors = list(tensors)
    bonds = list(bonds)
    record = TruncationRecord()

    if len(bonds) != len(tensors) - 1:
        raise StructuralError(f"{len(tensors)} tensors need {len(tensors) - 1} bonds")
    for position, bond in enumerate(bonds):
        if not (tensors[position].has(bond) and tensors[position + 1].has(bond)):
            raise StructuralError(f"{bond!r} does not join chain positions {position}")

    for position, bond in enumerate(bonds):
        rows = [index for index in tensors[position].indices if index != bond]
        q, r = qr_split(tensors[position], rows, bond)
        tensors[position] = q
        tensors[position + 1] = contract(r, tensors[position + 1])
        bonds[position] = q.indices[-1]

    for position in range(len(bonds) - 1, -1, -1):
        bond = bonds[position]
        result = svd_truncate(
            tensors[position + 1], [bond], cutoff, max_dim, absorb="left", bond=bond
        )
        record.add(result)
        tensors[position + 1] = result.v
        tensors[position] = contract(tensors[position], result.u)
        bonds[position] = result.bond

    record.ranks.reverse()
    record.discarded.reverse()
    return tensors, bonds, record
