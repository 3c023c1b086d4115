"""
Initial states and the ``.npz`` container for matrix product states.

Container layout (format version 1): ``format_version``, ``P``, ``d``, ``bond_dims``
(length P - 1) and one array ``site_<i>`` per site (0-based) of shape
``(left_dim, d**2, right_dim)`` in (left, site, right) order; the site axis is the
row-major (s+, s-) pair. Chain ends have a left or right dimension of 1.
"""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .constants import MPS_FILE_FORMAT_VERSION, PRODUCT_STATES, SPIN_DIM, IndexKind
from .exceptions import ConfigError, StructuralError
from .mp import MatrixProductState, local_dim, product_mps
from .tensor import Index, Tensor

logger = logging.getLogger(__name__)


def pure_density_vector(state: np.ndarray) -> np.ndarray:
    """Row-major vectorisation of |psi><psi|"""
    state = np.asarray(state, dtype=complex)
    state = state / np.linalg.norm(state)
    return np.outer(state, state.conj()).reshape(-1)


def named_product_state(name: str, sites: int) -> MatrixProductState:
    """
    Product state from a name in ``PRODUCT_STATES``; the per-site pattern repeats along
    the chain (``neel`` alternates up and down).
    """
    try:
        pattern = PRODUCT_STATES[name]
    except KeyError:
        raise ConfigError(
            f"Unknown initial state '{name}'; use one of {sorted(PRODUCT_STATES)} or an MPS file"
        )
    return product_mps([pure_density_vector(pattern[i % len(pattern)]) for i in range(sites)])


def save_mps(state: MatrixProductState, path: Path) -> None:
    arrays = {}
    for position, (tensor, site) in enumerate(zip(state.tensors, state.site_indices)):
        left = [state.bonds[position - 1]] if position > 0 else []
        right = [state.bonds[position]] if position < len(state.bonds) else []
        data = tensor.to_array(left + [site] + right)
        left_dim = left[0].dim if left else 1
        right_dim = right[0].dim if right else 1
        arrays[f"site_{position}"] = data.reshape(left_dim, site.dim, right_dim)

    np.savez(
        Path(path),
        format_version=np.array(MPS_FILE_FORMAT_VERSION),
        P=np.array(state.P),
        d=np.array(local_dim(state.site_indices[0])),
        bond_dims=np.array(state.bond_dims(), dtype=int),
        **arrays,
    )
    logger.info(f"Wrote MPS with bonds {state.bond_dims()} to {path}")


def load_mps(path: Path) -> MatrixProductState:
    """
    Reads a container written by :func:`save_mps`.

    :raises StructuralError: when the version, the site count or the bond wiring is wrong
    """
    with np.load(Path(path)) as archive:
        version = int(archive["format_version"])
        if version != MPS_FILE_FORMAT_VERSION:
            raise StructuralError(f"{path}: unsupported MPS format version {version}")
        sites = int(archive["P"])
        d = int(archive["d"])
        bond_dims = [int(dim) for dim in archive["bond_dims"]]
        arrays = [np.array(archive[f"site_{i}"]) for i in range(sites)]

    if len(bond_dims) != sites - 1:
        raise StructuralError(f"{path}: {sites} sites need {sites - 1} bond dimensions")

    site_indices = [Index(d * d, IndexKind.SITE, ("i", i)) for i in range(sites)]
    bonds = [Index(dim, IndexKind.SPATIAL_BOND, ("i", i)) for i, dim in enumerate(bond_dims)]
    tensors = []
    for position, data in enumerate(arrays):
        left_dim = bond_dims[position - 1] if position > 0 else 1
        right_dim = bond_dims[position] if position < len(bonds) else 1
        if data.shape != (left_dim, d * d, right_dim):
            raise StructuralError(
                f"{path}: site {position} has shape {data.shape}, "
                f"expected {(left_dim, d * d, right_dim)}"
            )
        legs = [site_indices[position]]
        if position > 0:
            legs.insert(0, bonds[position - 1])
        if position < len(bonds):
            legs.append(bonds[position])
        tensors.append(Tensor(legs, data))

    return MatrixProductState(tensors, site_indices, bonds)


def initial_state(spec: str, sites: int, d: int = SPIN_DIM) -> MatrixProductState:
    """The configured initial reduced density: a named product state or an MPS file"""
    if spec in PRODUCT_STATES:
        return named_product_state(spec, sites)

    path = Path(spec)
    if not path.is_file():
        raise ConfigError(
            f"initial_state '{spec}' is neither one of {sorted(PRODUCT_STATES)} nor a file"
        )

    state = load_mps(path)
    if state.P != sites:
        raise ConfigError(f"{path} holds {state.P} sites, the chain has {sites}")
    if any(local_dim(site) != d for site in state.site_indices):
        raise ConfigError(f"{path} does not hold spin-1/2 sites")
    return state
