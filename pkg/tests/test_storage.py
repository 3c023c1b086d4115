import numpy as np
import pytest

from ms_tnpi.constants import SIGMA_Z
from ms_tnpi.exceptions import ConfigError, StructuralError
from ms_tnpi.mp import expectation, mps_from_dense
from ms_tnpi.storage import (
    initial_state,
    load_mps,
    named_product_state,
    pure_density_vector,
    save_mps,
)


@pytest.fixture()
def entangled_state(rng):
    vector = rng.normal(size=64) + 1j * rng.normal(size=64)
    yield mps_from_dense(vector, [4, 4, 4])


def write_archive(path, sites=(np.zeros((1, 4, 1)),), bond_dims=(), version=1, d=2):
    arrays = {f"site_{i}": data for i, data in enumerate(sites)}
    np.savez(
        path,
        format_version=np.array(version),
        P=np.array(len(sites)),
        d=np.array(d),
        bond_dims=np.array(bond_dims, dtype=int),
        **arrays,
    )
    return path


def test_save_and_load(tmp_path, entangled_state):
    """
    A stored MPS reads back with the same bonds and coefficients
    """
    path = tmp_path / "state.npz"

    save_mps(entangled_state, path)
    loaded = load_mps(path)

    assert loaded.P == 3
    assert loaded.bond_dims() == entangled_state.bond_dims()
    np.testing.assert_allclose(loaded.to_dense(), entangled_state.to_dense(), atol=1e-14)


def test_unsupported_version(tmp_path):
    path = write_archive(tmp_path / "state.npz", version=2)

    with pytest.raises(StructuralError, match="version 2"):
        load_mps(path)


def test_wrong_bond_count(tmp_path):
    path = write_archive(tmp_path / "state.npz", bond_dims=(2,))

    with pytest.raises(StructuralError, match="bond dimensions"):
        load_mps(path)


def test_wrong_site_shape(tmp_path):
    """
    Site arrays must agree with the stored bond dimensions
    """
    sites = (np.zeros((1, 4, 2)), np.zeros((3, 4, 1)))
    path = write_archive(tmp_path / "state.npz", sites=sites, bond_dims=(2,))

    with pytest.raises(StructuralError, match="site 1"):
        load_mps(path)


@pytest.mark.parametrize(
    "name,expected",
    (
        ("all_up", [1.0, 1.0, 1.0]),
        ("all_down", [-1.0, -1.0, -1.0]),
        ("neel", [1.0, -1.0, 1.0]),
        ("x_plus", [0.0, 0.0, 0.0]),
    ),
)
def test_named_product_states(name, expected):
    """
    Product states repeat their per-site pattern along the chain
    """
    state = named_product_state(name, 3)

    values = [expectation(state, site, SIGMA_Z) for site in (1, 2, 3)]

    np.testing.assert_allclose(values, expected, atol=1e-14)
    assert state.bond_dims() == [1, 1]


def test_pure_density_vector_is_normalised():
    vector = pure_density_vector(np.array([3.0, 4.0]))

    np.testing.assert_allclose(vector, np.array([9.0, 12.0, 12.0, 16.0]) / 25.0)


def test_initial_state_from_file(tmp_path, entangled_state):
    path = tmp_path / "state.npz"
    save_mps(entangled_state, path)

    state = initial_state(str(path), 3)

    np.testing.assert_allclose(state.to_dense(), entangled_state.to_dense(), atol=1e-14)


def test_initial_state_errors(tmp_path, entangled_state):
    """
    Unknown names, files for another chain length and non-spin sites are configuration
    errors
    """
    path = tmp_path / "state.npz"
    save_mps(entangled_state, path)
    qutrits = write_archive(tmp_path / "qutrit.npz", sites=(np.zeros((1, 9, 1)),), d=3)

    with pytest.raises(ConfigError, match="neither"):
        initial_state("all_sideways", 3)
    with pytest.raises(ConfigError, match="holds 3 sites"):
        initial_state(str(path), 4)
    with pytest.raises(ConfigError, match="spin-1/2"):
        initial_state(str(qutrits), 1)
    with pytest.raises(ConfigError, match="Unknown initial state"):
        named_product_state("all_sideways", 2)
