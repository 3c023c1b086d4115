import numpy as np
import pytest
import scipy.linalg

from ms_tnpi.constants import SIGMA_X, SIGMA_Z
from ms_tnpi.exceptions import ParameterError
from ms_tnpi.model import SpinChainModel, chain_hamiltonian, one_body_term
from ms_tnpi.oracles import fb_superoperator, trotter_error, trotter_unitary
from ms_tnpi.propagator import (
    build_fb_mpo,
    pair_hamiltonian,
    single_site_fb_propagator,
    split_fb_mpo,
    two_body_fb_propagator,
    unitary,
)


def test_unitary_matches_matrix_exponential():
    """
    The eigendecomposition route gives expm(-i H dt)
    """
    hamiltonian = 0.3 * SIGMA_Z - SIGMA_X

    np.testing.assert_allclose(
        unitary(hamiltonian, 0.7), scipy.linalg.expm(-0.7j * hamiltonian), atol=1e-13
    )


def test_unitary_rejects_non_hermitian():
    """
    Only Hermitian generators are accepted
    """
    with pytest.raises(ParameterError):
        unitary(np.array([[0.0, 1.0], [0.0, 0.0]]), 0.1)


def test_single_site_propagator_layout():
    """
    Laid out [in, out], the transpose of U (x) conj(U)
    """
    hamiltonian = -SIGMA_X
    u = scipy.linalg.expm(-0.25j * hamiltonian)

    propagator = single_site_fb_propagator(hamiltonian, 0.25)

    np.testing.assert_allclose(propagator.T, np.kron(u, u.conj()), atol=1e-13)


def test_pair_hamiltonians_add_up_to_chain():
    """
    Splitting the one-body terms between the bonds reproduces the full Hamiltonian
    """
    model = SpinChainModel(sites=4, epsilon=0.2, omega=1.0, jx=0.1, jy=0.1, jz=0.5)
    total = np.zeros((16, 16), dtype=complex)
    for bond in range(3):
        left = np.eye(2**bond)
        right = np.eye(2 ** (2 - bond))
        total += np.kron(np.kron(left, pair_hamiltonian(model, bond)), right)

    np.testing.assert_allclose(total, chain_hamiltonian(model), atol=1e-14)


def test_single_site_mpo_is_exact():
    """
    One site needs no splitting: the MPO is exp(-i h dt) on both branches
    """
    model = SpinChainModel(sites=1, epsilon=0.5)
    u = scipy.linalg.expm(-0.25j * one_body_term(model, 1))

    propagator = build_fb_mpo(model, 0.25, 0.0)

    np.testing.assert_allclose(propagator.to_dense(), np.kron(u, u.conj()), atol=1e-13)
    assert propagator.bond_dims() == []


def test_two_site_mpo_is_exact():
    """
    A single bond has no even layer, so both half steps combine to the exact unitary
    """
    model = SpinChainModel(sites=2, omega=1.0, jz=0.4)
    u = scipy.linalg.expm(-0.25j * chain_hamiltonian(model))

    propagator = build_fb_mpo(model, 0.25, 0.0)

    np.testing.assert_allclose(propagator.to_dense(), fb_superoperator(u, 2), atol=1e-12)


@pytest.mark.parametrize("sites", (3, 4))
def test_mpo_matches_dense_splitting(sites):
    """
    The MPO equals the dense odd/even/odd product built from the same bond terms
    """
    model = SpinChainModel(sites=sites, epsilon=0.1, omega=1.0, jx=0.3, jy=0.2, jz=0.8)

    propagator = build_fb_mpo(model, 0.2, 0.0)

    expected = fb_superoperator(trotter_unitary(model, 0.2), sites)
    np.testing.assert_allclose(propagator.to_dense(), expected, atol=1e-12)


def test_split_factors_reproduce_mpo():
    """
    Contracting every U with its R gives back the propagator
    """
    model = SpinChainModel(sites=3, omega=1.0, jz=0.8)
    propagator = build_fb_mpo(model, 0.25, 0.0)

    factors = split_fb_mpo(propagator, 0.0)

    assert factors.P == 3
    assert all(1 <= dim <= 16 for dim in factors.temporal_dims())
    np.testing.assert_allclose(factors.to_mpo().to_dense(), propagator.to_dense(), atol=1e-12)


def test_trotter_error_is_second_order():
    """
    Halving dt at a fixed horizon cuts the splitting error by about four
    """
    model = SpinChainModel(sites=5, omega=1.0, jz=0.8)
    steps = (0.4, 0.2, 0.1, 0.05)

    errors = [trotter_error(model, dt, 2.0) for dt in steps]
    slope, _ = np.polyfit(np.log(steps), np.log(errors), 1)

    assert slope == pytest.approx(2.0, abs=0.2)


def test_trotter_error_vanishes_without_coupling():
    """
    Uncoupled sites commute, so the splitting is exact
    """
    model = SpinChainModel(sites=3, epsilon=0.3, omega=1.0)

    assert trotter_error(model, 0.25, 1.0) < 1e-12


def taylor_unitary(hamiltonian, dt, terms=40):
    term = np.eye(hamiltonian.shape[0], dtype=complex)
    total = term.copy()
    for k in range(1, terms):
        term = term @ (-1j * dt * hamiltonian) / k
        total += term
    return total


def test_two_body_propagator_matches_series(rng):
    """
    Laid out [in_left, in_right, out_left, out_right]; as a matrix it is the transpose of
    the two-site superoperator of exp(-i H dt)
    """
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    hamiltonian = 0.5 * (a + a.conj().T)

    propagator = two_body_fb_propagator(hamiltonian, 0.3)

    expected = fb_superoperator(taylor_unitary(hamiltonian, 0.3), 2)
    assert propagator.shape == (4, 4, 4, 4)
    np.testing.assert_allclose(propagator.reshape(16, 16).T, expected, atol=1e-12)


def test_two_body_propagator_limits():
    """
    No time step gives the identity; a diagonal Hamiltonian only adds phases
    """
    coupling = 0.7 * np.kron(SIGMA_Z, SIGMA_Z)

    np.testing.assert_allclose(
        two_body_fb_propagator(coupling, 0.0).reshape(16, 16), np.eye(16), atol=1e-15
    )
    diagonal = two_body_fb_propagator(coupling, 0.4).reshape(16, 16)
    np.testing.assert_allclose(diagonal, np.diag(np.diag(diagonal)), atol=1e-15)
    np.testing.assert_allclose(np.abs(np.diag(diagonal)), 1.0, atol=1e-14)
    with pytest.raises(ParameterError):
        two_body_fb_propagator(np.triu(np.ones((4, 4))), 0.1)


def test_single_step_error_is_third_order():
    """
    Halving dt cuts the one-step splitting error of the MPO by about eight
    """
    model = SpinChainModel(sites=3, omega=1.0, jz=0.2)

    def step_error(dt):
        exact = fb_superoperator(scipy.linalg.expm(-1j * dt * chain_hamiltonian(model)), 3)
        return np.linalg.norm(build_fb_mpo(model, dt, 0.0).to_dense() - exact)

    assert step_error(0.05) / step_error(0.025) == pytest.approx(8.0, rel=0.1)


def test_uncoupled_sites_give_unit_bonds():
    model = SpinChainModel(sites=3, epsilon=0.2, omega=1.0)

    propagator = build_fb_mpo(model, 0.25, 1e-11)

    assert propagator.bond_dims() == [1, 1]


def test_pure_dephasing_ranks():
    """
    Without transverse field the propagator is diagonal; the spatial bond is the rank across
    the cut and every site keeps all four forward-backward states in its temporal bond
    """
    model = SpinChainModel(sites=2, epsilon=0.2, omega=0.0, jz=0.5)
    propagator = build_fb_mpo(model, 0.3, 1e-11)
    dense = propagator.to_dense()

    np.testing.assert_allclose(dense, np.diag(np.diag(dense)), atol=1e-13)
    across_cut = dense.reshape(4, 4, 4, 4).transpose(0, 2, 1, 3).reshape(16, 16)
    singular_values = np.linalg.svd(across_cut, compute_uv=False)
    rank = int(np.sum(singular_values > 1e-6 * singular_values[0]))
    assert propagator.bond_dims() == [rank]
    assert split_fb_mpo(propagator, 1e-11).temporal_dims() == [4, 4]
