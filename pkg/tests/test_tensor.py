import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ms_tnpi.constants import IndexKind
from ms_tnpi.exceptions import ParameterError, StructuralError
from ms_tnpi.tensor import (
    Index,
    Tensor,
    compress_chain,
    contract,
    fuse,
    multiply,
    reindex,
    retained_rank,
    sum_over,
    svd_truncate,
)


def random_tensor(rng, indices):
    shape = tuple(index.dim for index in indices)
    return Tensor(indices, rng.normal(size=shape) + 1j * rng.normal(size=shape))


def test_index_identity():
    """
    Indices with equal dimension and tags are still different legs; clones keep the
    dimension and tags but get a new identity.
    """
    first = Index(4, IndexKind.SITE, ("i", 0))
    second = Index(4, IndexKind.SITE, ("i", 0))
    clone = first.clone()

    assert first != second
    assert first == first
    assert clone != first
    assert (clone.dim, clone.kind, clone.tags) == (first.dim, first.kind, first.tags)
    assert first.clone(dim=2).dim == 2


def test_index_dimension_must_be_positive():
    """
    Makes sure a zero-dimensional index is refused
    """
    with pytest.raises(ParameterError):
        Index(0)


def test_tensor_shape_mismatch():
    """
    Data whose size does not fit the indices is a structural error
    """
    with pytest.raises(StructuralError):
        Tensor([Index(2), Index(3)], np.zeros(5))


def test_tensor_is_immutable():
    """
    Neither the attributes nor the data of a tensor can be changed in place
    """
    tensor = Tensor([Index(2)], [1.0, 2.0])

    with pytest.raises(AttributeError):
        tensor.data = np.zeros(2)
    with pytest.raises(ValueError):
        tensor.data[0] = 3.0


def test_contract_matches_loop(rng):
    """
    Random 2x3x2 against 3x2x4 sharing two indices equals the explicit triple loop
    """
    a_, b_, c_, d_ = Index(2), Index(3), Index(2), Index(4)
    first = random_tensor(rng, [a_, b_, c_])
    second = random_tensor(rng, [b_, c_, d_])

    result = contract(first, second).to_array([a_, d_])

    expected = np.zeros((2, 4), dtype=complex)
    for a in range(2):
        for d in range(4):
            for b in range(3):
                for c in range(2):
                    expected[a, d] += first.data[a, b, c] * second.data[b, c, d]

    np.testing.assert_allclose(result, expected, rtol=1e-13, atol=0)


def test_contract_is_bilinear(rng):
    a_, b_, c_ = Index(3), Index(4), Index(2)
    first = random_tensor(rng, [a_, b_])
    second, third = random_tensor(rng, [b_, c_]), random_tensor(rng, [b_, c_])

    total = contract(first, Tensor([b_, c_], second.data + 2.5 * third.data))

    expected = contract(first, second).to_array([a_, c_]) + 2.5 * contract(
        first, third
    ).to_array([a_, c_])
    np.testing.assert_allclose(total.to_array([a_, c_]), expected, rtol=0, atol=1e-13)


def test_contract_without_shared_index_is_outer_product(rng):
    """
    Tensors without common indices contract to their outer product
    """
    a_, b_ = Index(2), Index(3)
    first, second = random_tensor(rng, [a_]), random_tensor(rng, [b_])

    result = contract(first, second)

    np.testing.assert_allclose(result.to_array([a_, b_]), np.outer(first.data, second.data))


def test_contract_scalar(rng):
    """
    Contracting over every index leaves a rank-zero tensor
    """
    a_ = Index(3)
    first, second = random_tensor(rng, [a_]), random_tensor(rng, [a_])

    result = contract(first, second)

    assert result.ndim == 0
    assert result.data[()] == pytest.approx(np.dot(first.data, second.data))


def test_multiply_keeps_shared_index(rng):
    """
    Elementwise product over the shared index, which stays open
    """
    a_, b_ = Index(4), Index(2)
    first = random_tensor(rng, [a_, b_])
    weights = random_tensor(rng, [a_])

    result = multiply(first, weights)

    assert set(result.indices) == {a_, b_}
    np.testing.assert_allclose(
        result.to_array([a_, b_]), first.data * weights.data[:, np.newaxis]
    )


def test_reindex_and_fuse(rng):
    """
    Reindexing keeps the data; fusing merges indices row-major and appends the new leg
    """
    a_, b_, c_ = Index(2), Index(3), Index(4)
    tensor = random_tensor(rng, [a_, b_, c_])

    renamed = reindex(tensor, {b_: Index(3, tags=("new",))})
    assert renamed.indices[0] == a_ and renamed.indices[2] == c_
    np.testing.assert_array_equal(renamed.data, tensor.data)

    fused_index = Index(6)
    fused = fuse(tensor, [a_, b_], fused_index)
    assert fused.indices == (c_, fused_index)
    np.testing.assert_array_equal(
        fused.to_array([fused_index, c_]), tensor.data.reshape(6, 4)
    )

    with pytest.raises(StructuralError):
        reindex(tensor, {a_: Index(5)})
    with pytest.raises(StructuralError):
        fuse(tensor, [a_, b_], Index(5))


def test_sum_over_with_weights(rng):
    """
    Contracting a leg against weights equals a dot product along that axis
    """
    a_, b_ = Index(3), Index(2)
    tensor = random_tensor(rng, [a_, b_])
    weights = np.array([1.0, 0.0, 2.0])

    result = sum_over(tensor, a_, weights)

    np.testing.assert_allclose(result.to_array([b_]), weights @ tensor.data)
    np.testing.assert_allclose(sum_over(tensor, b_).to_array([a_]), tensor.data.sum(axis=1))


def test_svd_truncate_exact_reconstruction(rng):
    """
    Without truncation the factors reproduce the tensor for every absorb mode
    """
    a_, b_, c_ = Index(2), Index(3), Index(4)
    tensor = random_tensor(rng, [a_, b_, c_])

    for absorb in ("both", "left", "right"):
        result = svd_truncate(tensor, [a_, c_], 0.0, absorb=absorb)
        rebuilt = contract(result.u, result.v)
        np.testing.assert_allclose(
            rebuilt.to_array([a_, b_, c_]), tensor.data, rtol=0, atol=1e-12
        )
        assert result.discarded == 0.0


def test_svd_truncate_isometric_factors(rng):
    """
    With nothing absorbed both factors are isometries
    """
    a_, b_ = Index(5), Index(4)
    tensor = random_tensor(rng, [a_, b_])

    result = svd_truncate(tensor, [a_], 0.0)
    u = result.u.to_array([a_, result.bond])
    v = result.v.to_array([result.bond, b_])

    np.testing.assert_allclose(u.conj().T @ u, np.eye(result.bond.dim), atol=1e-12)
    np.testing.assert_allclose(v @ v.conj().T, np.eye(result.bond.dim), atol=1e-12)


def test_svd_truncate_rank_matches_gram_eigenvalues(rng):
    """
    The retained rank is the smallest r whose discarded weight, from an independent
    eigendecomposition of t^dagger t, is below the cutoff
    """
    a_, b_ = Index(6), Index(6)
    matrix = rng.normal(size=(6, 6)) * np.array([1.0, 0.5, 0.1, 0.05, 0.01, 0.001])
    tensor = Tensor([a_, b_], matrix)
    cutoff = 1e-3

    eigenvalues = np.sort(np.linalg.eigvalsh(matrix.conj().T @ matrix))[::-1]
    total = eigenvalues.sum()
    expected = next(r for r in range(1, 7) if eigenvalues[r:].sum() / total < cutoff)

    result = svd_truncate(tensor, [a_], cutoff)

    assert result.bond.dim == expected
    assert result.discarded < cutoff


def test_svd_truncate_zero_tensor():
    """
    An all-zero tensor factorizes with a bond of dimension one
    """
    a_, b_ = Index(3), Index(2)
    result = svd_truncate(Tensor([a_, b_], np.zeros((3, 2))), [a_], 1e-8, absorb="left")

    assert result.bond.dim == 1
    np.testing.assert_array_equal(contract(result.u, result.v).to_array([a_, b_]), 0.0)


@pytest.mark.parametrize("cutoff", (-0.1, 1.0, 2.0))
def test_svd_truncate_bad_cutoff(cutoff):
    """
    Cutoffs outside of [0, 1) are refused
    """
    a_, b_ = Index(2), Index(2)
    with pytest.raises(ParameterError):
        svd_truncate(Tensor([a_, b_], np.eye(2)), [a_], cutoff)


def test_svd_truncate_rejects_non_finite():
    """
    NaN entries are reported instead of producing garbage factors
    """
    a_, b_ = Index(2), Index(2)
    with pytest.raises(ParameterError):
        svd_truncate(Tensor([a_, b_], [[np.nan, 0], [0, 1]]), [a_], 0.0)


def test_retained_rank_keeps_degenerate_values():
    """
    A cut through a degenerate pair keeps both values
    """
    values = np.array([1.0, 0.5, 0.5, 1e-4])

    assert retained_rank(values, 0.2) == 3
    assert retained_rank(values, 0.2, max_dim=2) == 2
    assert retained_rank(values, 0.0) == 4
    assert retained_rank(np.zeros(3), 0.1) == 1


def chain_of(rng, sizes, bond_dim):
    sites = [Index(size) for size in sizes]
    bonds = [Index(bond_dim, IndexKind.SPATIAL_BOND) for _ in sizes[:-1]]
    tensors = []
    for position, site in enumerate(sites):
        legs = [site]
        if position > 0:
            legs.insert(0, bonds[position - 1])
        if position < len(bonds):
            legs.append(bonds[position])
        tensors.append(random_tensor(rng, legs))
    return tensors, sites, bonds


def contract_chain(tensors, sites):
    result = tensors[0]
    for tensor in tensors[1:]:
        result = contract(result, tensor)
    return result.to_array(sites)


def test_compress_chain_is_exact_at_zero_cutoff(rng):
    """
    Lossless compression keeps the contracted chain and never exceeds the exact ranks
    """
    tensors, sites, bonds = chain_of(rng, [2, 3, 2, 2], bond_dim=5)
    before = contract_chain(tensors, sites)

    compressed, new_bonds, record = compress_chain(tensors, bonds, 0.0)

    np.testing.assert_allclose(contract_chain(compressed, sites), before, atol=1e-11)
    assert [bond.dim for bond in new_bonds] == record.ranks
    assert new_bonds[0].dim <= 2
    assert new_bonds[-1].dim <= 2


def test_compress_chain_rejects_broken_wiring(rng):
    """
    A bond that does not join its neighbours is a structural error
    """
    tensors, _, bonds = chain_of(rng, [2, 2, 2], bond_dim=2)

    with pytest.raises(StructuralError):
        compress_chain(tensors, [bonds[0], Index(2)], 0.0)


@settings(max_examples=25, deadline=None)
@given(
    sizes=st.lists(st.integers(min_value=1, max_value=3), min_size=2, max_size=4),
    bond_dim=st.integers(min_value=1, max_value=4),
    seed=st.integers(min_value=0, max_value=2**16),
)
def test_compress_chain_is_idempotent(sizes, bond_dim, seed):
    """
    A second compression at the same cutoff leaves the bond dimensions unchanged
    """
    rng = np.random.default_rng(seed)
    tensors, sites, bonds = chain_of(rng, sizes, bond_dim)

    once, once_bonds, _ = compress_chain(tensors, bonds, 1e-10)
    _, twice_bonds, _ = compress_chain(once, once_bonds, 1e-10)

    assert [bond.dim for bond in twice_bonds] == [bond.dim for bond in once_bonds]
