import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from voxssc.errors import ContractViolationError
from voxssc.grid import (
    DenseVoxelTensor,
    GridShape,
    SparseVoxelTensor,
    coords_to_linear,
    densify,
    sparsify,
)


def test_grid_shape_rejects_zero_extent():
    with pytest.raises(ContractViolationError):
        GridShape(0, 4, 4, 1)


def test_sparsify_all_zero_gives_empty():
    dense = DenseVoxelTensor.zeros(GridShape(4, 4, 4, 2))
    sparse = sparsify(dense, 0.0)
    assert sparse.num_active == 0


def test_sparsify_single_voxel():
    dense = DenseVoxelTensor.zeros(GridShape(5, 5, 6, 1))
    dense.values[2, 3, 4, 0] = 1.0
    sparse = sparsify(dense, 0.0)
    assert sparse.num_active == 1
    assert tuple(sparse.active[0]) == (2, 3, 4)
    assert sparse.features[0, 0] == 1.0


def test_sparsify_matches_bruteforce_scan(rng):
    values = rng.standard_normal((8, 8, 8, 4))
    dense = DenseVoxelTensor(GridShape(8, 8, 8, 4), values)
    sparse = sparsify(dense, 0.5)
    expected = set()
    for x in range(8):
        for y in range(8):
            for z in range(8):
                if any(abs(values[x, y, z, c]) > 0.5 for c in range(4)):
                    expected.add((x, y, z))
    assert {tuple(c) for c in sparse.active} == expected
    for coord, feat in zip(sparse.active, sparse.features):
        assert np.array_equal(feat, values[tuple(coord)])


def test_densify_empty_is_zero():
    sparse = SparseVoxelTensor(GridShape(3, 3, 3, 2))
    assert not densify(sparse).values.any()


def test_densify_counts_nonzero_rows(rng):
    shape = GridShape(6, 6, 6, 3)
    coords = np.array([[0, 0, 0], [1, 2, 3], [5, 5, 5]])
    feats = rng.uniform(0.5, 1.5, (3, 3))
    dense = densify(SparseVoxelTensor(shape, coords, feats))
    nonzero_rows = np.abs(dense.values).sum(axis=-1) > 0
    assert nonzero_rows.sum() == 3


def test_roundtrip_identity(rng):
    values = rng.uniform(0.5, 2.0, (5, 4, 3, 2)) * rng.choice([-1, 1], (5, 4, 3, 2))
    dense = DenseVoxelTensor(GridShape(5, 4, 3, 2), values)
    assert np.array_equal(densify(sparsify(dense, 0.0)).values, values)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 5), st.integers(1, 5),
       st.integers(1, 5), st.integers(1, 3))
def test_roundtrip_property(seed, x, y, z, c):
    gen = np.random.default_rng(seed)
    magnitudes = gen.uniform(0.5, 2.0, (x, y, z, c))
    signs = gen.choice([-1.0, 1.0], (x, y, z, c))
    dense = DenseVoxelTensor(GridShape(x, y, z, c), magnitudes * signs)
    assert np.array_equal(densify(sparsify(dense, 0.0)).values, dense.values)


def test_active_set_is_lexicographic(rng):
    shape = GridShape(4, 4, 4, 1)
    coords = np.array([[3, 2, 1], [0, 1, 2], [2, 0, 0]])
    sparse = SparseVoxelTensor(shape, coords, rng.standard_normal((3, 1)))
    lin = coords_to_linear(sparse.active, shape.spatial)
    assert np.all(np.diff(lin) > 0)


def test_duplicate_coordinates_rejected():
    shape = GridShape(4, 4, 4, 1)
    coords = np.array([[1, 1, 1], [1, 1, 1]])
    with pytest.raises(ContractViolationError):
        SparseVoxelTensor(shape, coords, np.ones((2, 1)))


def test_out_of_bounds_rejected():
    with pytest.raises(ContractViolationError):
        SparseVoxelTensor(GridShape(2, 2, 2, 1), np.array([[2, 0, 0]]), np.ones((1, 1)))
