"""Dense and sparse voxel tensors.

A sparse tensor stores only its active coordinates and their feature rows;
every other voxel is implicitly zero.  Active coordinates are kept in
lexicographic (x, y, z) order so iteration order, and therefore floating
point summation order, is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError


@dataclass(frozen=True)
class GridShape:
    """Spatial extents plus the per-voxel channel count."""

    x: int
    y: int
    z: int
    channels: int

    def __post_init__(self):
        if min(self.x, self.y, self.z, self.channels) < 1:
            raise ContractViolationError(f"all extents must be >= 1, got {self}")

    @property
    def spatial(self) -> tuple[int, int, int]:
        return (self.x, self.y, self.z)

    @property
    def num_voxels(self) -> int:
        return self.x * self.y * self.z


def coords_to_linear(coords: np.ndarray, spatial: tuple[int, int, int]) -> np.ndarray:
    """Row-major linear index of (n, 3) integer coordinates."""
    _, ny, nz = spatial
    return (coords[:, 0] * ny + coords[:, 1]) * nz + coords[:, 2]


def linear_to_coords(linear: np.ndarray, spatial: tuple[int, int, int]) -> np.ndarray:
    _, ny, nz = spatial
    x, rem = np.divmod(linear, ny * nz)
    y, z = np.divmod(rem, nz)
    return np.stack([x, y, z], axis=1)


def lex_sort_coords(coords: np.ndarray, spatial: tuple[int, int, int]) -> np.ndarray:
    """Return the permutation sorting coordinates lexicographically by (x, y, z)."""
    return np.argsort(coords_to_linear(coords, spatial), kind="stable")


@dataclass
class DenseVoxelTensor:
    shape: GridShape
    values: np.ndarray  # (x, y, z, channels) float64

    def __post_init__(self):
        expect = (self.shape.x, self.shape.y, self.shape.z, self.shape.channels)
        if self.values.shape != expect:
            raise ContractViolationError(
                f"dense values shape {self.values.shape} != grid shape {expect}"
            )

    @classmethod
    def zeros(cls, shape: GridShape) -> "DenseVoxelTensor":
        return cls(shape, np.zeros((shape.x, shape.y, shape.z, shape.channels)))


@dataclass
class SparseVoxelTensor:
    """Active coordinates with one feature row per coordinate.

    Coordinates absent from `active` are semantically zero.
    """

    shape: GridShape
    active: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64))
    features: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        self.active = np.asarray(self.active, dtype=np.int64).reshape(-1, 3)
        n = self.active.shape[0]
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.size == 0:
            self.features = np.zeros((n, self.shape.channels))
        else:
            self.features = self.features.reshape(n, -1)
        if self.features.shape != (n, self.shape.channels):
            raise ContractViolationError(
                f"features shape {self.features.shape} != ({n}, {self.shape.channels})"
            )
        if n:
            if self.active.min() < 0 or np.any(self.active >= np.array(self.shape.spatial)):
                raise ContractViolationError("active coordinates out of grid bounds")
            lin = coords_to_linear(self.active, self.shape.spatial)
            if np.unique(lin).size != n:
                raise ContractViolationError("active coordinates are not unique")
            order = np.argsort(lin, kind="stable")
            self.active = self.active[order]
            self.features = self.features[order]

    @property
    def num_active(self) -> int:
        return self.active.shape[0]

    def linear_active(self) -> np.ndarray:
        return coords_to_linear(self.active, self.shape.spatial)


def sparsify(dense: DenseVoxelTensor, epsilon: float = 0.0) -> SparseVoxelTensor:
    """Keep every voxel where any channel exceeds epsilon in magnitude."""
    if epsilon < 0:
        raise ContractViolationError("epsilon must be >= 0")
    keep = np.any(np.abs(dense.values) > epsilon, axis=-1)
    coords = np.argwhere(keep)
    feats = dense.values[keep]
    return SparseVoxelTensor(dense.shape, coords, feats)


def densify(sparse: SparseVoxelTensor) -> DenseVoxelTensor:
    """Expand to a dense grid; inactive voxels are exactly zero."""
    out = np.zeros((sparse.shape.x, sparse.shape.y, sparse.shape.z, sparse.shape.channels))
    if sparse.num_active:
        out[sparse.active[:, 0], sparse.active[:, 1], sparse.active[:, 2]] = sparse.features
    return DenseVoxelTensor(sparse.shape, out)
