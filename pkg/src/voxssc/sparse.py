"""Sparse 3D convolution primitives built on kernel maps.

Both convolution flavors share the same machinery: a kernel map lists, for
every kernel offset, the (input site, output site) index pairs that touch.
Submanifold convolution keeps the output active set equal to the input
active set; the generative sparse convolution dilates it to the union of
kernel-extent neighborhoods (clipped at the grid border, zero padding
semantics).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import backend
from .errors import ContractViolationError
from .grid import GridShape, SparseVoxelTensor, coords_to_linear, linear_to_coords


@dataclass
class ConvKernel3D:
    """Centered convolution kernel with odd extents."""

    extent: tuple[int, int, int]
    in_channels: int
    out_channels: int
    weights: np.ndarray  # (kx, ky, kz, in, out)
    bias: np.ndarray  # (out,)

    def __post_init__(self):
        kx, ky, kz = self.extent
        if kx % 2 == 0 or ky % 2 == 0 or kz % 2 == 0:
            raise ContractViolationError(f"kernel extents must be odd, got {self.extent}")
        if self.weights.shape != (kx, ky, kz, self.in_channels, self.out_channels):
            raise ContractViolationError(
                f"weights shape {self.weights.shape} inconsistent with kernel spec"
            )
        if self.bias.shape != (self.out_channels,):
            raise ContractViolationError("bias shape mismatch")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.bias).all()):
            raise ContractViolationError("kernel weights must be finite")

    @classmethod
    def zeros(cls, extent, in_channels, out_channels) -> "ConvKernel3D":
        kx, ky, kz = extent
        return cls(tuple(extent), in_channels, out_channels,
                   np.zeros((kx, ky, kz, in_channels, out_channels)),
                   np.zeros(out_channels))

    def flat_weights(self) -> np.ndarray:
        """(K, in, out) view with offsets in lexicographic order."""
        return self.weights.reshape(-1, self.in_channels, self.out_channels)


def kernel_offsets(extent) -> np.ndarray:
    """All (dx, dy, dz) offsets of a centered kernel, lexicographic order."""
    kx, ky, kz = extent
    rx, ry, rz = kx // 2, ky // 2, kz // 2
    grid = np.mgrid[-rx:rx + 1, -ry:ry + 1, -rz:rz + 1]
    return grid.reshape(3, -1).T.astype(np.int64)


@dataclass
class KernelMap:
    """Per-offset (input index, output index) pairs, CSR over offsets."""

    offsets: np.ndarray  # (K, 3)
    pair_in: np.ndarray  # (P,)
    pair_out: np.ndarray  # (P,)
    counts: np.ndarray  # (K,)
    in_coords: np.ndarray  # (n_in, 3)
    out_coords: np.ndarray  # (n_out, 3)

    @property
    def num_pairs(self) -> int:
        return int(self.counts.sum())

    def slices(self):
        """Yield (offset_index, in_idx, out_idx) per non-empty offset."""
        start = 0
        for k, c in enumerate(self.counts):
            if c:
                yield k, self.pair_in[start:start + c], self.pair_out[start:start + c]
            start += c


def build_kernel_map(in_coords: np.ndarray, out_coords: np.ndarray,
                     spatial: tuple[int, int, int], extent) -> KernelMap:
    offsets = kernel_offsets(extent)
    in_lin = coords_to_linear(in_coords, spatial) if len(in_coords) else np.zeros(0, np.int64)
    pair_in, pair_out, counts = backend.kernel_pairs(in_lin, out_coords, offsets, spatial)
    return KernelMap(offsets, pair_in, pair_out, counts, in_coords, out_coords)


def dilated_active_set(in_coords: np.ndarray, spatial: tuple[int, int, int],
                       extent) -> np.ndarray:
    """Union of kernel-extent neighborhoods of the input sites, clipped."""
    if len(in_coords) == 0:
        return np.zeros((0, 3), dtype=np.int64)
    offsets = kernel_offsets(extent)
    cand = (in_coords[:, None, :] - offsets[None, :, :]).reshape(-1, 3)
    ok = np.all((cand >= 0) & (cand < np.asarray(spatial)), axis=1)
    cand = cand[ok]
    lin = np.unique(coords_to_linear(cand, spatial))
    return linear_to_coords(lin, spatial)


def _conv_forward(in_feats: np.ndarray, kmap: KernelMap, w_flat: np.ndarray,
                  bias: np.ndarray) -> np.ndarray:
    out = np.zeros((len(kmap.out_coords), w_flat.shape[2]))
    for k, pin, pout in kmap.slices():
        out[pout] += in_feats[pin] @ w_flat[k]
    out += bias
    return out


def submanifold_conv3d(x: SparseVoxelTensor, k: ConvKernel3D) -> SparseVoxelTensor:
    """Convolve over active neighbors only; output active set == input active set."""
    if k.in_channels != x.shape.channels:
        raise ContractViolationError(
            f"kernel expects {k.in_channels} channels, tensor has {x.shape.channels}"
        )
    kmap = build_kernel_map(x.active, x.active, x.shape.spatial, k.extent)
    feats = _conv_forward(x.features, kmap, k.flat_weights(), k.bias)
    out_shape = GridShape(x.shape.x, x.shape.y, x.shape.z, k.out_channels)
    return SparseVoxelTensor(out_shape, x.active.copy(), feats)


def sparse_conv3d(x: SparseVoxelTensor, k: ConvKernel3D) -> SparseVoxelTensor:
    """Generative sparse convolution; output active set is the dilated union."""
    if k.in_channels != x.shape.channels:
        raise ContractViolationError(
            f"kernel expects {k.in_channels} channels, tensor has {x.shape.channels}"
        )
    out_coords = dilated_active_set(x.active, x.shape.spatial, k.extent)
    kmap = build_kernel_map(x.active, out_coords, x.shape.spatial, k.extent)
    feats = _conv_forward(x.features, kmap, k.flat_weights(), k.bias)
    out_shape = GridShape(x.shape.x, x.shape.y, x.shape.z, k.out_channels)
    return SparseVoxelTensor(out_shape, out_coords, feats)


def sparse_conv_apply(in_feats: ad.Var, weights: ad.Var, bias: ad.Var,
                      kmap: KernelMap) -> ad.Var:
    """Tape-recorded kernel-map convolution on active-site feature rows.

    `weights` is the flat (K, in, out) view of the kernel; the output has
    one row per `kmap.out_coords` entry.
    """
    w = weights.value
    n_out = len(kmap.out_coords)
    value = np.zeros((n_out, w.shape[2]))
    for k, pin, pout in kmap.slices():
        value[pout] += in_feats.value[pin] @ w[k]
    value += bias.value

    def vjp(g):
        g_in = np.zeros_like(in_feats.value)
        g_w = np.zeros_like(w)
        for k, pin, pout in kmap.slices():
            g_in[pin] += g[pout] @ w[k].T
            g_w[k] = in_feats.value[pin].T @ g[pout]
        return g_in, g_w, g.sum(axis=0)

    return ad.Var(value, in_feats.tape, (in_feats, weights, bias), vjp)
