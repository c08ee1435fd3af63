"""Gated recurrent refinement cells.

The masked sparse cell gathers the previous hidden state and the context
feature on the mask's active set, runs submanifold convolutions for the
update and reset gates there, a generative sparse convolution for the
candidate state, and blends:

    z = sigmoid(SubConv([m*h, m*x], W_z))
    r = sigmoid(SubConv([m*h, m*x], W_r))
    h' = tanh(SConv([r*h, m*x], W_h))
    h  = (1 - z) * h_prev + z * h'

with z and h' zero outside their active sets, so voxels away from the
mask keep h_prev bit for bit.  The dense cell is the ordinary ConvGRU
used as the ablation baseline.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import dense_ops as dops
from .autodiff import ParameterStore, Tape, Var
from .blocks import conv_weight
from .errors import ContractViolationError
from .grid import DenseVoxelTensor, GridShape, coords_to_linear
from .masking import VoxelMask
from .sparse import build_kernel_map, dilated_active_set, sparse_conv_apply


class MSGRUParams:
    """Gate and candidate kernels over concatenated [hidden; context] channels."""

    def __init__(self, store: ParameterStore, prefix: str, hidden: int, ctx: int,
                 rng: np.random.Generator, extent: tuple[int, int, int] = (3, 3, 3),
                 gate_bias: float = -1.0):
        self.extent = extent
        self.hidden = hidden
        self.ctx = ctx
        cin = hidden + ctx
        self.w_z = store.add(f"{prefix}.w_z", conv_weight(rng, extent, cin, hidden))
        self.b_z = store.add(f"{prefix}.b_z", np.full(hidden, gate_bias))
        self.w_r = store.add(f"{prefix}.w_r", conv_weight(rng, extent, cin, hidden))
        self.b_r = store.add(f"{prefix}.b_r", np.full(hidden, gate_bias))
        self.w_h = store.add(f"{prefix}.w_h", conv_weight(rng, extent, cin, hidden))
        self.b_h = store.add(f"{prefix}.b_h", np.zeros(hidden))

    def copy_values_from(self, other: "MSGRUParams"):
        for mine, theirs in zip(self._all(), other._all()):
            mine.value[...] = theirs.value
        return self

    def _all(self):
        return (self.w_z, self.b_z, self.w_r, self.b_r, self.w_h, self.b_h)


def _flat_kernel(tape: Tape, param) -> Var:
    w = param.leaf(tape)
    kx, ky, kz, cin, cout = param.value.shape
    return ad.reshape(w, (kx * ky * kz, cin, cout))


def _check_channels(h_prev: Var, x_t: Var, params: MSGRUParams):
    ch = h_prev.value.shape[-1]
    cx = x_t.value.shape[-1]
    if ch != params.hidden or cx != params.ctx:
        raise ContractViolationError(
            f"cell expects hidden={params.hidden}, ctx={params.ctx}; "
            f"got {ch} and {cx}"
        )
    if h_prev.value.shape[:3] != x_t.value.shape[:3]:
        raise ContractViolationError("hidden state and context grids differ in shape")


def msgru_step_tape(tape: Tape, h_prev: Var, x_t: Var, mask: np.ndarray,
                    params: MSGRUParams, candidate_conv: str = "sparse") -> Var:
    """One masked sparse GRU update on the tape; mask is a (X, Y, Z) bool grid."""
    _check_channels(h_prev, x_t, params)
    if candidate_conv not in ("sparse", "submanifold"):
        raise ContractViolationError(f"unknown candidate_conv {candidate_conv!r}")
    dims = h_prev.value.shape[:3]
    hidden = params.hidden
    coords = np.argwhere(mask)
    if len(coords) == 0:
        return h_prev
    lin = coords_to_linear(coords, dims)

    n_vox = int(np.prod(dims))
    h_flat = ad.reshape(h_prev, (n_vox, hidden))
    x_flat = ad.reshape(x_t, (n_vox, params.ctx))
    mh = ad.gather_rows(h_flat, lin)
    mx = ad.gather_rows(x_flat, lin)
    gate_in = ad.concat([mh, mx], axis=1)

    kmap_m = build_kernel_map(coords, coords, dims, params.extent)
    z = ad.sigmoid(sparse_conv_apply(
        gate_in, _flat_kernel(tape, params.w_z), params.b_z.leaf(tape), kmap_m))
    r = ad.sigmoid(sparse_conv_apply(
        gate_in, _flat_kernel(tape, params.w_r), params.b_r.leaf(tape), kmap_m))

    cand_in = ad.concat([ad.mul(r, mh), mx], axis=1)
    if candidate_conv == "sparse":
        out_coords = dilated_active_set(coords, dims, params.extent)
        kmap_c = build_kernel_map(coords, out_coords, dims, params.extent)
    else:
        out_coords, kmap_c = coords, kmap_m
    h_cand = ad.tanh(sparse_conv_apply(
        cand_in, _flat_kernel(tape, params.w_h), params.b_h.leaf(tape), kmap_c))

    # rows of the mask set inside the (dilated) candidate active set
    out_lin = coords_to_linear(out_coords, dims)
    pos = np.searchsorted(out_lin, lin)
    h_cand_m = ad.gather_rows(h_cand, pos)

    blended = (1.0 - z) * mh + z * h_cand_m
    new_flat = ad.scatter_rows_set(h_flat, lin, blended)
    return ad.reshape(new_flat, h_prev.value.shape)


def dense_gru_step_tape(tape: Tape, h_prev: Var, x_t: Var,
                        params: MSGRUParams) -> Var:
    """Ordinary dense ConvGRU update over the whole grid."""
    _check_channels(h_prev, x_t, params)
    gate_in = ad.concat([h_prev, x_t], axis=-1)
    z = ad.sigmoid(dops.conv3d(gate_in, params.w_z.leaf(tape),
                               params.b_z.leaf(tape), params.extent))
    r = ad.sigmoid(dops.conv3d(gate_in, params.w_r.leaf(tape),
                               params.b_r.leaf(tape), params.extent))
    cand_in = ad.concat([ad.mul(r, h_prev), x_t], axis=-1)
    h_cand = ad.tanh(dops.conv3d(cand_in, params.w_h.leaf(tape),
                                 params.b_h.leaf(tape), params.extent))
    return (1.0 - z) * h_prev + z * h_cand


def msgru_step(h_prev: DenseVoxelTensor, x_t: DenseVoxelTensor, m_prev: VoxelMask,
               params: MSGRUParams, candidate_conv: str = "sparse") -> DenseVoxelTensor:
    """Value-level masked sparse GRU step."""
    tape = Tape()
    out = msgru_step_tape(tape, tape.const(h_prev.values), tape.const(x_t.values),
                          m_prev.values, params, candidate_conv)
    return DenseVoxelTensor(GridShape(*out.value.shape), out.value)


def dense_gru_step(h_prev: DenseVoxelTensor, x_t: DenseVoxelTensor,
                   params: MSGRUParams) -> DenseVoxelTensor:
    tape = Tape()
    out = dense_gru_step_tape(tape, tape.const(h_prev.values),
                              tape.const(x_t.values), params)
    return DenseVoxelTensor(GridShape(*out.value.shape), out.value)
