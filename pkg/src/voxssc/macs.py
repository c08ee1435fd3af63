"""Analytic multiply-accumulate counting for dense and sparse convolutions.

Dense convolutions are counted with the closed form X*Y*Z*kx*ky*kz*cin*cout
(padded taps included, which is what dense hardware executes).  Sparse
flavors count actual (input, output) pairs from the kernel map.  For
sparse-vs-dense comparisons at equal occupancy, `conv_macs_dense` with
``count_padding=False`` counts only in-grid taps, which is the work a
sparse engine would do on a fully active grid.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractViolationError
from .sparse import build_kernel_map, dilated_active_set, kernel_offsets


def conv_macs_dense(spatial, extent, cin: int, cout: int,
                    count_padding: bool = True) -> int:
    if count_padding:
        sites = int(np.prod(spatial))
        taps = int(np.prod(extent))
        return sites * taps * cin * cout
    total = 0
    for off in kernel_offsets(extent):
        total += int(np.prod([d - abs(int(o)) for d, o in zip(spatial, off)]))
    return total * cin * cout


def conv_macs_submanifold(active: np.ndarray, spatial, extent,
                          cin: int, cout: int) -> int:
    kmap = build_kernel_map(active, active, spatial, extent)
    return kmap.num_pairs * cin * cout


def conv_macs_sparse(active: np.ndarray, spatial, extent,
                     cin: int, cout: int) -> int:
    out_coords = dilated_active_set(active, spatial, extent)
    kmap = build_kernel_map(active, out_coords, spatial, extent)
    return kmap.num_pairs * cin * cout


def count_macs(kind: str, spatial, extent, cin: int, cout: int,
               active: np.ndarray | None = None,
               count_padding: bool = True) -> int:
    """MACs of one convolution; sparse kinds need the active coordinate set."""
    if kind == "dense":
        return conv_macs_dense(spatial, extent, cin, cout, count_padding)
    if active is None:
        raise ContractViolationError(f"{kind} convolution needs an active set")
    if kind == "submanifold":
        return conv_macs_submanifold(active, spatial, extent, cin, cout)
    if kind == "sparse":
        return conv_macs_sparse(active, spatial, extent, cin, cout)
    raise ContractViolationError(f"unknown convolution kind {kind!r}")


def expected_pair_slots(spatial, extent) -> int:
    """In-grid (site, offset) tap slots of a centered kernel."""
    return conv_macs_dense(spatial, extent, 1, 1, count_padding=False)


def msgru_step_macs(mask_coords: np.ndarray, spatial, extent,
                    hidden: int, ctx: int, candidate_conv: str = "sparse") -> dict:
    """MACs of one masked sparse GRU step, split by gate and candidate convs."""
    cin = hidden + ctx
    gate = conv_macs_submanifold(mask_coords, spatial, extent, cin, hidden)
    if candidate_conv == "sparse":
        cand = conv_macs_sparse(mask_coords, spatial, extent, cin, hidden)
    else:
        cand = conv_macs_submanifold(mask_coords, spatial, extent, cin, hidden)
    return {"gates": 2 * gate, "candidate": cand, "total": 2 * gate + cand}


def dense_gru_step_macs(spatial, extent, hidden: int, ctx: int,
                        count_padding: bool = True) -> dict:
    cin = hidden + ctx
    one = conv_macs_dense(spatial, extent, cin, hidden, count_padding)
    return {"gates": 2 * one, "candidate": one, "total": 3 * one}
