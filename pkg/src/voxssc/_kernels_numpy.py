"""Pure-numpy reference implementations of the hot kernels.

Kept in exact output lockstep with `_kernels_numba`; the backend module
picks one of the two at import time.
"""

from __future__ import annotations

import numpy as np

_BIG = 1e30


def kernel_pairs(in_linear, out_coords, offsets, dims):
    ny, nz = dims[1], dims[2]
    n_off = offsets.shape[0]
    counts = np.zeros(n_off, dtype=np.int64)
    ins, outs = [], []
    out_idx_all = np.arange(out_coords.shape[0], dtype=np.int64)
    for k in range(n_off):
        nb = out_coords + offsets[k]
        ok = np.all((nb >= 0) & (nb < dims), axis=1)
        codes = (nb[ok, 0] * ny + nb[ok, 1]) * nz + nb[ok, 2]
        pos = np.searchsorted(in_linear, codes)
        pos_ok = pos < in_linear.shape[0]
        hit = np.zeros(codes.shape[0], dtype=bool)
        hit[pos_ok] = in_linear[pos[pos_ok]] == codes[pos_ok]
        ins.append(pos[hit].astype(np.int64))
        outs.append(out_idx_all[ok][hit])
        counts[k] = hit.sum()
    pair_in = np.concatenate(ins) if ins else np.zeros(0, dtype=np.int64)
    pair_out = np.concatenate(outs) if outs else np.zeros(0, dtype=np.int64)
    return pair_in, pair_out, counts


def _ray_setup(origin, d, grid_origin, voxel_size, dims):
    """Slab-test entry/exit and DDA state; returns None when the ray misses."""
    t0, t1 = 0.0, _BIG
    for a in range(3):
        lo = grid_origin[a]
        hi = grid_origin[a] + dims[a] * voxel_size
        if d[a] == 0.0:
            if origin[a] < lo or origin[a] >= hi:
                return None
        else:
            ta = (lo - origin[a]) / d[a]
            tb = (hi - origin[a]) / d[a]
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
    if t0 >= t1:
        return None
    eps = 1e-9 * voxel_size
    p = origin + d * (t0 + eps)
    ix = np.floor((p - grid_origin) / voxel_size).astype(np.int64)
    ix = np.clip(ix, 0, dims - 1)
    step = np.where(d > 0, 1, np.where(d < 0, -1, 0)).astype(np.int64)
    tmax = np.full(3, _BIG)
    tdelta = np.full(3, _BIG)
    for a in range(3):
        if d[a] != 0.0:
            nxt = grid_origin[a] + (ix[a] + (1 if d[a] > 0 else 0)) * voxel_size
            tmax[a] = (nxt - origin[a]) / d[a]
            tdelta[a] = voxel_size / abs(d[a])
    return t0, t1, ix, step, tmax, tdelta


def traverse_rays(origin, dirs, grid_origin, voxel_size, dims):
    n_rays = dirs.shape[0]
    ny, nz = dims[1], dims[2]
    ray_idx, lin_idx, t_ins, t_outs = [], [], [], []
    for r in range(n_rays):
        state = _ray_setup(origin, dirs[r], grid_origin, voxel_size, dims)
        if state is None:
            continue
        t, t1, ix, step, tmax, tdelta = state
        while True:
            axis = int(np.argmin(tmax))
            t_next = min(tmax[axis], t1)
            ray_idx.append(r)
            lin_idx.append((ix[0] * ny + ix[1]) * nz + ix[2])
            t_ins.append(t)
            t_outs.append(t_next)
            if tmax[axis] >= t1:
                break
            t = tmax[axis]
            ix[axis] += step[axis]
            if ix[axis] < 0 or ix[axis] >= dims[axis]:
                break
            tmax[axis] += tdelta[axis]
    return (
        np.asarray(ray_idx, dtype=np.int64),
        np.asarray(lin_idx, dtype=np.int64),
        np.asarray(t_ins, dtype=np.float64),
        np.asarray(t_outs, dtype=np.float64),
    )


def first_hits(origin, dirs, grid_origin, voxel_size, dims, occupied):
    n_rays = dirs.shape[0]
    ny, nz = dims[1], dims[2]
    t_hit = np.full(n_rays, -1.0)
    hit_lin = np.full(n_rays, -1, dtype=np.int64)
    for r in range(n_rays):
        state = _ray_setup(origin, dirs[r], grid_origin, voxel_size, dims)
        if state is None:
            continue
        t, t1, ix, step, tmax, tdelta = state
        while True:
            lin = (ix[0] * ny + ix[1]) * nz + ix[2]
            if occupied[lin]:
                t_hit[r] = t
                hit_lin[r] = lin
                break
            axis = int(np.argmin(tmax))
            if tmax[axis] >= t1:
                break
            t = tmax[axis]
            ix[axis] += step[axis]
            if ix[axis] < 0 or ix[axis] >= dims[axis]:
                break
            tmax[axis] += tdelta[axis]
    return t_hit, hit_lin
