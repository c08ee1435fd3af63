"""Numba-jitted twins of the numpy kernels in `_kernels_numpy`.

Algorithms and output ordering match the numpy versions element for
element; keep the two files in sync when changing either.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_BIG = 1e30


@njit(cache=True)
def _bisect(arr, code):
    lo, hi = 0, arr.shape[0]
    while lo < hi:
        mid = (lo + hi) // 2
        if arr[mid] < code:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True)
def kernel_pairs(in_linear, out_coords, offsets, dims):
    n_off = offsets.shape[0]
    m = out_coords.shape[0]
    ny, nz = dims[1], dims[2]
    cap = n_off * m
    pair_in = np.empty(cap, dtype=np.int64)
    pair_out = np.empty(cap, dtype=np.int64)
    counts = np.zeros(n_off, dtype=np.int64)
    w = 0
    for k in range(n_off):
        dx, dy, dz = offsets[k, 0], offsets[k, 1], offsets[k, 2]
        c = 0
        for i in range(m):
            x = out_coords[i, 0] + dx
            y = out_coords[i, 1] + dy
            z = out_coords[i, 2] + dz
            if x < 0 or y < 0 or z < 0 or x >= dims[0] or y >= dims[1] or z >= dims[2]:
                continue
            code = (x * ny + y) * nz + z
            pos = _bisect(in_linear, code)
            if pos < in_linear.shape[0] and in_linear[pos] == code:
                pair_in[w] = pos
                pair_out[w] = i
                w += 1
                c += 1
        counts[k] = c
    return pair_in[:w].copy(), pair_out[:w].copy(), counts


@njit(cache=True)
def _ray_setup(origin, d, grid_origin, voxel_size, dims, ix, step, tmax, tdelta):
    t0, t1 = 0.0, _BIG
    for a in range(3):
        lo = grid_origin[a]
        hi = grid_origin[a] + dims[a] * voxel_size
        if d[a] == 0.0:
            if origin[a] < lo or origin[a] >= hi:
                return -1.0, -1.0
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
        return -1.0, -1.0
    eps = 1e-9 * voxel_size
    for a in range(3):
        p = origin[a] + d[a] * (t0 + eps)
        v = int(np.floor((p - grid_origin[a]) / voxel_size))
        if v < 0:
            v = 0
        if v > dims[a] - 1:
            v = dims[a] - 1
        ix[a] = v
        if d[a] > 0:
            step[a] = 1
        elif d[a] < 0:
            step[a] = -1
        else:
            step[a] = 0
        if d[a] != 0.0:
            off = 1 if d[a] > 0 else 0
            nxt = grid_origin[a] + (ix[a] + off) * voxel_size
            tmax[a] = (nxt - origin[a]) / d[a]
            tdelta[a] = voxel_size / abs(d[a])
        else:
            tmax[a] = _BIG
            tdelta[a] = _BIG
    return t0, t1


@njit(cache=True)
def traverse_rays(origin, dirs, grid_origin, voxel_size, dims):
    n_rays = dirs.shape[0]
    ny, nz = dims[1], dims[2]
    cap = n_rays * (dims[0] + dims[1] + dims[2] + 3)
    ray_idx = np.empty(cap, dtype=np.int64)
    lin_idx = np.empty(cap, dtype=np.int64)
    t_ins = np.empty(cap, dtype=np.float64)
    t_outs = np.empty(cap, dtype=np.float64)
    ix = np.zeros(3, dtype=np.int64)
    step = np.zeros(3, dtype=np.int64)
    tmax = np.zeros(3, dtype=np.float64)
    tdelta = np.zeros(3, dtype=np.float64)
    w = 0
    for r in range(n_rays):
        t0, t1 = _ray_setup(origin, dirs[r], grid_origin, voxel_size, dims,
                            ix, step, tmax, tdelta)
        if t1 < 0.0:
            continue
        t = t0
        while True:
            axis = 0
            if tmax[1] < tmax[axis]:
                axis = 1
            if tmax[2] < tmax[axis]:
                axis = 2
            t_next = tmax[axis] if tmax[axis] < t1 else t1
            ray_idx[w] = r
            lin_idx[w] = (ix[0] * ny + ix[1]) * nz + ix[2]
            t_ins[w] = t
            t_outs[w] = t_next
            w += 1
            if tmax[axis] >= t1:
                break
            t = tmax[axis]
            ix[axis] += step[axis]
            if ix[axis] < 0 or ix[axis] >= dims[axis]:
                break
            tmax[axis] += tdelta[axis]
    return ray_idx[:w].copy(), lin_idx[:w].copy(), t_ins[:w].copy(), t_outs[:w].copy()


@njit(cache=True)
def first_hits(origin, dirs, grid_origin, voxel_size, dims, occupied):
    n_rays = dirs.shape[0]
    ny, nz = dims[1], dims[2]
    t_hit = np.full(n_rays, -1.0)
    hit_lin = np.full(n_rays, -1, dtype=np.int64)
    ix = np.zeros(3, dtype=np.int64)
    step = np.zeros(3, dtype=np.int64)
    tmax = np.zeros(3, dtype=np.float64)
    tdelta = np.zeros(3, dtype=np.float64)
    for r in range(n_rays):
        t0, t1 = _ray_setup(origin, dirs[r], grid_origin, voxel_size, dims,
                            ix, step, tmax, tdelta)
        if t1 < 0.0:
            continue
        t = t0
        while True:
            lin = (ix[0] * ny + ix[1]) * nz + ix[2]
            if occupied[lin]:
                t_hit[r] = t
                hit_lin[r] = lin
                break
            axis = 0
            if tmax[1] < tmax[axis]:
                axis = 1
            if tmax[2] < tmax[axis]:
                axis = 2
            if tmax[axis] >= t1:
                break
            t = tmax[axis]
            ix[axis] += step[axis]
            if ix[axis] < 0 or ix[axis] >= dims[axis]:
                break
            tmax[axis] += tdelta[axis]
    return t_hit, hit_lin
