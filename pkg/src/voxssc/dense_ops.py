"""Tape-recorded operations on dense (x, y, z, c) voxel grids."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .sparse import kernel_offsets


def _conv_slices(dim: int, off: int):
    lo = max(0, -off)
    hi = dim - max(0, off)
    return slice(lo, hi), slice(lo + off, hi + off)


def conv3d(x: ad.Var, weights: ad.Var, bias: ad.Var, extent) -> ad.Var:
    """Dense 3D convolution, zero padding, stride 1.

    x: (X, Y, Z, Cin); weights: (kx, ky, kz, Cin, Cout); bias: (Cout,).
    """
    offsets = kernel_offsets(extent)
    xv, wv = x.value, weights.value
    dims = xv.shape[:3]
    w_flat = wv.reshape(len(offsets), wv.shape[3], wv.shape[4])
    out = np.zeros(dims + (wv.shape[4],))
    slabs = []
    for k, (dx, dy, dz) in enumerate(offsets):
        ox, ix = _conv_slices(dims[0], dx)
        oy, iy = _conv_slices(dims[1], dy)
        oz, iz = _conv_slices(dims[2], dz)
        slabs.append((k, (ox, oy, oz), (ix, iy, iz)))
        out[ox, oy, oz] += xv[ix, iy, iz] @ w_flat[k]
    out += bias.value

    def vjp(g):
        g_x = np.zeros_like(xv)
        g_w = np.zeros_like(w_flat)
        for k, (ox, oy, oz), (ix, iy, iz) in slabs:
            go = g[ox, oy, oz]
            g_x[ix, iy, iz] += go @ w_flat[k].T
            cin, cout = w_flat.shape[1], w_flat.shape[2]
            g_w[k] = xv[ix, iy, iz].reshape(-1, cin).T @ go.reshape(-1, cout)
        return g_x, g_w.reshape(wv.shape), g.sum(axis=(0, 1, 2))

    return ad.Var(out, x.tape, (x, weights, bias), vjp)


def _deconv_axis_slices(dim: int, tap: int):
    # output o = 2*i + tap - 1 for a 3-tap, stride-2, pad-1, output-pad-1 kernel
    if tap == 0:
        return slice(1, 2 * dim - 2, 2), slice(1, dim)
    if tap == 1:
        return slice(0, 2 * dim - 1, 2), slice(0, dim)
    return slice(1, 2 * dim, 2), slice(0, dim)


def deconv3d_up2(x: ad.Var, weights: ad.Var, bias: ad.Var) -> ad.Var:
    """Transposed 3D convolution with 3-tap kernel and stride 2.

    Doubles every spatial extent: (X, Y, Z, Cin) -> (2X, 2Y, 2Z, Cout).
    """
    xv, wv = x.value, weights.value
    dims = xv.shape[:3]
    w_flat = wv.reshape(27, wv.shape[3], wv.shape[4])
    out = np.zeros((2 * dims[0], 2 * dims[1], 2 * dims[2], wv.shape[4]))
    slabs = []
    for k, (a, b, c) in enumerate(np.mgrid[0:3, 0:3, 0:3].reshape(3, -1).T):
        ox, ix = _deconv_axis_slices(dims[0], a)
        oy, iy = _deconv_axis_slices(dims[1], b)
        oz, iz = _deconv_axis_slices(dims[2], c)
        slabs.append((k, (ox, oy, oz), (ix, iy, iz)))
        out[ox, oy, oz] += xv[ix, iy, iz] @ w_flat[k]
    out += bias.value

    def vjp(g):
        g_x = np.zeros_like(xv)
        g_w = np.zeros_like(w_flat)
        for k, (ox, oy, oz), (ix, iy, iz) in slabs:
            go = g[ox, oy, oz]
            g_x[ix, iy, iz] += go @ w_flat[k].T
            cin, cout = w_flat.shape[1], w_flat.shape[2]
            g_w[k] = xv[ix, iy, iz].reshape(-1, cin).T @ go.reshape(-1, cout)
        return g_x, g_w.reshape(wv.shape), g.sum(axis=(0, 1, 2))

    return ad.Var(out, x.tape, (x, weights, bias), vjp)


def pad_spatial_edge(x: ad.Var, pads: tuple[int, int, int]) -> ad.Var:
    """Edge-replicate pad at the high end of each spatial axis (0 or 1 each)."""
    if not any(pads):
        return x
    width = [(0, p) for p in pads] + [(0, 0)]
    value = np.pad(x.value, width, mode="edge")

    def vjp(g):
        g = g.copy()
        for axis, p in enumerate(pads):
            if p:
                idx_last = [slice(None)] * g.ndim
                idx_prev = [slice(None)] * g.ndim
                idx_last[axis] = -1
                idx_prev[axis] = -2
                g[tuple(idx_prev)] += g[tuple(idx_last)]
                keep = [slice(None)] * g.ndim
                keep[axis] = slice(0, g.shape[axis] - 1)
                g = g[tuple(keep)]
        return (g,)

    return ad.Var(value, x.tape, (x,), vjp)


def avg_pool2(x: ad.Var) -> ad.Var:
    """2x2x2 average pooling with stride 2 (spatial dims must be even)."""
    X, Y, Z, C = x.value.shape
    blocked = x.value.reshape(X // 2, 2, Y // 2, 2, Z // 2, 2, C)
    value = blocked.mean(axis=(1, 3, 5))

    def vjp(g):
        up = np.repeat(np.repeat(np.repeat(g, 2, axis=0), 2, axis=1), 2, axis=2)
        return (up / 8.0,)

    return ad.Var(value, x.tape, (x,), vjp)


def upsample_nearest2(x: ad.Var) -> ad.Var:
    """Nearest-neighbor 2x upsampling of the spatial dims."""
    value = np.repeat(np.repeat(np.repeat(x.value, 2, axis=0), 2, axis=1), 2, axis=2)
    X, Y, Z, C = x.value.shape

    def vjp(g):
        return (g.reshape(X, 2, Y, 2, Z, 2, C).sum(axis=(1, 3, 5)),)

    return ad.Var(value, x.tape, (x,), vjp)


def crop_spatial(x: ad.Var, dims: tuple[int, int, int]) -> ad.Var:
    """Crop the spatial dims down to `dims` (from the origin corner)."""
    if x.value.shape[:3] == tuple(dims):
        return x
    value = x.value[: dims[0], : dims[1], : dims[2]]

    def vjp(g):
        out = np.zeros_like(x.value)
        out[: dims[0], : dims[1], : dims[2]] = g
        return (out,)

    return ad.Var(value, x.tape, (x,), vjp)
