"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The numba path is used when numba imports cleanly; set ``VOXSSC_NO_NUMBA=1``
to force the numpy fallback.  Both paths produce identical outputs
(same values, same ordering), so tests and training are deterministic on
either.  ``benchmarks/bench_backends.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_numpy as _np_impl

_env = os.environ.get("VOXSSC_NO_NUMBA", "").strip().lower()
_disabled = _env in ("1", "true", "yes")

if not _disabled:
    try:
        from . import _kernels_numba as _nb_impl

        USE_NUMBA = True
    except ImportError:  # pragma: no cover - depends on environment
        _nb_impl = None
        USE_NUMBA = False
else:
    _nb_impl = None
    USE_NUMBA = False


def _impl():
    return _nb_impl if USE_NUMBA else _np_impl


def kernel_pairs(in_linear: np.ndarray, out_coords: np.ndarray,
                 offsets: np.ndarray, spatial: tuple[int, int, int]):
    """Match (input, output) active-site pairs for every kernel offset.

    in_linear: sorted linear codes of input active sites.
    out_coords: (m, 3) output active sites in lexicographic order.
    offsets: (K, 3) integer kernel offsets.
    Returns (pair_in, pair_out, counts): CSR-style arrays where
    counts[k] is the number of pairs for offset k and pair_* hold the
    input/output row indices concatenated across offsets.
    """
    dims = np.asarray(spatial, dtype=np.int64)
    return _impl().kernel_pairs(
        np.ascontiguousarray(in_linear, dtype=np.int64),
        np.ascontiguousarray(out_coords, dtype=np.int64),
        np.ascontiguousarray(offsets, dtype=np.int64),
        dims,
    )


def traverse_rays(origin: np.ndarray, dirs: np.ndarray, grid_origin: np.ndarray,
                  voxel_size: float, spatial: tuple[int, int, int]):
    """Amortized DDA traversal of every ray through the voxel grid.

    Rays start at `origin` (shared) with unit directions `dirs` (R, 3).
    Returns (ray_idx, lin_idx, t_in, t_out) for every (ray, voxel) visit,
    ordered by ray then by distance along the ray.
    """
    dims = np.asarray(spatial, dtype=np.int64)
    return _impl().traverse_rays(
        np.ascontiguousarray(origin, dtype=np.float64),
        np.ascontiguousarray(dirs, dtype=np.float64),
        np.ascontiguousarray(grid_origin, dtype=np.float64),
        float(voxel_size),
        dims,
    )


def first_hits(origin: np.ndarray, dirs: np.ndarray, grid_origin: np.ndarray,
               voxel_size: float, spatial: tuple[int, int, int],
               occupied: np.ndarray):
    """Distance to the first occupied voxel along each ray (-1.0 on miss).

    `occupied` is a flat uint8 grid in row-major (x, y, z) order.
    Returns (t_hit, lin_idx) with lin_idx -1 where the ray misses.
    """
    dims = np.asarray(spatial, dtype=np.int64)
    return _impl().first_hits(
        np.ascontiguousarray(origin, dtype=np.float64),
        np.ascontiguousarray(dirs, dtype=np.float64),
        np.ascontiguousarray(grid_origin, dtype=np.float64),
        float(voxel_size),
        dims,
        np.ascontiguousarray(occupied, dtype=np.uint8),
    )
