"""2D -> 3D feature lifting.

Three strategies: surface projection drops each pixel feature into the
single voxel at its estimated depth; sight projection spreads it along the
whole camera ray; distance-attention projection weights the sight
contributions by how far each voxel lies from the observed surface, so
occluded regions still receive (attenuated) features.

Feature images are (H, W, C) arrays; depth maps are (H, W) with 0 marking
invalid pixels.  Distances are meters along the (unit-direction) ray.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .blocks import AICBlock, aic_block
from .camera import CameraModel
from .errors import ContractViolationError
from .grid import DenseVoxelTensor, GridShape, SparseVoxelTensor


@dataclass
class DepthMap:
    values: np.ndarray  # (H, W), meters; <= 0 marks invalid pixels
    rms: float = 0.0  # scalar error estimate of the depth values, meters

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)

    @property
    def valid(self) -> np.ndarray:
        return self.values > 0


@dataclass
class VoxelGridGeometry:
    origin: np.ndarray  # (3,) world position of voxel (0, 0, 0)'s low corner
    voxel_size: float
    dims: tuple[int, int, int]

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=np.float64).reshape(3)
        if self.voxel_size <= 0:
            raise ContractViolationError("voxel_size must be positive")

    @property
    def num_voxels(self) -> int:
        return int(np.prod(self.dims))

    def coarsen(self, factor: int) -> "VoxelGridGeometry":
        if any(d % factor for d in self.dims):
            raise ContractViolationError(
                f"dims {self.dims} not divisible by coarsening factor {factor}"
            )
        return VoxelGridGeometry(
            self.origin, self.voxel_size * factor,
            tuple(d // factor for d in self.dims),
        )


def _check_sizes(img: np.ndarray, depth: DepthMap | None, cam: CameraModel):
    h, w = img.shape[:2]
    if (w, h) != (cam.width, cam.height):
        raise ContractViolationError(
            f"feature image {w}x{h} does not match camera {cam.width}x{cam.height}"
        )
    if depth is not None and depth.values.shape != (h, w):
        raise ContractViolationError("depth map size does not match feature image")


def _pixel_rays(cam: CameraModel):
    """Unit world directions through every pixel center, row-major order."""
    us, vs = np.meshgrid(
        np.arange(cam.width) + 0.5, np.arange(cam.height) + 0.5
    )
    dirs = cam.ray_directions(us.ravel(), vs.ravel())
    return dirs


def surface_project(img: np.ndarray, depth: DepthMap, cam: CameraModel,
                    geom: VoxelGridGeometry) -> SparseVoxelTensor:
    """Deposit each valid pixel's feature into the voxel at its depth.

    Pixels landing in the same voxel are averaged; pixels projecting
    outside the grid (or with invalid depth) are dropped.
    """
    _check_sizes(img, depth, cam)
    channels = img.shape[2]
    dirs = _pixel_rays(cam)
    valid = depth.valid.ravel()
    d = depth.values.ravel()[valid]
    feats = img.reshape(-1, channels)[valid]
    # nudge off the entry face so exact face distances land inside the voxel
    pts = cam.center + dirs[valid] * (d + 1e-6 * geom.voxel_size)[:, None]
    vox = np.floor((pts - geom.origin) / geom.voxel_size).astype(np.int64)
    inside = np.all((vox >= 0) & (vox < np.asarray(geom.dims)), axis=1)
    vox, feats = vox[inside], feats[inside]
    dims = geom.dims
    lin = (vox[:, 0] * dims[1] + vox[:, 1]) * dims[2] + vox[:, 2]
    acc = np.zeros((geom.num_voxels, channels))
    cnt = np.zeros(geom.num_voxels)
    np.add.at(acc, lin, feats)
    np.add.at(cnt, lin, 1.0)
    active_lin = np.flatnonzero(cnt > 0)
    shape = GridShape(*dims, channels)
    coords = np.stack(np.unravel_index(active_lin, dims), axis=1)
    return SparseVoxelTensor(shape, coords, acc[active_lin] / cnt[active_lin, None])


def distance_attention_weights(d, d_prime, delta, surface_tol: float = 0.0):
    """Attention weight of a point at ray distance d given surface distance d'.

    Behind the surface the weight decays as 1/(d - d' + 1); at the surface
    it is 1 (with |d - d'| <= surface_tol counting as "at"); between the
    near threshold delta and the surface it is 0.5; at or before delta it
    is 0.
    """
    d = np.asarray(d, dtype=np.float64)
    d_prime = np.asarray(d_prime, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    at = np.abs(d - d_prime) <= surface_tol
    w = np.where(
        at,
        1.0,
        np.where(
            d > d_prime,
            1.0 / (d - d_prime + 1.0),
            np.where((delta < d) & (d < d_prime), 0.5, 0.0),
        ),
    )
    if w.ndim == 0:
        return float(w)
    return w


def _ray_accumulate(img, cam, geom, weights_fn=None, depth: DepthMap | None = None):
    """Traverse all pixel rays and weighted-average features per voxel."""
    channels = img.shape[2]
    dirs = _pixel_rays(cam)
    if depth is not None:
        keep = depth.valid.ravel()
        ray_ids = np.flatnonzero(keep)
        dirs = dirs[keep]
    else:
        ray_ids = np.arange(dirs.shape[0])
    ray, lin, t_in, t_out = backend.traverse_rays(
        cam.center, dirs, geom.origin, geom.voxel_size, geom.dims
    )
    pix = ray_ids[ray]
    if weights_fn is None:
        w = np.ones(len(ray))
    else:
        w = weights_fn(pix, t_in, t_out)
    feats = img.reshape(-1, channels)
    acc = np.zeros((geom.num_voxels, channels))
    den = np.zeros(geom.num_voxels)
    np.add.at(acc, lin, w[:, None] * feats[pix])
    np.add.at(den, lin, w)
    hit = den > 0
    out = np.zeros_like(acc)
    out[hit] = acc[hit] / den[hit, None]
    shape = GridShape(*geom.dims, channels)
    return DenseVoxelTensor(shape, out.reshape(shape.spatial + (channels,)))


def sight_project(img: np.ndarray, cam: CameraModel,
                  geom: VoxelGridGeometry) -> DenseVoxelTensor:
    """Spread each pixel's feature over every voxel its ray traverses."""
    _check_sizes(img, None, cam)
    return _ray_accumulate(img, cam, geom)


def distance_attention_project(img: np.ndarray, depth: DepthMap, cam: CameraModel,
                               geom: VoxelGridGeometry) -> DenseVoxelTensor:
    """Sight projection reweighted by distance to the observed surface.

    For each (ray, voxel) visit the ray distance d is the surface distance
    clamped into the voxel's ray segment [t_in, t_out], so the voxel
    containing the surface point gets d = d' exactly (weight 1).  The near
    threshold is delta = max(0, d' - rms).  Pixels without valid depth are
    dropped.
    """
    _check_sizes(img, depth, cam)
    d_prime_all = depth.values.ravel()

    def weights(pix, t_in, t_out):
        dp = d_prime_all[pix]
        delta = np.maximum(0.0, dp - depth.rms)
        d = np.clip(dp, t_in, t_out)
        return distance_attention_weights(d, dp, delta)

    return _ray_accumulate(img, cam, geom, weights, depth)


def dap_context(x: DenseVoxelTensor, params: AICBlock) -> DenseVoxelTensor:
    """Encode a projected feature grid into the recurrent input context."""
    return aic_block(x, params)
