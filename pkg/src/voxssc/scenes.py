"""Synthetic desk-scale scenes: boxes on a floor in front of a wall.

Each scene is a labeled voxel grid (class 0 = empty, 255 = ignore), a
camera looking into the grid, a depth map rendered by exact first-hit ray
casting, and a feature image built from per-class embedding vectors plus
Gaussian pixel noise.  Voxels outside the camera frustum are flagged
ignore.  Everything is a pure function of the seed and the config.

On disk a scene is a directory:

    camera.txt      intrinsics, extrinsics, image size (see camera module)
    geometry.txt    grid origin, voxel size, dims
    depth.f32       noisy depth raster, text header "W H C" + "rms <v>"
    depth_true.f32  rendered depth raster, same layout
    features.f32    feature raster, text header "W H C"
    labels.u8       label grid bytes, text header "X Y Z"
    mask.rle        ground-truth occupancy mask, run-length encoded
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import backend
from .camera import CameraModel, load_camera, project_points, save_camera
from .config import ExperimentConfig
from .errors import ContractViolationError
from .masking import IGNORE_LABEL, mask_gt, save_mask_rle
from .projection import DepthMap, VoxelGridGeometry

FLOOR_CLASS = 1
WALL_CLASS = 2
BOX_CLASSES = (3, 4, 5)

def class_embeddings(classes: int, channels: int) -> np.ndarray:
    """Fixed per-class feature vectors; the 2D "backbone" output is these
    plus pixel noise, so they must not vary across scenes or seeds."""
    emb = np.zeros((classes + 1, channels))
    ident = min(classes, channels)
    emb[1:ident + 1, :ident] = 2.0 * np.eye(ident)
    extra = np.random.default_rng(1815)
    emb[1:, :] += 0.5 * extra.standard_normal((classes, channels))
    return emb


@dataclass
class SceneSample:
    features: np.ndarray  # (H, W, C)
    depth_true: DepthMap
    depth_noisy: DepthMap
    camera: CameraModel
    labels: np.ndarray  # (X, Y, Z) uint8, 255 = ignore
    geometry: VoxelGridGeometry


def _default_camera(config: ExperimentConfig, geom: VoxelGridGeometry) -> CameraModel:
    w, h = config.image_w, config.image_h
    fx = w / (2.0 * np.tan(np.deg2rad(60.0) / 2.0))
    K = np.array([[fx, 0.0, w / 2.0], [0.0, fx, h / 2.0], [0.0, 0.0, 1.0]])
    extent = np.asarray(geom.dims) * geom.voxel_size
    # look down the -z world axis from just outside the grid, x right, y up
    R = np.diag([1.0, -1.0, -1.0])
    center = geom.origin + np.array([0.5 * extent[0], 0.62 * extent[1],
                                     extent[2] + 0.35 * extent[2]])
    t = -R @ center
    return CameraModel(K, R, t, w, h)


def _place_scene(rng: np.random.Generator, config: ExperimentConfig) -> np.ndarray:
    dims = config.grid_dims
    labels = np.zeros(dims, dtype=np.uint8)
    labels[:, 0, :] = FLOOR_CLASS
    if config.max_boxes == 0:
        return labels
    labels[:, :, 0] = WALL_CLASS
    lo = min(3, config.max_boxes)
    n_boxes = int(rng.integers(lo, config.max_boxes + 1))
    for _ in range(n_boxes):
        cls = BOX_CLASSES[int(rng.integers(len(BOX_CLASSES)))]
        sx = int(rng.integers(2, max(3, dims[0] // 3) + 1))
        sy = int(rng.integers(2, max(3, (3 * dims[1]) // 5) + 1))
        sz = int(rng.integers(2, max(3, dims[2] // 3) + 1))
        x0 = int(rng.integers(0, dims[0] - sx + 1))
        z0 = int(rng.integers(1, dims[2] - sz + 1))
        labels[x0:x0 + sx, 1:1 + sy, z0:z0 + sz] = cls
    return labels


def _render(labels: np.ndarray, cam: CameraModel, geom: VoxelGridGeometry):
    """Exact first-hit depth and per-pixel hit class via DDA ray casting."""
    us, vs = np.meshgrid(np.arange(cam.width) + 0.5, np.arange(cam.height) + 0.5)
    dirs = cam.ray_directions(us.ravel(), vs.ravel())
    occupied = (labels != 0).astype(np.uint8).ravel()
    t_hit, lin = backend.first_hits(cam.center, dirs, geom.origin,
                                    geom.voxel_size, geom.dims, occupied)
    depth = np.where(t_hit > 0, t_hit, 0.0).reshape(cam.height, cam.width)
    hit_class = np.zeros(lin.shape[0], dtype=np.int64)
    ok = lin >= 0
    hit_class[ok] = labels.ravel()[lin[ok]]
    return depth, hit_class.reshape(cam.height, cam.width)


def _frustum_ignore(labels: np.ndarray, cam: CameraModel,
                    geom: VoxelGridGeometry) -> np.ndarray:
    """Flag voxels whose center projects outside the image as ignore."""
    dims = geom.dims
    idx = np.indices(dims).reshape(3, -1).T
    centers = geom.origin + (idx + 0.5) * geom.voxel_size
    u, v, depth = project_points(cam, centers)
    inside = (depth > 0) & (u >= 0) & (u < cam.width) & (v >= 0) & (v < cam.height)
    out = labels.copy()
    out.ravel()[~inside] = IGNORE_LABEL
    return out


def generate_scene(seed, config: ExperimentConfig) -> SceneSample:
    """Deterministic synthetic sample for a seed (int or entropy sequence)."""
    rng = np.random.default_rng(seed)
    geom = VoxelGridGeometry(np.zeros(3), config.voxel_size, config.grid_dims)
    cam = _default_camera(config, geom)
    labels = _place_scene(rng, config)
    depth, hit_class = _render(labels, cam, geom)

    emb = class_embeddings(config.classes, config.feat_channels)
    features = emb[hit_class]
    if config.feature_noise > 0:
        features = features + rng.normal(0.0, config.feature_noise, features.shape)

    noisy = depth.copy()
    valid = depth > 0
    if config.depth_rms > 0:
        noise = rng.normal(0.0, config.depth_rms, depth.shape)
        noisy[valid] = np.maximum(1e-3, depth[valid] + noise[valid])

    labels = _frustum_ignore(labels, cam, geom)
    return SceneSample(
        features=features,
        depth_true=DepthMap(depth, rms=0.0),
        depth_noisy=DepthMap(noisy, rms=config.depth_rms),
        camera=cam,
        labels=labels,
        geometry=geom,
    )


def scene_seeds(config: ExperimentConfig, split: str) -> list[list[int]]:
    """Entropy sequences for the train/eval splits."""
    kind = {"train": 1, "eval": 2}[split]
    count = config.train_scenes if split == "train" else config.eval_scenes
    return [[config.seed, kind, i] for i in range(count)]


def build_dataset(config: ExperimentConfig, split: str) -> list[SceneSample]:
    return [generate_scene(seed, config) for seed in scene_seeds(config, split)]


# ---------------------------------------------------------------------------
# scene directory IO
# ---------------------------------------------------------------------------


def _write_raster(path: Path, data: np.ndarray, rms: float | None = None):
    h, w = data.shape[:2]
    c = 1 if data.ndim == 2 else data.shape[2]
    header = f"{w} {h} {c}\n"
    if rms is not None:
        header += f"rms {rms:.17g}\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def _read_raster(path: Path, with_rms: bool = False):
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    w, h, c = (int(tok) for tok in raw[:nl].split())
    pos = nl + 1
    rms = 0.0
    if with_rms:
        nl2 = raw.index(b"\n", pos)
        key, val = raw[pos:nl2].split()
        if key != b"rms":
            raise ContractViolationError(f"{path}: expected rms header line")
        rms = float(val)
        pos = nl2 + 1
    data = np.frombuffer(raw, dtype="<f4", count=w * h * c, offset=pos)
    data = data.astype(np.float64).reshape(h, w, c)
    if c == 1:
        data = data[:, :, 0]
    return (data, rms) if with_rms else data


def save_scene(sample: SceneSample, scene_dir: str | Path) -> None:
    d = Path(scene_dir)
    d.mkdir(parents=True, exist_ok=True)
    save_camera(sample.camera, d / "camera.txt")
    g = sample.geometry
    (d / "geometry.txt").write_text(
        "origin {:.17g} {:.17g} {:.17g}\nvoxel_size {:.17g}\ndims {} {} {}\n".format(
            *g.origin, g.voxel_size, *g.dims
        )
    )
    _write_raster(d / "depth.f32", sample.depth_noisy.values, sample.depth_noisy.rms)
    _write_raster(d / "depth_true.f32", sample.depth_true.values, sample.depth_true.rms)
    _write_raster(d / "features.f32", sample.features)
    x, y, z = sample.labels.shape
    with open(d / "labels.u8", "wb") as fh:
        fh.write(f"{x} {y} {z}\n".encode("ascii"))
        fh.write(np.ascontiguousarray(sample.labels, dtype=np.uint8).tobytes())
    save_mask_rle(mask_gt(sample.labels), d / "mask.rle")


def load_scene(scene_dir: str | Path) -> SceneSample:
    d = Path(scene_dir)
    cam = load_camera(d / "camera.txt")
    geo_tokens = (d / "geometry.txt").read_text().split()
    origin = np.array([float(geo_tokens[1]), float(geo_tokens[2]), float(geo_tokens[3])])
    voxel = float(geo_tokens[5])
    dims = (int(geo_tokens[7]), int(geo_tokens[8]), int(geo_tokens[9]))
    geom = VoxelGridGeometry(origin, voxel, dims)
    noisy, rms = _read_raster(d / "depth.f32", with_rms=True)
    true, _ = _read_raster(d / "depth_true.f32", with_rms=True)
    features = _read_raster(d / "features.f32")
    raw = (d / "labels.u8").read_bytes()
    nl = raw.index(b"\n")
    lx, ly, lz = (int(tok) for tok in raw[:nl].split())
    labels = np.frombuffer(raw, dtype=np.uint8, offset=nl + 1,
                           count=lx * ly * lz).reshape(lx, ly, lz).copy()
    return SceneSample(features, DepthMap(true, 0.0), DepthMap(noisy, rms),
                       cam, labels, geom)


def save_dataset(samples: list[SceneSample], out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, sample in enumerate(samples):
        save_scene(sample, out / f"scene_{i:04d}")


def load_dataset(scene_root: str | Path) -> list[SceneSample]:
    root = Path(scene_root)
    dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not dirs:
        raise ContractViolationError(f"no scene directories under {scene_root}")
    return [load_scene(p) for p in dirs]
