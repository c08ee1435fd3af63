"""Pinhole camera model: p_uv = K [R|t] p_xyz.

Camera files are plain text: nine numbers for K (row major), twelve for
[R|t], then the image size as `W H`.  Whitespace and line breaks are
interchangeable.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BehindCameraError, ContractViolationError


@dataclass
class CameraModel:
    K: np.ndarray  # (3, 3) intrinsics
    R: np.ndarray  # (3, 3) rotation, world -> camera
    t: np.ndarray  # (3,) translation, meters
    width: int
    height: int

    def __post_init__(self):
        self.K = np.asarray(self.K, dtype=np.float64).reshape(3, 3)
        self.R = np.asarray(self.R, dtype=np.float64).reshape(3, 3)
        self.t = np.asarray(self.t, dtype=np.float64).reshape(3)
        low = np.tril(self.K, k=-1)
        if np.any(np.abs(low) > 1e-12):
            raise ContractViolationError("K must be upper triangular")
        if self.K[0, 0] <= 0 or self.K[1, 1] <= 0:
            raise ContractViolationError("focal entries of K must be positive")
        if np.abs(self.R.T @ self.R - np.eye(3)).max() > 1e-9:
            raise ContractViolationError("R must be orthonormal")

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.R.T @ self.t

    def world_to_camera(self, points: np.ndarray) -> np.ndarray:
        return points @ self.R.T + self.t

    def ray_directions(self, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
        """Unit world-frame directions through image points (u, v)."""
        ones = np.ones_like(us, dtype=np.float64)
        pix = np.stack([us, vs, ones], axis=-1)
        cam_dirs = pix @ np.linalg.inv(self.K).T
        world = cam_dirs @ self.R
        return world / np.linalg.norm(world, axis=-1, keepdims=True)


def project_point(cam: CameraModel, p: np.ndarray) -> tuple[float, float, float]:
    """Project a world point; returns (u, v, depth). Raises behind the camera."""
    q = cam.R @ np.asarray(p, dtype=np.float64) + cam.t
    uvw = cam.K @ q
    depth = uvw[2]
    if depth <= 0:
        raise BehindCameraError(f"point {p} has non-positive depth {depth}")
    return uvw[0] / depth, uvw[1] / depth, depth


def project_points(cam: CameraModel, pts: np.ndarray):
    """Vectorized projection; returns (u, v, depth) arrays, no depth check."""
    q = pts @ cam.R.T + cam.t
    uvw = q @ cam.K.T
    depth = uvw[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = uvw[:, 0] / depth
        v = uvw[:, 1] / depth
    return u, v, depth


def unproject_point(cam: CameraModel, u: float, v: float, depth: float) -> np.ndarray:
    """Invert project_point: pixel plus camera-frame depth back to world."""
    pix = np.array([u * depth, v * depth, depth])
    q = np.linalg.solve(cam.K, pix)
    return cam.R.T @ (q - cam.t)


def save_camera(cam: CameraModel, path: str | Path) -> None:
    rt = np.hstack([cam.R, cam.t[:, None]])
    lines = []
    for row in cam.K:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    for row in rt:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    lines.append(f"{cam.width} {cam.height}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_camera(path: str | Path) -> CameraModel:
    tokens = Path(path).read_text().split()
    if len(tokens) != 9 + 12 + 2:
        raise ContractViolationError(f"camera file {path} must hold 23 numbers")
    vals = [float(tok) for tok in tokens[:21]]
    K = np.array(vals[:9]).reshape(3, 3)
    rt = np.array(vals[9:21]).reshape(3, 4)
    return CameraModel(K, rt[:, :3], rt[:, 3], int(tokens[21]), int(tokens[22]))
