"""Input corruptions for robustness evaluation.

Dark/bright scale the feature image; motion applies a circular 1D box
blur along image x (circular so row energy is conserved exactly); fog
blends features toward a gray constant with a depth-dependent factor
1 - exp(-beta * depth).  Each kind comes in a weak and a strong level.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .errors import ContractViolationError
from .scenes import SceneSample

KINDS = ("dark", "motion", "bright", "fog")
LEVELS = ("weak", "strong")

_PARAMS = {
    ("dark", "weak"): 0.5,
    ("dark", "strong"): 0.25,
    ("bright", "weak"): 1.5,
    ("bright", "strong"): 2.0,
    ("motion", "weak"): 3,
    ("motion", "strong"): 7,
    ("fog", "weak"): 0.1,
    ("fog", "strong"): 0.3,
}

_FOG_GRAY = 0.5


def box_blur_x(img: np.ndarray, width: int) -> np.ndarray:
    """Circular box filter along the image x axis (axis 1 of (H, W, C))."""
    if width % 2 == 0 or width < 1:
        raise ContractViolationError("blur width must be odd and positive")
    half = width // 2
    out = np.zeros_like(img)
    for k in range(-half, half + 1):
        out += np.roll(img, k, axis=1)
    return out / width


def perturb(sample: SceneSample, kind: str, level: str,
            strength: float | None = None) -> SceneSample:
    """Return a copy of the sample with corrupted features.

    `strength` overrides the level's built-in parameter (scale for
    dark/bright, box width for motion, beta for fog).
    """
    if kind not in KINDS:
        raise ContractViolationError(f"unknown perturbation kind {kind!r}")
    if level not in LEVELS:
        raise ContractViolationError(f"unknown perturbation level {level!r}")
    p = _PARAMS[(kind, level)] if strength is None else strength
    feats = sample.features
    if kind in ("dark", "bright"):
        feats = feats * float(p)
    elif kind == "motion":
        feats = box_blur_x(feats, int(p))
    else:  # fog
        depth = sample.depth_true.values
        d_eff = np.where(depth > 0, depth, 1e3)
        trans = np.exp(-float(p) * d_eff)[..., None]
        feats = feats * trans + _FOG_GRAY * (1.0 - trans)
    return replace(sample, features=feats)
