"""Experiment configuration and its flat key-value file format.

Config files hold one `key = value` pair per line; `#` starts a comment.
Unknown keys are an error so typos in ablation scripts fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError

PROJECTIONS = ("surface", "sight", "dap")
CELLS = ("gru", "msgru")
CANDIDATE_CONVS = ("sparse", "submanifold")


@dataclass(frozen=True)
class ExperimentConfig:
    # grid and data
    grid_x: int = 32
    grid_y: int = 16
    grid_z: int = 32
    classes: int = 5  # semantic classes; class 0 is empty and not counted
    voxel_size: float = 0.2
    image_w: int = 64
    image_h: int = 48
    feat_channels: int = 8
    depth_rms: float = 0.1
    feature_noise: float = 0.05
    max_boxes: int = 6
    train_scenes: int = 200
    eval_scenes: int = 20
    # model
    hidden_channels: int = 16
    iterations: int = 2
    ca_reduction: int = 4
    gate_extent: int = 3
    mask_threshold: float = 0.6
    top_k: int = 5
    # optimization
    lr: float = 0.1
    poly_power: float = 0.9
    epochs: int = 4
    seed: int = 0
    gamma_mssc: float = 0.8
    gamma_mask: float = 0.6
    # ablation toggles
    mask_update: bool = True
    mask_init: bool = True
    mask_loss: bool = True
    tied_weights: bool = True
    projection: str = "dap"
    cell: str = "msgru"
    candidate_conv: str = "sparse"

    def __post_init__(self):
        for d in (self.grid_x, self.grid_y, self.grid_z):
            if d < 4 or d % 4:
                raise ConfigError(f"grid dims must be multiples of 4, got {d}")
        if self.projection not in PROJECTIONS:
            raise ConfigError(f"projection must be one of {PROJECTIONS}")
        if self.cell not in CELLS:
            raise ConfigError(f"cell must be one of {CELLS}")
        if self.candidate_conv not in CANDIDATE_CONVS:
            raise ConfigError(f"candidate_conv must be one of {CANDIDATE_CONVS}")
        if self.iterations < 0:
            raise ConfigError("iterations must be >= 0")
        if not 0.0 < self.mask_threshold < 1.0:
            raise ConfigError("mask_threshold must lie in (0, 1)")
        if self.classes < 1 or self.classes > 250:
            raise ConfigError("classes must lie in [1, 250]")
        if self.gate_extent % 2 == 0:
            raise ConfigError("gate_extent must be odd")

    @property
    def grid_dims(self) -> tuple[int, int, int]:
        return (self.grid_x, self.grid_y, self.grid_z)

    @property
    def num_labels(self) -> int:
        return self.classes + 1

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **kwargs)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                v = "true" if v else "false"
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


def toy_config(**overrides) -> ExperimentConfig:
    """Small grid and dataset for fast smoke/ablation runs."""
    base = ExperimentConfig(
        grid_x=16, grid_y=8, grid_z=16,
        image_w=32, image_h=24,
        feat_channels=6, hidden_channels=8,
        train_scenes=8, eval_scenes=4,
        epochs=1, max_boxes=3,
    )
    return base.with_overrides(**overrides) if overrides else base


def _convert(name: str, raw: str, target_type):
    raw = raw.strip()
    if target_type is bool:
        low = raw.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ConfigError(f"key {name}: expected a boolean, got {raw!r}")
    try:
        return target_type(raw)
    except ValueError as exc:
        raise ConfigError(f"key {name}: {exc}") from exc


def parse_config(text: str) -> ExperimentConfig:
    known = {f.name: f.type for f in fields(ExperimentConfig)}
    defaults = ExperimentConfig()
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        target_type = type(getattr(defaults, key))
        values[key] = _convert(key, raw, target_type)
    return ExperimentConfig(**values)


def load_config(path: str | Path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def save_config(config: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(config.to_text())
