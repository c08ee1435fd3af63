"""Named config variants for the ablation grids.

Each entry is (name, config); every toggle combination used in the
component, projection, cell-design, and mask-design studies is reachable
from a base config through these helpers.
"""

from __future__ import annotations

from .config import ExperimentConfig


def component_rows(base: ExperimentConfig) -> list[tuple[str, ExperimentConfig]]:
    """Cumulative build-up: coarse only, +cell, +projection, +mask updating."""
    return [
        ("baseline", base.with_overrides(
            iterations=0, mask_update=False, mask_loss=False)),
        ("+recurrent_cell", base.with_overrides(
            projection="surface", mask_update=False, mask_loss=False)),
        ("+distance_attention", base.with_overrides(
            projection="dap", mask_update=False, mask_loss=False)),
        ("+mask_updating", base.with_overrides(
            projection="dap", mask_update=True, mask_loss=True)),
    ]


def projection_rows(base: ExperimentConfig) -> list[tuple[str, ExperimentConfig]]:
    return [
        (name, base.with_overrides(projection=name))
        for name in ("surface", "sight", "dap")
    ]


def cell_design_rows(base: ExperimentConfig) -> list[tuple[str, ExperimentConfig]]:
    rows = [
        ("dense_gru", base.with_overrides(cell="gru")),
        ("masked_sparse_gru", base.with_overrides(cell="msgru")),
        ("submanifold_candidate", base.with_overrides(candidate_conv="submanifold")),
        ("sparse_candidate", base.with_overrides(candidate_conv="sparse")),
        ("untied_weights", base.with_overrides(tied_weights=False)),
        ("tied_weights", base.with_overrides(tied_weights=True)),
    ]
    rows += [
        (f"iterations_{n}", base.with_overrides(iterations=n)) for n in (1, 2, 3, 4)
    ]
    return rows


def mask_design_rows(base: ExperimentConfig) -> list[tuple[str, ExperimentConfig]]:
    rows = []
    for toggle in ("mask_update", "mask_init", "mask_loss"):
        for value in (True, False):
            tag = "with" if value else "without"
            rows.append((f"{tag}_{toggle}", base.with_overrides(**{toggle: value})))
    return rows


def all_rows(base: ExperimentConfig) -> list[tuple[str, ExperimentConfig]]:
    rows = []
    for group, entries in (
        ("components", component_rows(base)),
        ("projection", projection_rows(base)),
        ("cell", cell_design_rows(base)),
        ("mask", mask_design_rows(base)),
    ):
        rows += [(f"{group}/{name}", cfg) for name, cfg in entries]
    return rows
