"""MAC profiles of the refinement cells and the coarse stage.

The dense-GRU comparator counts only in-grid taps so that a fully active
mask makes the masked cell's gate cost equal the dense cost; the padded
closed form is reported alongside for reference.
"""

from __future__ import annotations

import numpy as np

from .config import ExperimentConfig
from .errors import ContractViolationError
from .grid import linear_to_coords
from .macs import (
    conv_macs_dense,
    dense_gru_step_macs,
    msgru_step_macs,
)


def random_mask_coords(spatial, occupancy: float, seed: int = 0) -> np.ndarray:
    """Deterministic random active set at the given occupancy fraction."""
    if not 0.0 <= occupancy <= 1.0:
        raise ContractViolationError("occupancy must lie in [0, 1]")
    total = int(np.prod(spatial))
    n = int(round(occupancy * total))
    rng = np.random.default_rng([seed, 11])
    lin = np.sort(rng.choice(total, size=n, replace=False))
    return linear_to_coords(lin, spatial)


def coarse_stage_macs(config: ExperimentConfig) -> int:
    """Closed-form MAC total of the coarse path (projection excluded)."""
    c = config.feat_channels
    hidden = config.hidden_channels
    quarter = tuple(d // 4 for d in config.grid_dims)
    half = tuple(d // 2 for d in config.grid_dims)
    full = config.grid_dims

    def aic_block_macs(spatial, ch):
        per_module = sum(
            conv_macs_dense(spatial, ext, ch, ch)
            for ext in ((3, 1, 1), (1, 3, 1), (1, 1, 3), (1, 1, 1))
        )
        return 4 * per_module

    total = 2 * aic_block_macs(quarter, c)
    total += 2 * c * max(1, c // config.ca_reduction)  # channel attention matmuls
    total += conv_macs_dense(quarter, (3, 3, 3), c, hidden)  # deconv counted at inputs
    total += conv_macs_dense(half, (3, 3, 3), hidden, hidden)
    total += conv_macs_dense(full, (1, 1, 1), hidden, config.num_labels)
    return total


def context_macs(config: ExperimentConfig) -> int:
    c = config.feat_channels
    per_module = sum(
        conv_macs_dense(config.grid_dims, ext, c, c)
        for ext in ((3, 1, 1), (1, 3, 1), (1, 1, 3), (1, 1, 1))
    )
    return 4 * per_module


def profile(config: ExperimentConfig, occupancy: float, seed: int | None = None) -> dict:
    """Analytic MAC report for dense-GRU vs masked-sparse-GRU refinement."""
    spatial = config.grid_dims
    ext = (config.gate_extent,) * 3
    hidden, ctx = config.hidden_channels, config.feat_channels
    coords = random_mask_coords(spatial, occupancy,
                                config.seed if seed is None else seed)
    ms = msgru_step_macs(coords, spatial, ext, hidden, ctx, config.candidate_conv)
    dense_valid = dense_gru_step_macs(spatial, ext, hidden, ctx, count_padding=False)
    dense_padded = dense_gru_step_macs(spatial, ext, hidden, ctx, count_padding=True)
    n = max(config.iterations, 1)
    return {
        "grid": list(spatial),
        "occupancy": occupancy,
        "mask_voxels": len(coords),
        "iterations": n,
        "coarse_stage_macs": coarse_stage_macs(config),
        "context_macs_per_iteration": context_macs(config),
        "msgru": {
            "per_iteration": ms,
            "cumulative": {k: n * v for k, v in ms.items()},
        },
        "dense_gru": {
            "per_iteration": dense_valid,
            "per_iteration_padded": dense_padded,
            "cumulative": {k: n * v for k, v in dense_valid.items()},
        },
        "ratio_msgru_vs_dense": ms["total"] / dense_valid["total"],
    }


def render_profile(report: dict) -> str:
    ms = report["msgru"]
    dg = report["dense_gru"]
    lines = [
        f"grid {tuple(report['grid'])}  occupancy {report['occupancy']:.2%} "
        f"({report['mask_voxels']} voxels)  iterations {report['iterations']}",
        f"{'stage':<28} {'MACs/iter':>14} {'cumulative':>14}",
        "-" * 58,
        f"{'coarse stage (once)':<28} {report['coarse_stage_macs']:>14,} {'':>14}",
        f"{'context encoder':<28} {report['context_macs_per_iteration']:>14,} "
        f"{report['iterations'] * report['context_macs_per_iteration']:>14,}",
    ]
    for name, per, cum in (
        ("masked sparse GRU: gates", ms["per_iteration"]["gates"], ms["cumulative"]["gates"]),
        ("masked sparse GRU: cand.", ms["per_iteration"]["candidate"], ms["cumulative"]["candidate"]),
        ("masked sparse GRU: total", ms["per_iteration"]["total"], ms["cumulative"]["total"]),
        ("dense GRU: total", dg["per_iteration"]["total"], dg["cumulative"]["total"]),
    ):
        lines.append(f"{name:<28} {per:>14,} {cum:>14,}")
    lines.append(f"{'dense GRU (padded form)':<28} {dg['per_iteration_padded']['total']:>14,}")
    lines.append(f"masked/dense ratio: {report['ratio_msgru_vs_dense']:.4f}")
    return "\n".join(lines)
