"""End-to-end model: coarse completion stage plus masked recurrent refinement.

The coarse path projects image features into a quarter-resolution grid
(surface projection on the estimated depth), encodes them with two
anisotropic blocks around a channel-attention module, upsamples twice back
to full resolution, and reads class logits off a shared head.  Refinement
then re-encodes a full-resolution projection of the same image (surface,
sight, or distance-attention, per config) as the per-iteration context and
updates the hidden state with the configured recurrent cell, guided by an
occupancy mask that the mask head may edit between iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import ParameterStore, Tape, Var
from .blocks import AICBlock, ChannelAttention, Deconv, SSCHead
from .config import ExperimentConfig
from .errors import ContractViolationError
from .grid import densify
from .gru import MSGRUParams, dense_gru_step_tape, msgru_step_tape
from .masking import (
    MaskHead,
    VoxelMask,
    apply_topk_update,
    init_mask,
    mask_gt,
    occupancy_score,
)
from .projection import (
    distance_attention_project,
    sight_project,
    surface_project,
)
from .scenes import SceneSample


@dataclass
class PreparedScene:
    """Projection results and targets cached per scene before training."""

    coarse_in: np.ndarray  # (X/4, Y/4, Z/4, C)
    refine_in: np.ndarray  # (X, Y, Z, C)
    labels: np.ndarray  # (X, Y, Z) uint8 with ignore flags
    gt_mask: np.ndarray  # (X, Y, Z) bool


@dataclass
class ForwardResult:
    predictions: list[Var]  # class logits per stage, coarse first
    hidden: list[Var]  # hidden states h_0 .. h_N
    masks: list[VoxelMask]  # m_0 .. m_{N-1} driving the gating
    mask_probs: list[Var]  # occupancy probability fields m_1 .. m_{N-1}

    @property
    def final_logits(self) -> Var:
        return self.predictions[-1]


class SceneCompletionModel:
    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.params = ParameterStore()
        rng = np.random.default_rng([config.seed, 17])
        c_img = config.feat_channels
        hidden = config.hidden_channels
        ext = (config.gate_extent,) * 3

        self.enc1 = AICBlock(self.params, "coarse.enc1", c_img, rng)
        self.ca = ChannelAttention(self.params, "coarse.ca", c_img, rng,
                                   reduction=config.ca_reduction)
        self.enc2 = AICBlock(self.params, "coarse.enc2", c_img, rng)
        self.up1 = Deconv(self.params, "coarse.up1", c_img, hidden, rng)
        self.up2 = Deconv(self.params, "coarse.up2", hidden, hidden, rng)
        self.head = SSCHead(self.params, "head", hidden, config.classes, rng)
        self.ctx_enc = AICBlock(self.params, "refine.ctx", c_img, rng)
        self.mask_head = MaskHead(self.params, "mask_head", config.num_labels, rng)

        # cells come last so the untied variant's extra draws cannot shift
        # the initialization of any shared component
        self.cells: list[MSGRUParams] = []
        if config.iterations > 0:
            first = MSGRUParams(self.params, "cell0", hidden, c_img, rng, ext)
            self.cells.append(first)
            if not config.tied_weights:
                for i in range(1, config.iterations):
                    extra = MSGRUParams(self.params, f"cell{i}", hidden, c_img, rng, ext)
                    extra.copy_values_from(first)  # untie through training, not init
                    self.cells.append(extra)

    def cell_params(self, iteration: int) -> MSGRUParams:
        if self.config.tied_weights:
            return self.cells[0]
        return self.cells[iteration - 1]

    # -- data preparation --------------------------------------------------

    def prepare(self, sample: SceneSample) -> PreparedScene:
        cfg = self.config
        geom = sample.geometry
        if tuple(geom.dims) != cfg.grid_dims:
            raise ContractViolationError(
                f"scene grid {geom.dims} does not match config {cfg.grid_dims}"
            )
        coarse_geom = geom.coarsen(4)
        coarse_in = densify(
            surface_project(sample.features, sample.depth_noisy, sample.camera,
                            coarse_geom)
        ).values
        if cfg.projection == "surface":
            refine_in = densify(
                surface_project(sample.features, sample.depth_noisy, sample.camera, geom)
            ).values
        elif cfg.projection == "sight":
            refine_in = sight_project(sample.features, sample.camera, geom).values
        else:
            refine_in = distance_attention_project(
                sample.features, sample.depth_noisy, sample.camera, geom
            ).values
        return PreparedScene(
            coarse_in=coarse_in,
            refine_in=refine_in,
            labels=sample.labels,
            gt_mask=mask_gt(sample.labels).values,
        )

    # -- forward -----------------------------------------------------------

    def coarse_forward(self, tape: Tape, prep: PreparedScene) -> tuple[Var, Var]:
        x = tape.const(prep.coarse_in)
        x = self.enc1.apply(tape, x)
        x = self.ca.apply(tape, x)
        x = self.enc2.apply(tape, x)
        x = self.up1.apply(tape, x)
        h0 = self.up2.apply(tape, x)
        y0 = self.head.apply(tape, h0)
        return h0, y0

    def forward(self, prep: PreparedScene, tape: Tape | None = None,
                training: bool = False,
                rng: np.random.Generator | None = None) -> ForwardResult:
        cfg = self.config
        tape = tape or Tape()
        h, y0 = self.coarse_forward(tape, prep)
        if cfg.mask_init:
            m = init_mask(occupancy_score(y0.value), cfg.mask_threshold)
        else:
            m = VoxelMask(np.ones(cfg.grid_dims, dtype=bool))
        result = ForwardResult([y0], [h], [m], [])
        if cfg.iterations == 0:
            return result

        for it in range(1, cfg.iterations + 1):
            ctx = self.ctx_enc.apply(tape, tape.const(prep.refine_in))
            cell = self.cell_params(it)
            if cfg.cell == "msgru":
                h = msgru_step_tape(tape, h, ctx, m.values, cell, cfg.candidate_conv)
            else:
                h = dense_gru_step_tape(tape, h, ctx, cell)
            y = self.head.apply(tape, h)
            result.hidden.append(h)
            result.predictions.append(y)
            if it < cfg.iterations:
                need_head = cfg.mask_update or cfg.mask_loss
                if need_head:
                    m_o, m_e = self.mask_head.apply(tape, y, training, rng)
                    result.mask_probs.append(m_o)
                    if cfg.mask_update:
                        m = apply_topk_update(m, m_o.value, m_e.value, cfg.top_k)
                result.masks.append(m)
        return result

    def predict(self, prep: PreparedScene) -> tuple[np.ndarray, np.ndarray]:
        """Eval-mode label grids (coarse, refined)."""
        out = self.forward(prep, training=False)
        coarse = np.argmax(out.predictions[0].value, axis=-1)
        refined = np.argmax(out.final_logits.value, axis=-1)
        return coarse, refined


def build_model(config: ExperimentConfig) -> SceneCompletionModel:
    return SceneCompletionModel(config)
