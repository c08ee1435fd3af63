"""Training objectives: sequential cross-entropy, weighted mask BCE, totals.

Stage i of the completion loss carries weight gamma_mssc**i (the coarse
stage is stage 0); mask i of the mask loss carries gamma_mask**(N - i), as
the sums are written.  Voxels flagged with the ignore label contribute
exactly zero loss and zero gradient.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, Var
from .errors import UndefinedLossError
from .masking import IGNORE_LABEL


@dataclass
class LossBreakdown:
    l_mssc: float
    l_mask: float
    l_scal: float
    total: float
    stage_ce: list[float] = field(default_factory=list)
    stage_wbce: list[float] = field(default_factory=list)

    def record(self, step: int) -> dict:
        return {
            "step": step,
            "l_mssc": self.l_mssc,
            "l_mask": self.l_mask,
            "l_scal": self.l_scal,
            "total": self.total,
        }


def cross_entropy(logits: Var, labels: np.ndarray,
                  ignore_label: int = IGNORE_LABEL) -> Var:
    """Mean negative log-softmax of the true class over non-ignored voxels."""
    flat_labels = labels.ravel()
    valid = np.flatnonzero(flat_labels != ignore_label)
    if valid.size == 0:
        raise UndefinedLossError("cross entropy undefined: every voxel is ignored")
    num_classes = logits.value.shape[-1]
    rows = ad.gather_rows(ad.reshape(logits, (-1, num_classes)), valid)
    true_logit = ad.take_per_row(rows, flat_labels[valid])
    return ad.vmean(ad.logsumexp_rows(rows) - true_logit)


def sequential_mssc_loss(preds: Sequence[Var], labels: np.ndarray,
                         gamma: float = 0.8,
                         ignore_label: int = IGNORE_LABEL) -> tuple[Var, list[float]]:
    """Sum of gamma**i * CE over prediction stages; returns (loss, stage CEs)."""
    total = None
    stages = []
    for i, pred in enumerate(preds):
        ce = cross_entropy(pred, labels, ignore_label)
        stages.append(float(ce.value))
        term = ad.mul_const(ce, gamma**i)
        total = term if total is None else total + term
    if total is None:
        raise UndefinedLossError("no prediction stages given")
    return total, stages


def weighted_bce(pred: Var, gt_mask: np.ndarray,
                 valid: np.ndarray | None = None) -> Var:
    """Class-balanced binary cross entropy on a probability field in (0, 1).

    Positive and negative terms are weighted by inverse class frequency;
    degenerate targets (single class) fall back to unweighted BCE.
    """
    flat_gt = gt_mask.ravel().astype(bool)
    if valid is None:
        valid = np.ones_like(flat_gt)
    else:
        valid = valid.ravel().astype(bool)
    pos = np.flatnonzero(flat_gt & valid)
    neg = np.flatnonzero(~flat_gt & valid)
    n = pos.size + neg.size
    if n == 0:
        raise UndefinedLossError("weighted BCE undefined: every voxel is ignored")
    if pos.size == 0 or neg.size == 0:
        w_pos = w_neg = 1.0
    else:
        w_pos = n / (2.0 * pos.size)
        w_neg = n / (2.0 * neg.size)
    # clamp away exact 0/1 from saturated upstream softmaxes
    p_flat = ad.clip(ad.reshape(pred, (-1,)), 1e-12, 1.0 - 1e-12)
    total = None
    if pos.size:
        term = ad.mul_const(ad.vsum(ad.log(ad.gather_rows(p_flat, pos))), -w_pos)
        total = term
    if neg.size:
        term = ad.mul_const(ad.vsum(ad.log(1.0 - ad.gather_rows(p_flat, neg))), -w_neg)
        total = term if total is None else total + term
    return ad.mul_const(total, 1.0 / n)


def sequential_mask_loss(mask_probs: Sequence[Var], gt_mask: np.ndarray,
                         n_iterations: int, gamma: float = 0.6,
                         valid: np.ndarray | None = None) -> tuple[Var | None, list[float]]:
    """Sum of gamma**(N - i) * WBCE over masks i = 1..N-1.

    `mask_probs[j]` is the occupancy probability field predicted at
    iteration j+1.  Returns (loss or None when the sum is empty, per-mask
    WBCE values).
    """
    total = None
    stages = []
    for j, probs in enumerate(mask_probs):
        i = j + 1
        wbce = weighted_bce(probs, gt_mask, valid)
        stages.append(float(wbce.value))
        term = ad.mul_const(wbce, gamma ** (n_iterations - i))
        total = term if total is None else total + term
    return total, stages


ScalHook = Callable[[Sequence[Var], np.ndarray], Var]


def total_loss(preds: Sequence[Var], mask_probs: Sequence[Var], labels: np.ndarray,
               gt_mask: np.ndarray, n_iterations: int, tape: Tape,
               gamma_mssc: float = 0.8, gamma_mask: float = 0.6,
               use_mask_loss: bool = True,
               scal_hook: ScalHook | None = None,
               ignore_label: int = IGNORE_LABEL) -> tuple[Var, LossBreakdown]:
    """Assemble the full objective; the affinity term defaults to zero.

    Returns the scalar loss node plus a float breakdown for logging.
    """
    l_mssc, stage_ce = sequential_mssc_loss(preds, labels, gamma_mssc, ignore_label)
    valid = labels != ignore_label
    stage_wbce: list[float] = []
    l_mask = None
    if use_mask_loss and mask_probs:
        l_mask, stage_wbce = sequential_mask_loss(
            mask_probs, gt_mask, n_iterations, gamma_mask, valid)
    l_scal = scal_hook(preds, labels) if scal_hook is not None else None

    total = l_mssc
    if l_mask is not None:
        total = total + l_mask
    if l_scal is not None:
        total = total + l_scal
    breakdown = LossBreakdown(
        l_mssc=float(l_mssc.value),
        l_mask=float(l_mask.value) if l_mask is not None else 0.0,
        l_scal=float(l_scal.value) if l_scal is not None else 0.0,
        total=float(total.value),
        stage_ce=stage_ce,
        stage_wbce=stage_wbce,
    )
    return total, breakdown
