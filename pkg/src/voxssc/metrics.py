"""Scene-completion and semantic metrics.

Scene completion treats every voxel as occupied (predicted class != 0) or
empty and reports IoU, precision, and recall.  Semantic mIoU averages
per-class IoU over the semantic classes (empty excluded); classes absent
from both prediction and ground truth are left out of the mean.  Ignored
voxels are excluded everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError
from .masking import IGNORE_LABEL


@dataclass
class MetricsReport:
    sc_iou: float
    sc_precision: float
    sc_recall: float
    per_class_iou: dict[int, float] = field(default_factory=dict)
    ssc_miou: float = 0.0

    def to_dict(self) -> dict:
        return {
            "sc_iou": self.sc_iou,
            "sc_precision": self.sc_precision,
            "sc_recall": self.sc_recall,
            "per_class_iou": {str(k): v for k, v in self.per_class_iou.items()},
            "ssc_miou": self.ssc_miou,
        }


@dataclass
class MetricAccumulator:
    """Streaming confusion counts across scenes (SSCNet-style aggregation)."""

    num_classes: int  # semantic classes, empty excluded
    confusion: np.ndarray = None  # (C+1, C+1) gt x pred
    sc_tp: int = 0
    sc_fp: int = 0
    sc_fn: int = 0
    sc_tn: int = 0

    def __post_init__(self):
        n = self.num_classes + 1
        if self.confusion is None:
            self.confusion = np.zeros((n, n), dtype=np.int64)

    def add(self, pred: np.ndarray, gt: np.ndarray,
            ignore_label: int = IGNORE_LABEL) -> None:
        pred = np.asarray(pred).ravel()
        gt = np.asarray(gt).ravel()
        if pred.shape != gt.shape:
            raise ContractViolationError("prediction and ground truth sizes differ")
        keep = gt != ignore_label
        pred, gt = pred[keep], gt[keep]
        n = self.num_classes + 1
        if pred.size and (pred.max() >= n or pred.min() < 0):
            raise ContractViolationError("prediction labels out of class range")
        self.confusion += np.bincount(
            gt.astype(np.int64) * n + pred.astype(np.int64), minlength=n * n
        ).reshape(n, n)
        occ_p, occ_g = pred != 0, gt != 0
        self.sc_tp += int(np.sum(occ_p & occ_g))
        self.sc_fp += int(np.sum(occ_p & ~occ_g))
        self.sc_fn += int(np.sum(~occ_p & occ_g))
        self.sc_tn += int(np.sum(~occ_p & ~occ_g))

    def report(self) -> MetricsReport:
        def ratio(num, den):
            return num / den if den > 0 else 1.0

        per_class = {}
        ious = []
        for c in range(1, self.num_classes + 1):
            tp = self.confusion[c, c]
            fp = self.confusion[:, c].sum() - tp
            fn = self.confusion[c, :].sum() - tp
            union = tp + fp + fn
            if union > 0:
                iou = float(tp / union)
                per_class[c] = iou
                ious.append(iou)
        return MetricsReport(
            sc_iou=float(ratio(self.sc_tp, self.sc_tp + self.sc_fp + self.sc_fn)),
            sc_precision=float(ratio(self.sc_tp, self.sc_tp + self.sc_fp)),
            sc_recall=float(ratio(self.sc_tp, self.sc_tp + self.sc_fn)),
            per_class_iou=per_class,
            ssc_miou=float(np.mean(ious)) if ious else 1.0,
        )


def evaluate_grids(pred: np.ndarray, gt: np.ndarray, num_classes: int,
                   ignore_label: int = IGNORE_LABEL) -> MetricsReport:
    """Metrics of one predicted label grid against its ground truth."""
    acc = MetricAccumulator(num_classes)
    acc.add(pred, gt, ignore_label)
    return acc.report()


def render_report(report: MetricsReport, class_names: dict[int, str] | None = None,
                  title: str = "metrics") -> str:
    """Aligned plain-text table of one report."""
    rows = [
        ("sc_iou", report.sc_iou),
        ("sc_precision", report.sc_precision),
        ("sc_recall", report.sc_recall),
    ]
    for c, v in sorted(report.per_class_iou.items()):
        name = class_names.get(c, f"class_{c}") if class_names else f"class_{c}"
        rows.append((f"iou[{name}]", v))
    rows.append(("ssc_miou", report.ssc_miou))
    width = max(len(k) for k, _ in rows)
    lines = [f"== {title} =="]
    lines += [f"{k:<{width}}  {v:8.4f}" for k, v in rows]
    return "\n".join(lines)
