import numpy as np
import pytest

from voxssc.errors import ContractViolationError
from voxssc.metrics import MetricAccumulator, evaluate_grids, render_report


def test_perfect_prediction_all_ones(rng):
    gt = rng.integers(0, 6, size=(6, 6, 6))
    report = evaluate_grids(gt, gt, num_classes=5)
    assert report.sc_iou == 1.0
    assert report.sc_precision == 1.0
    assert report.sc_recall == 1.0
    assert report.ssc_miou == 1.0
    assert all(v == 1.0 for v in report.per_class_iou.values())


def test_all_empty_prediction_zero_recall(rng):
    gt = rng.integers(0, 6, size=(4, 4, 4))
    gt[0, 0, 0] = 1  # guarantee some occupancy
    pred = np.zeros_like(gt)
    report = evaluate_grids(pred, gt, num_classes=5)
    assert report.sc_recall == 0.0
    assert report.sc_iou == 0.0


def test_matches_confusion_matrix_oracle(rng):
    num_classes = 4
    gt = rng.integers(0, num_classes + 1, size=(6, 6, 6))
    pred = rng.integers(0, num_classes + 1, size=(6, 6, 6))
    gt[rng.random((6, 6, 6)) < 0.15] = 255
    report = evaluate_grids(pred, gt, num_classes)

    # hand-rolled confusion matrix
    cm = np.zeros((num_classes + 1, num_classes + 1), dtype=int)
    for idx in np.ndindex(6, 6, 6):
        if gt[idx] == 255:
            continue
        cm[gt[idx], pred[idx]] += 1
    for c, iou in report.per_class_iou.items():
        tp = cm[c, c]
        union = cm[c, :].sum() + cm[:, c].sum() - tp
        assert np.isclose(iou, tp / union)
    occ_tp = cm[1:, 1:].sum()
    occ_fp = cm[0, 1:].sum()
    occ_fn = cm[1:, 0].sum()
    assert np.isclose(report.sc_iou, occ_tp / (occ_tp + occ_fp + occ_fn))
    assert np.isclose(report.sc_precision, occ_tp / (occ_tp + occ_fp))
    assert np.isclose(report.sc_recall, occ_tp / (occ_tp + occ_fn))


def test_ignored_voxels_do_not_affect_metrics(rng):
    gt = rng.integers(0, 4, size=(5, 5, 5))
    pred = rng.integers(0, 4, size=(5, 5, 5))
    base = evaluate_grids(pred, gt, 3)
    gt2 = gt.copy()
    gt2[2, 2, 2] = 255
    pred2 = pred.copy()
    pred2[2, 2, 2] = (pred[2, 2, 2] + 1) % 4  # change only the ignored voxel
    after = evaluate_grids(pred2, gt2, 3)
    # removing one voxel changes counts, but flipping the ignored one must not
    again = evaluate_grids(pred, gt2, 3)
    assert after.to_dict() == again.to_dict()
    assert base.sc_iou >= 0  # sanity


def test_absent_classes_excluded_from_miou():
    gt = np.zeros((3, 3, 3), dtype=int)
    gt[0, 0, 0] = 1
    pred = gt.copy()
    report = evaluate_grids(pred, gt, num_classes=5)
    assert set(report.per_class_iou) == {1}
    assert report.ssc_miou == 1.0


def test_values_in_unit_interval(rng):
    for _ in range(10):
        gt = rng.integers(0, 5, size=(4, 4, 4))
        pred = rng.integers(0, 5, size=(4, 4, 4))
        r = evaluate_grids(pred, gt, 4)
        vals = [r.sc_iou, r.sc_precision, r.sc_recall, r.ssc_miou,
                *r.per_class_iou.values()]
        assert all(0.0 <= v <= 1.0 for v in vals)


def test_out_of_range_prediction_rejected():
    acc = MetricAccumulator(3)
    with pytest.raises(ContractViolationError):
        acc.add(np.array([7]), np.array([1]))


def test_accumulator_aggregates_like_concatenation(rng):
    a_gt = rng.integers(0, 4, size=(4, 4, 4))
    a_pred = rng.integers(0, 4, size=(4, 4, 4))
    b_gt = rng.integers(0, 4, size=(4, 4, 4))
    b_pred = rng.integers(0, 4, size=(4, 4, 4))
    acc = MetricAccumulator(3)
    acc.add(a_pred, a_gt)
    acc.add(b_pred, b_gt)
    joint = evaluate_grids(np.concatenate([a_pred.ravel(), b_pred.ravel()]),
                           np.concatenate([a_gt.ravel(), b_gt.ravel()]), 3)
    assert acc.report().to_dict() == joint.to_dict()


def test_render_report_is_aligned_text(rng):
    gt = rng.integers(0, 4, size=(4, 4, 4))
    text = render_report(evaluate_grids(gt, gt, 3), title="t")
    lines = text.splitlines()
    assert lines[0] == "== t =="
    assert any("ssc_miou" in line for line in lines)
