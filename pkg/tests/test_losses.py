import numpy as np
import pytest

from conftest import finite_diff_check
from voxssc import autodiff as ad
from voxssc.errors import UndefinedLossError
from voxssc.losses import (
    cross_entropy,
    sequential_mask_loss,
    sequential_mssc_loss,
    total_loss,
    weighted_bce,
)


def const_logits(tape, arr):
    return tape.const(arr)


def test_ce_perfect_prediction_near_zero(rng):
    labels = rng.integers(0, 4, size=(3, 3, 3))
    logits = np.zeros((3, 3, 3, 4))
    np.put_along_axis(logits, labels[..., None], 30.0, axis=-1)
    tape = ad.Tape()
    loss = cross_entropy(const_logits(tape, logits), labels)
    assert float(loss.value) < 1e-9


def test_ce_uniform_logits_log_num_classes():
    labels = np.zeros((2, 2, 2), dtype=np.int64)
    logits = np.zeros((2, 2, 2, 12))
    tape = ad.Tape()
    loss = cross_entropy(const_logits(tape, logits), labels)
    assert np.isclose(float(loss.value), np.log(12.0), atol=1e-12)


def test_ce_matches_naive_loop(rng):
    labels = rng.integers(0, 3, size=(3, 2, 3)).astype(np.int64)
    labels[0, 0, 0] = 255
    logits = rng.standard_normal((3, 2, 3, 3))
    tape = ad.Tape()
    loss = float(cross_entropy(const_logits(tape, logits), labels).value)
    total, count = 0.0, 0
    for idx in np.ndindex(3, 2, 3):
        if labels[idx] == 255:
            continue
        row = logits[idx]
        p = np.exp(row) / np.exp(row).sum()
        total += -np.log(p[labels[idx]])
        count += 1
    assert np.isclose(loss, total / count, atol=1e-10)


def test_ce_all_ignored_raises():
    labels = np.full((2, 2, 2), 255, dtype=np.int64)
    tape = ad.Tape()
    with pytest.raises(UndefinedLossError):
        cross_entropy(const_logits(tape, np.zeros((2, 2, 2, 3))), labels)


def test_ce_ignored_voxels_contribute_nothing(rng):
    labels = rng.integers(0, 3, size=(3, 3, 3)).astype(np.int64)
    labels[1, 1, 1] = 255
    logits = rng.standard_normal((3, 3, 3, 3))
    tape = ad.Tape()
    base = float(cross_entropy(const_logits(tape, logits), labels).value)
    perturbed = logits.copy()
    perturbed[1, 1, 1] = 100.0  # only the ignored voxel changes
    tape2 = ad.Tape()
    after = float(cross_entropy(const_logits(tape2, perturbed), labels).value)
    assert base == after


def test_sequential_mssc_weights_exact(rng):
    labels = rng.integers(0, 3, size=(2, 2, 2)).astype(np.int64)
    preds_np = [rng.standard_normal((2, 2, 2, 3)) for _ in range(3)]
    tape = ad.Tape()
    preds = [const_logits(tape, p) for p in preds_np]
    loss, stages = sequential_mssc_loss(preds, labels, gamma=0.8)
    direct = sum(0.8**i * stages[i] for i in range(3))
    assert abs(float(loss.value) - direct) < 1e-12
    weights = [0.8**i for i in range(3)]
    assert weights == [1.0, 0.8, 0.8**2]


def test_sequential_mssc_single_stage_reduces_to_ce(rng):
    labels = rng.integers(0, 3, size=(2, 2, 2)).astype(np.int64)
    logits = rng.standard_normal((2, 2, 2, 3))
    tape = ad.Tape()
    loss, _ = sequential_mssc_loss([const_logits(tape, logits)], labels)
    tape2 = ad.Tape()
    ce = cross_entropy(const_logits(tape2, logits), labels)
    assert np.isclose(float(loss.value), float(ce.value), atol=1e-15)


def test_wbce_perfect_prediction(rng):
    gt = rng.random((4, 4, 4)) < 0.5
    p = np.where(gt, 1.0 - 1e-13, 1e-13)
    tape = ad.Tape()
    loss = weighted_bce(tape.const(p), gt)
    assert float(loss.value) < 1e-9


def test_wbce_coin_flip_balanced_is_log2():
    gt = np.zeros((2, 2, 2), dtype=bool)
    gt[:1] = True  # exactly half positive
    p = np.full((2, 2, 2), 0.5)
    tape = ad.Tape()
    loss = weighted_bce(tape.const(p), gt)
    assert np.isclose(float(loss.value), np.log(2.0), atol=1e-12)


def test_wbce_imbalanced_matches_closed_form(rng):
    gt = np.zeros(100, dtype=bool)
    gt[:10] = True  # 10% / 90%
    p = rng.uniform(0.2, 0.8, 100)
    tape = ad.Tape()
    loss = float(weighted_bce(tape.const(p.reshape(10, 10, 1)), gt.reshape(10, 10, 1)).value)
    w_pos, w_neg = 100 / (2 * 10), 100 / (2 * 90)
    expected = (w_pos * -np.log(p[:10]).sum() + w_neg * -np.log(1 - p[10:]).sum()) / 100
    assert np.isclose(loss, expected, atol=1e-12)


def test_wbce_degenerate_falls_back_to_unweighted(rng):
    gt = np.ones((3, 3, 3), dtype=bool)
    p = rng.uniform(0.3, 0.9, (3, 3, 3))
    tape = ad.Tape()
    loss = float(weighted_bce(tape.const(p), gt).value)
    assert np.isclose(loss, float(np.mean(-np.log(p))), atol=1e-12)


def test_sequential_mask_loss_weights(rng):
    gt = rng.random((3, 3, 3)) < 0.5
    # N = 3: weights gamma^(N-i) for i = 1, 2 -> 0.36, 0.6
    probs_np = [rng.uniform(0.1, 0.9, (3, 3, 3)) for _ in range(2)]
    tape = ad.Tape()
    probs = [tape.const(p) for p in probs_np]
    loss, stages = sequential_mask_loss(probs, gt, n_iterations=3, gamma=0.6)
    direct = 0.6**2 * stages[0] + 0.6**1 * stages[1]
    assert abs(float(loss.value) - direct) < 1e-12


def test_sequential_mask_loss_single_iteration_weight(rng):
    gt = rng.random((3, 3, 3)) < 0.5
    prob = rng.uniform(0.1, 0.9, (3, 3, 3))
    tape = ad.Tape()
    loss, stages = sequential_mask_loss([tape.const(prob)], gt, n_iterations=2,
                                        gamma=0.6)
    assert np.isclose(float(loss.value), 0.6 * stages[0], atol=1e-15)


def test_sequential_mask_loss_empty_sum():
    loss, stages = sequential_mask_loss([], np.zeros((2, 2, 2), dtype=bool), 1)
    assert loss is None and stages == []


def test_total_loss_breakdown_and_hooks(rng):
    labels = rng.integers(0, 3, size=(4, 4, 4)).astype(np.int64)
    gt_mask = labels != 0
    tape = ad.Tape()
    preds = [tape.const(rng.standard_normal((4, 4, 4, 3))) for _ in range(3)]
    probs = [tape.const(rng.uniform(0.1, 0.9, (4, 4, 4)))]
    total, bd = total_loss(preds, probs, labels, gt_mask, 2, tape)
    assert abs(bd.total - (bd.l_mssc + bd.l_mask + bd.l_scal)) < 1e-12
    assert bd.l_mssc >= 0 and bd.l_mask >= 0 and bd.l_scal == 0.0

    tape2 = ad.Tape()
    preds2 = [tape2.const(p.value) for p in preds]
    probs2 = [tape2.const(p.value) for p in probs]
    hook = lambda ps, lbls: tape2.const(1.0)
    total2, bd2 = total_loss(preds2, probs2, labels, gt_mask, 2, tape2,
                             scal_hook=hook)
    assert np.isclose(bd2.total, bd.total + 1.0, atol=1e-12)


def test_total_loss_gradients_reach_every_stage(rng):
    labels = rng.integers(0, 3, size=(3, 3, 3)).astype(np.int64)
    gt_mask = labels != 0
    store = ad.ParameterStore()
    stage_params = [store.add(f"s{i}", rng.standard_normal((3, 3, 3, 3)))
                    for i in range(3)]
    tape = ad.Tape()
    preds = [p.leaf(tape) for p in stage_params]
    total, _ = total_loss(preds, [], labels, gt_mask, 2, tape)
    tape.backward(total)
    for p in stage_params:
        assert np.abs(p.grad).max() > 0


def test_loss_gradients_match_fd(rng):
    labels = rng.integers(0, 3, size=(3, 3, 3)).astype(np.int64)
    gt_mask = labels != 0
    store = ad.ParameterStore()
    logit_p = store.add("logits", rng.standard_normal((3, 3, 3, 3)))
    raw_p = store.add("raw", rng.standard_normal((3, 3, 3)))

    def make_loss():
        tape = ad.Tape()
        ce = cross_entropy(logit_p.leaf(tape), labels)
        probs = ad.sigmoid(raw_p.leaf(tape))
        bce = weighted_bce(probs, gt_mask)
        return tape, ce + bce

    finite_diff_check(make_loss, [logit_p, raw_p], rng=rng, max_entries=8)
