import json

import numpy as np
import pytest

from voxssc.autodiff import poly_lr
from voxssc.checkpoint import load_checkpoint, save_checkpoint
from voxssc.config import parse_config, save_config, toy_config
from voxssc.errors import ConfigError, ContractViolationError, NonFiniteLossError
from voxssc.model import build_model
from voxssc.scenes import build_dataset
from voxssc.train import evaluate, evaluate_model, train, training_step

TINY = toy_config(train_scenes=3, eval_scenes=2, epochs=1)


def cell_param_count(model):
    cell = model.cells[0]
    return sum(p.value.size for p in cell._all())


def test_tied_parameter_count_invariant_across_iterations():
    counts = {
        n: build_model(TINY.with_overrides(iterations=n)).params.num_values()
        for n in (1, 2, 3)
    }
    assert counts[1] == counts[2] == counts[3]


def test_untied_parameter_count_adds_cells():
    tied = build_model(TINY.with_overrides(iterations=3, tied_weights=True))
    untied = build_model(TINY.with_overrides(iterations=3, tied_weights=False))
    assert untied.params.num_values() == (
        tied.params.num_values() + 2 * cell_param_count(tied)
    )


def test_untied_equals_tied_before_any_training():
    scenes = build_dataset(TINY, "eval")
    tied = build_model(TINY.with_overrides(tied_weights=True))
    untied = build_model(TINY.with_overrides(tied_weights=False))
    prep_t = tied.prepare(scenes[0])
    prep_u = untied.prepare(scenes[0])
    out_t = tied.forward(prep_t)
    out_u = untied.forward(prep_u)
    assert np.array_equal(out_t.final_logits.value, out_u.final_logits.value)


def test_forward_produces_finite_logits_of_right_shape():
    scenes = build_dataset(TINY, "eval")
    model = build_model(TINY)
    out = model.forward(model.prepare(scenes[0]))
    dims = TINY.grid_dims
    assert out.final_logits.value.shape == (*dims, TINY.classes + 1)
    assert np.isfinite(out.final_logits.value).all()
    assert len(out.predictions) == TINY.iterations + 1
    assert len(out.mask_probs) == max(0, TINY.iterations - 1)


def test_refine_sequence_lengths_for_two_iterations():
    cfg = TINY.with_overrides(iterations=2)
    scenes = build_dataset(cfg, "eval")
    model = build_model(cfg)
    out = model.forward(model.prepare(scenes[0]))
    assert len(out.predictions) == 3  # coarse + two refinements
    assert len(out.mask_probs) == 1  # one mask update
    assert len(out.masks) == 2  # m_0 and m_1


def test_single_iteration_has_no_mask_update():
    cfg = TINY.with_overrides(iterations=1)
    scenes = build_dataset(cfg, "eval")
    model = build_model(cfg)
    out = model.forward(model.prepare(scenes[0]))
    assert len(out.predictions) == 2
    assert out.mask_probs == []


def test_scene_grid_mismatch_rejected():
    other = toy_config(grid_x=32, grid_y=16, grid_z=32)
    scenes = build_dataset(other, "eval")
    model = build_model(TINY)
    with pytest.raises(ContractViolationError):
        model.prepare(scenes[0])


def test_training_reduces_loss():
    cfg = toy_config(train_scenes=4, eval_scenes=2, epochs=3)
    scenes = build_dataset(cfg, "train")
    model = build_model(cfg)
    preps = [model.prepare(s) for s in scenes]
    first = training_step(model, preps[0], 0.05, np.random.default_rng(0)).total
    for step in range(1, 12):
        last = training_step(model, preps[step % 4], 0.05,
                             np.random.default_rng(step)).total
    assert last < first


def test_poly_lr_final_step_near_zero():
    assert poly_lr(0.1, 0, 400) == 0.1
    assert poly_lr(0.1, 399, 400) < 1e-3


def test_non_finite_loss_aborts():
    scenes = build_dataset(TINY, "train")
    model = build_model(TINY)
    prep = model.prepare(scenes[0])
    model.params["head.w"].value[...] = np.nan
    with pytest.raises(NonFiniteLossError):
        training_step(model, prep, 0.1, np.random.default_rng(0))


def test_train_is_bitwise_reproducible(tmp_path):
    _, report_a, hist_a = train(TINY, tmp_path / "a")
    _, report_b, hist_b = train(TINY, tmp_path / "b")
    bytes_a = (tmp_path / "a" / "checkpoint.bin").read_bytes()
    bytes_b = (tmp_path / "b" / "checkpoint.bin").read_bytes()
    assert bytes_a == bytes_b
    assert report_a.to_dict() == report_b.to_dict()
    assert hist_a == hist_b


def test_resume_reproduces_uninterrupted_run(tmp_path):
    cfg = TINY.with_overrides(epochs=2)
    train(cfg, tmp_path / "full")
    train(cfg, tmp_path / "partial", stop_after_step=4)  # mid-epoch stop
    train(cfg, tmp_path / "resumed",
          resume_from=tmp_path / "partial" / "checkpoint.bin")
    a = (tmp_path / "full" / "checkpoint.bin").read_bytes()
    b = (tmp_path / "resumed" / "checkpoint.bin").read_bytes()
    assert a == b


def test_resume_rejects_mismatched_config(tmp_path):
    train(TINY, tmp_path / "run", stop_after_step=1)
    other = TINY.with_overrides(lr=0.01)
    with pytest.raises(ConfigError):
        train(other, tmp_path / "bad",
              resume_from=tmp_path / "run" / "checkpoint.bin")


def test_train_writes_jsonl_and_reports(tmp_path):
    train(TINY, tmp_path / "run")
    log = (tmp_path / "run" / "train_log.jsonl").read_text().strip().splitlines()
    assert len(log) == 3  # 3 scenes x 1 epoch
    record = json.loads(log[0])
    assert set(record) == {"step", "l_mssc", "l_mask", "l_scal", "total"}
    assert (tmp_path / "run" / "report.txt").exists()
    metrics = (tmp_path / "run" / "metrics.jsonl").read_text().splitlines()
    assert len(metrics) == 2


def test_evaluate_from_checkpoint(tmp_path):
    model, report, _ = train(TINY, tmp_path / "run")
    scenes = build_dataset(TINY, "eval")
    again = evaluate(tmp_path / "run" / "checkpoint.bin", scenes)
    assert again.to_dict() == report.to_dict()


def test_checkpoint_roundtrip(tmp_path):
    model = build_model(TINY)
    path = tmp_path / "ckpt.bin"
    save_checkpoint(path, model.params, {"config": TINY.to_text(), "step": 0})
    state, meta = load_checkpoint(path)
    assert meta["step"] == 0
    for p in model.params:
        assert np.array_equal(state[p.name], p.value)
    raw = path.read_bytes()
    assert raw[:4] == b"VXCP"


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE" + b"\0" * 100)
    with pytest.raises(ContractViolationError):
        load_checkpoint(path)


def test_config_roundtrip(tmp_path):
    cfg = toy_config(lr=0.05, projection="sight", mask_update=False)
    path = tmp_path / "c.cfg"
    save_config(cfg, path)
    assert parse_config(path.read_text()) == cfg


def test_config_unknown_key_rejected():
    with pytest.raises(ConfigError):
        parse_config("grid_x = 16\nnot_a_key = 3\n")


def test_config_bad_values_rejected():
    with pytest.raises(ConfigError):
        parse_config("lr = fast\n")
    with pytest.raises(ConfigError):
        parse_config("mask_update = maybe\n")
    with pytest.raises(ConfigError):
        parse_config("projection = orthographic\n")
    with pytest.raises(ConfigError):
        parse_config("grid_x = 13\n")
    with pytest.raises(ConfigError):
        parse_config("lr = 0.1\nlr = 0.2\n")


def test_config_comments_and_spacing():
    cfg = parse_config("# comment\n  grid_x = 16 # inline\n\ngrid_y=8\ngrid_z = 16\n")
    assert (cfg.grid_x, cfg.grid_y, cfg.grid_z) == (16, 8, 16)


def test_evaluate_model_coarse_vs_refined_shapes(tmp_path):
    model, _, _ = train(TINY, tmp_path / "m")
    scenes = build_dataset(TINY, "eval")
    preps = [model.prepare(s) for s in scenes]
    refined, coarse = evaluate_model(model, preps)
    for rep in (refined, coarse):
        d = rep.to_dict()
        assert 0.0 <= d["sc_iou"] <= 1.0
        assert 0.0 <= d["ssc_miou"] <= 1.0
