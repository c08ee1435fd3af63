"""Training loop, evaluation driver, and robustness report.

SGD with a polynomial learning-rate schedule over the full sequential
objective.  Every run is a pure function of the config: scenes, parameter
initialization, shuffling, and dropout all derive from the config seed, so
two runs with the same config produce bitwise-identical checkpoints, and a
resumed run reproduces the uninterrupted one.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .autodiff import Tape, poly_lr, sgd_step
from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, parse_config
from .errors import ConfigError, NonFiniteLossError
from .losses import total_loss
from .metrics import MetricAccumulator, MetricsReport, render_report
from .model import PreparedScene, SceneCompletionModel, build_model
from .perturb import perturb
from .scenes import SceneSample, build_dataset

CLASS_NAMES = {1: "floor", 2: "wall", 3: "box_a", 4: "box_b", 5: "box_c"}


def training_step(model: SceneCompletionModel, prep: PreparedScene, lr: float,
                  rng: np.random.Generator):
    cfg = model.config
    tape = Tape()
    out = model.forward(prep, tape, training=True, rng=rng)
    loss, breakdown = total_loss(
        out.predictions, out.mask_probs, prep.labels, prep.gt_mask,
        cfg.iterations, tape, cfg.gamma_mssc, cfg.gamma_mask, cfg.mask_loss,
    )
    if not np.isfinite(loss.value):
        raise NonFiniteLossError(f"loss became non-finite: {breakdown}")
    tape.backward(loss)
    sgd_step(model.params, lr)
    return breakdown


def train(config: ExperimentConfig, out_dir: str | Path,
          resume_from: str | Path | None = None,
          train_set: list[SceneSample] | None = None,
          eval_set: list[SceneSample] | None = None,
          stop_after_step: int | None = None):
    """Train a model; returns (model, final MetricsReport, history list).

    `stop_after_step` bounds the absolute step count so a run can be
    interrupted and later resumed from its final checkpoint.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    model = build_model(config)

    start_step = 0
    if resume_from is not None:
        state, meta = load_checkpoint(resume_from)
        if meta.get("config") != config.to_text():
            raise ConfigError("checkpoint config does not match the requested config")
        model.params.load_state(state)
        start_step = int(meta.get("step", 0))

    train_scenes = train_set if train_set is not None else build_dataset(config, "train")
    eval_scenes = eval_set if eval_set is not None else build_dataset(config, "eval")
    train_preps = [model.prepare(s) for s in train_scenes]
    eval_preps = [model.prepare(s) for s in eval_scenes]

    per_epoch = len(train_preps)
    total_steps = config.epochs * per_epoch
    end_step = total_steps if stop_after_step is None else min(total_steps,
                                                               stop_after_step)
    history = []
    log_path = out / "train_log.jsonl"
    mode = "a" if resume_from is not None else "w"
    order, cur_epoch = None, -1
    with open(log_path, mode) as log:
        for step in range(start_step, end_step):
            epoch = step // per_epoch
            if epoch != cur_epoch:
                order = np.random.default_rng([config.seed, 3, epoch]).permutation(per_epoch)
                cur_epoch = epoch
            idx = order[step % per_epoch]
            lr = poly_lr(config.lr, step, total_steps, config.poly_power)
            rng = np.random.default_rng([config.seed, 2, step])
            try:
                breakdown = training_step(model, train_preps[idx], lr, rng)
            except NonFiniteLossError:
                log.write(json.dumps({"event": "abort", "step": step}) + "\n")
                raise
            record = breakdown.record(step)
            log.write(json.dumps(record) + "\n")
            history.append(record)
            if (step + 1) % per_epoch == 0:
                _save(model, out / "ckpt_last.bin", config, step + 1)

    ckpt_path = out / "checkpoint.bin"
    _save(model, ckpt_path, config, end_step)
    report, coarse_report = evaluate_model(model, eval_preps)
    (out / "metrics.jsonl").write_text(
        json.dumps({"split": "eval", "stage": "refined", **report.to_dict()}) + "\n"
        + json.dumps({"split": "eval", "stage": "coarse", **coarse_report.to_dict()}) + "\n"
    )
    (out / "report.txt").write_text(
        render_report(report, CLASS_NAMES, "refined") + "\n\n"
        + render_report(coarse_report, CLASS_NAMES, "coarse") + "\n"
    )
    return model, report, history


def _save(model: SceneCompletionModel, path: Path, config: ExperimentConfig, step: int):
    save_checkpoint(path, model.params, {"config": config.to_text(), "step": step})


def load_model(checkpoint_path: str | Path) -> SceneCompletionModel:
    state, meta = load_checkpoint(checkpoint_path)
    config = parse_config(meta["config"])
    model = build_model(config)
    model.params.load_state(state)
    return model


def evaluate_model(model: SceneCompletionModel,
                   preps: list[PreparedScene]) -> tuple[MetricsReport, MetricsReport]:
    """Aggregate eval metrics of the refined and the coarse predictions."""
    cfg = model.config
    refined_acc = MetricAccumulator(cfg.classes)
    coarse_acc = MetricAccumulator(cfg.classes)
    for prep in preps:
        coarse, refined = model.predict(prep)
        refined_acc.add(refined, prep.labels)
        coarse_acc.add(coarse, prep.labels)
    return refined_acc.report(), coarse_acc.report()


def evaluate(checkpoint_path: str | Path,
             scenes: list[SceneSample]) -> MetricsReport:
    """SSCNet-protocol metrics of a checkpoint's refined predictions."""
    model = load_model(checkpoint_path)
    preps = [model.prepare(s) for s in scenes]
    report, _ = evaluate_model(model, preps)
    return report


def robustness_report(model: SceneCompletionModel, scenes: list[SceneSample],
                      kinds, levels) -> list[dict]:
    """Coarse-vs-refined metrics under every (kind, level) corruption."""
    rows = []
    for kind in kinds:
        for level in levels:
            preps = [model.prepare(perturb(s, kind, level)) for s in scenes]
            refined, coarse = evaluate_model(model, preps)
            rows.append({
                "kind": kind,
                "level": level,
                "coarse_sc_iou": coarse.sc_iou,
                "coarse_miou": coarse.ssc_miou,
                "refined_sc_iou": refined.sc_iou,
                "refined_miou": refined.ssc_miou,
            })
    return rows


def render_robustness(rows: list[dict]) -> str:
    header = f"{'kind':<8} {'level':<7} {'coarse IoU':>11} {'refined IoU':>12} " \
             f"{'coarse mIoU':>12} {'refined mIoU':>13}"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r['kind']:<8} {r['level']:<7} {r['coarse_sc_iou']:>11.4f} "
            f"{r['refined_sc_iou']:>12.4f} {r['coarse_miou']:>12.4f} "
            f"{r['refined_miou']:>13.4f}"
        )
    return "\n".join(lines)
