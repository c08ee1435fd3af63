"""Command-line interface.

Subcommands: train, eval, profile, perturb-eval, gen-scenes.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ExperimentConfig, load_config
from .metrics import render_report
from .profiling import profile, render_profile
from .scenes import build_dataset, generate_scene, load_dataset, save_dataset
from .train import (
    CLASS_NAMES,
    evaluate,
    load_model,
    render_robustness,
    robustness_report,
    train,
)


def _add_config_arg(parser, required=True):
    parser.add_argument("--config", required=required, help="config file path")


def cmd_train(args) -> int:
    config = load_config(args.config)
    _, report, _ = train(config, args.out, resume_from=args.resume)
    print(render_report(report, CLASS_NAMES, "eval (refined)"))
    print(f"checkpoint written to {Path(args.out) / 'checkpoint.bin'}")
    return 0


def cmd_eval(args) -> int:
    scenes = load_dataset(args.scenes)
    report = evaluate(args.checkpoint, scenes)
    print(render_report(report, CLASS_NAMES, "eval (refined)"))
    if args.out:
        Path(args.out).write_text(json.dumps(report.to_dict()) + "\n")
    return 0


def cmd_profile(args) -> int:
    config = load_config(args.config)
    report = profile(config, args.occupancy)
    print(render_profile(report))
    return 0


def cmd_perturb_eval(args) -> int:
    model = load_model(args.checkpoint)
    if args.scenes:
        scenes = load_dataset(args.scenes)
    else:
        scenes = build_dataset(model.config, "eval")
    kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    levels = [l.strip() for l in args.levels.split(",") if l.strip()]
    rows = robustness_report(model, scenes, kinds, levels)
    print(render_robustness(rows))
    return 0


def cmd_gen_scenes(args) -> int:
    config = load_config(args.config) if args.config else ExperimentConfig()
    samples = [
        generate_scene([args.seed, 0, i], config) for i in range(args.count)
    ]
    save_dataset(samples, args.out)
    print(f"wrote {len(samples)} scenes to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voxssc",
        description="sparse voxel semantic scene completion harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config")
    _add_config_arg(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--resume", default=None, help="checkpoint to resume from")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on scene files")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scenes", required=True, help="directory of scene dirs")
    p.add_argument("--out", default=None, help="optional JSON report path")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("profile", help="analytic MAC report")
    _add_config_arg(p)
    p.add_argument("--occupancy", type=float, required=True,
                   help="mask occupancy fraction in [0, 1]")
    p.set_defaults(fn=cmd_profile)

    p = sub.add_parser("perturb-eval", help="robustness table under corruptions")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--kinds", required=True, help="comma list: dark,motion,bright,fog")
    p.add_argument("--levels", required=True, help="comma list: weak,strong")
    p.add_argument("--scenes", default=None, help="optional scene directory")
    p.set_defaults(fn=cmd_perturb_eval)

    p = sub.add_parser("gen-scenes", help="write synthetic scenes to disk")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True)
    _add_config_arg(p, required=False)
    p.set_defaults(fn=cmd_gen_scenes)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
