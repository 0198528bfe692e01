"""Command-line entry point.

Subcommands: simulate, collect, rerun, colormap, report, metrics.
Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import pngio
from .experiment import (
    ConfigError,
    ExperimentConfig,
    build_experiment_stack,
    correlation_report,
    correlations_to_csv,
    measure_alignment_metrics,
    metrics_to_csv,
    parse_config,
    run_experiment,
    summary_text,
    transcript_to_csv,
    TranscriptRow,
)
from .observation import Observation, SceneRef
from .pipeline import collect_unsuccessful, dataset_from_json, dataset_to_json, rerun
from .plots import plot_colormap
from .policy import PolicyConfig, build_policy, infer
from .render import render_topdown
from .rewriting import colormap_to_csv
from .scene import TASK_KINDS, TaskSpec
from .scoring import score
from .actions import apply_action


def _load_config(path: str | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    return parse_config(Path(path).read_text())


def _bare_policy(config: ExperimentConfig):
    return build_policy(
        config=PolicyConfig(
            match_tolerance=config.match_tolerance, fallback_seed=config.fallback_seed
        )
    )


def _cmd_simulate(args) -> int:
    config = _load_config(args.config)
    policy = _bare_policy(config) if args.policy else None
    ref = SceneRef(args.task, args.split, args.seed)
    scene = ref.regenerate()
    image = render_topdown(scene)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pngio.save_rgb(out / "rgb.png", image.rgb)
    pngio.save_depth(out / "depth.png", image.depth)
    print(f"instruction: {scene.instruction.raw}")
    print(f"objects: {len(scene.objects)}  background: {scene.background}")
    if policy is not None:
        obs = Observation(image, scene.instruction, ref)
        action = infer(policy, obs)
        after, outcome = apply_action(scene, action)
        print(
            f"action: pick=({action.pick.row},{action.pick.col}) "
            f"place=({action.place.row},{action.place.col}) outcome={outcome.value} "
            f"reward={score(after):g}"
        )
    print(f"wrote {out / 'rgb.png'} and {out / 'depth.png'}")
    return 0


def _cmd_collect(args) -> int:
    config = _load_config(args.config)
    policy = _bare_policy(config)
    task = TaskSpec(args.task, args.split)
    n = args.n if args.n is not None else config.n_variations
    seed = args.seed if args.seed is not None else config.master_seed
    ds = collect_unsuccessful(policy, task, n, seed, config.p_exec)
    Path(args.out).write_text(dataset_to_json(ds))
    print(f"{len(ds)} / {n} episodes failed; dataset written to {args.out}")
    return 0


def _cmd_rerun(args) -> int:
    config = _load_config(args.config)
    policy, _cm, _enc, _seen, _target, cfg = build_experiment_stack(config)
    ds = dataset_from_json(Path(args.dataset).read_text())
    results = rerun(ds, args.method, cfg, policy)
    rows = [
        TranscriptRow(
            task=ds.task.kind,
            split=ds.task.split,
            method=args.method,
            seed=ep.scene_ref.seed,
            stage=res.stage.value,
            baseline_reward=ep.reward,
            rewrite_reward=res.reward,
        )
        for ep, (_, res) in zip(ds.episodes, results)
    ]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(transcript_to_csv(rows))
    recovered = sum(r.rewrite_reward == 1.0 for r in rows)
    print(f"recovered {recovered} / {len(rows)}; transcript written to {out}")
    return 0


def _cmd_colormap(args) -> int:
    config = _load_config(args.config)
    if args.trials is not None:
        config = replace(config, colormap_trials=args.trials)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    _policy, colormap, *_ = build_experiment_stack(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "colormap.csv").write_text(colormap_to_csv(colormap))
    plot_colormap(colormap, out / "colormap.png")
    print(f"wrote {out / 'colormap.csv'} and {out / 'colormap.png'}")
    return 0


def _cmd_report(args) -> int:
    config = _load_config(args.config)
    report = run_experiment(config, args.out)
    print(summary_text(report), end="")
    print(f"artifacts in {args.out}")
    return 0


def _cmd_metrics(args) -> int:
    config = _load_config(args.config)
    if args.candidates:
        config = replace(config, metrics_candidates=tuple(args.candidates))
    policy, _cm, _enc, _seen, _target, cfg = build_experiment_stack(config)
    task = TaskSpec("pack-object", "unseen")
    ds = collect_unsuccessful(policy, task, config.n_variations, config.master_seed, config.p_exec)
    rows = measure_alignment_metrics(config, config.metrics_candidates, ds, cfg, policy)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.csv").write_text(metrics_to_csv(rows))
    if len(rows) >= 3:
        (out / "correlations.csv").write_text(correlations_to_csv(correlation_report(rows)))
    print(f"wrote metrics for {len(rows)} candidates to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="synthobs")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render one episode and dump PNGs")
    p.add_argument("--task", choices=TASK_KINDS, required=True)
    p.add_argument("--split", choices=("seen", "unseen"), default="seen")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--policy", action="store_true", help="also run the policy on the episode")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("collect", help="collect the unsuccessful-episode dataset")
    p.add_argument("--task", choices=TASK_KINDS, required=True)
    p.add_argument("--split", choices=("seen", "unseen"), default="unseen")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_collect)

    p = sub.add_parser("rerun", help="rewrite and re-execute a collected dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--method", choices=("A", "B", "C"), default="C")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_rerun)

    p = sub.add_parser("colormap", help="build the pick/place color success map")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_colormap)

    p = sub.add_parser("report", help="run the full experiment and write reports")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("metrics", help="edit-alignment metrics vs task success")
    p.add_argument("--candidates", nargs="*")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
