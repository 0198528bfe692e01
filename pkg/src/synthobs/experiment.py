"""Experiment configuration, execution and report generation.

Reports are recomputable from the transcript CSV alone; re-running the same
config writes byte-identical CSVs.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

import numpy as np

from .geometry import footprint_kernel
from .grounding import GroundingConfig, frame_of
from .inpaint import EditMode, EditRequest, EditTarget, FidelityModel, inpaint
from .instructions import PACK_OBJECT, Instruction
from .metrics import fid_lite, mse, ssim
from .pipeline import (
    FAILURE_STAGES,
    PipelineConfig,
    UnsuccessfulDataset,
    collect_unsuccessful,
    rerun,
)
from .plots import plot_colormap, plot_semantic_heatmap
from .policy import PolicyConfig, build_policy
from .render import STRIPE_PX, RGBDImage
from .rewriting import TrigramEncoder, build_colormap, colormap_to_csv, rank_edit_quality
from .scene import PPU, PUT_BLOCK_IN_BOWL, TASK_KINDS, TaskSpec, default_palette, default_vocabulary
from .vocabulary import variant_rgb


class ConfigError(ValueError):
    pass


class ExperimentError(RuntimeError):
    pass


DEFAULT_METRIC_CANDIDATES = (
    "Spider-man figure",
    "green and white striped towel",
    "rhino figure",
    "Pepsi wild cherry box",
    "magnifying glass",
)


@dataclass(frozen=True)
class ExperimentConfig:
    tasks: tuple[str, ...] = TASK_KINDS
    methods: tuple[str, ...] = ("A", "B", "C")
    default_method: str = "C"
    n_variations: int = 100
    master_seed: int = 12345
    p_exec: float = 0.05
    colormap_trials: int = 10
    detection_threshold: float = 0.35
    miss_noise: float = 0.0
    misidentify_noise: float = 0.0
    noise_seed: int = 7
    min_frame_pixels: int = 900
    degradation_strength: float = 1.0
    variability: int = 3
    edit_order: str = "background-first"
    match_tolerance: float = 20.0
    fallback_seed: int = 977711
    metrics_candidates: tuple[str, ...] = DEFAULT_METRIC_CANDIDATES
    metrics_episodes: int = 20
    metrics_renders: int = 8

    def __post_init__(self):
        if self.n_variations < 1:
            raise ConfigError("n_variations must be >= 1")
        for t in self.tasks:
            if t not in TASK_KINDS:
                raise ConfigError(f"unknown task: {t!r}")
        for m in self.methods:
            if m not in ("A", "B", "C"):
                raise ConfigError(f"unknown method: {m!r}")
        if self.default_method not in self.methods:
            raise ConfigError("default_method must be one of methods")


_CONFIG_KEYS = {
    "experiment.tasks": ("tasks", lambda v: tuple(s.strip() for s in v.split(",") if s.strip())),
    "experiment.methods": ("methods", lambda v: tuple(s.strip() for s in v.split(",") if s.strip())),
    "experiment.default_method": ("default_method", str),
    "experiment.n_variations": ("n_variations", int),
    "experiment.master_seed": ("master_seed", int),
    "experiment.p_exec": ("p_exec", float),
    "experiment.colormap_trials": ("colormap_trials", int),
    "grounding.detection_threshold": ("detection_threshold", float),
    "grounding.miss_noise": ("miss_noise", float),
    "grounding.misidentify_noise": ("misidentify_noise", float),
    "grounding.noise_seed": ("noise_seed", int),
    "fidelity.min_frame_pixels": ("min_frame_pixels", int),
    "fidelity.degradation_strength": ("degradation_strength", float),
    "inpaint.variability": ("variability", int),
    "inpaint.edit_order": ("edit_order", str),
    "policy.match_tolerance": ("match_tolerance", float),
    "policy.fallback_seed": ("fallback_seed", int),
    "metrics.candidates": (
        "metrics_candidates",
        lambda v: tuple(s.strip() for s in v.split(",") if s.strip()),
    ),
    "metrics.episodes": ("metrics_episodes", int),
    "metrics.renders": ("metrics_renders", int),
}


def parse_config(text: str) -> ExperimentConfig:
    """Flat `section.key = value` config text."""
    overrides = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, conv = _CONFIG_KEYS[key]
        try:
            overrides[attr] = conv(value.strip())
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    return ExperimentConfig(**overrides)


def recovery_rate(failed_baseline: int, failed_roso: int) -> float:
    """Fraction of baseline failures recovered by the rewrite pipeline."""
    if failed_baseline <= 0:
        raise ValueError("recovery rate undefined for zero baseline failures")
    if not 0 <= failed_roso <= failed_baseline:
        raise ValueError("need 0 <= failed_roso <= failed_baseline")
    return (failed_baseline - failed_roso) / failed_baseline


def recovery_percent(failed_baseline: int, failed_roso: int) -> int:
    """Whole-percent recovery, rounded half-up (matches reported tables)."""
    rate = recovery_rate(failed_baseline, failed_roso)
    return int(Decimal(rate * 100).quantize(Decimal("1"), rounding=ROUND_HALF_UP))


def correlation_report(metric_rows: list[dict]) -> list[tuple[str, float | None]]:
    """Pearson r of each metric column against the success-rate column.

    Purely descriptive: degenerate columns report None ("undefined") and no
    threshold is applied anywhere.
    """
    if len(metric_rows) < 3:
        raise ValueError("need >= 3 rows for a correlation report")
    succ = np.array([r["success_rate"] for r in metric_rows], dtype=np.float64)
    out = []
    for name in ("mse", "ssim", "fid_lite"):
        x = np.array([r[name] for r in metric_rows], dtype=np.float64)
        sx = x.std()
        sy = succ.std()
        if sx == 0 or sy == 0:
            out.append((name, None))
            continue
        r = float(((x - x.mean()) * (succ - succ.mean())).mean() / (sx * sy))
        out.append((name, r))
    return out


@dataclass(frozen=True)
class TaskMethodRow:
    task: str
    method: str
    seen_failed: int
    unseen_failed: int
    rewrite_failed: int
    recovered: int
    recovery_pct: int | None
    stage_counts: dict


@dataclass(frozen=True)
class TranscriptRow:
    task: str
    split: str
    method: str
    seed: int
    stage: str
    baseline_reward: float
    rewrite_reward: float


@dataclass(frozen=True)
class Report:
    config: ExperimentConfig
    rows: tuple[TaskMethodRow, ...]
    transcript: tuple[TranscriptRow, ...]
    metric_rows: tuple[dict, ...]
    correlations: tuple[tuple[str, float | None], ...]


def _pipeline_config(config: ExperimentConfig, colormap, encoder, seen_instructions, target) -> PipelineConfig:
    return PipelineConfig(
        grounding=GroundingConfig(
            detection_threshold=config.detection_threshold,
            miss_noise=config.miss_noise,
            misidentify_noise=config.misidentify_noise,
            noise_seed=config.noise_seed,
        ),
        fidelity=FidelityModel(config.min_frame_pixels, config.degradation_strength),
        colormap=colormap,
        encoder=encoder,
        seen_instructions=seen_instructions,
        edit_quality_target=target,
        variability=config.variability,
        edit_order=config.edit_order,
        p_exec=config.p_exec,
    )


def build_experiment_stack(config: ExperimentConfig):
    """Policy, colormap, encoder, seen instruction set and pipeline config."""
    palette = default_palette()
    vocab = default_vocabulary()
    policy = build_policy(
        config=PolicyConfig(
            match_tolerance=config.match_tolerance, fallback_seed=config.fallback_seed
        )
    )
    seen_picks = [c.name for c in palette.seen]
    all_places = sorted({c.name for c in palette.seen} | {c.name for c in palette.unseen})
    # keep palette (file) order for deterministic tie-breaks
    all_places = [c.name for c in palette if c.name in set(all_places)]
    cm_seed = int(
        np.random.SeedSequence([config.master_seed, zlib.crc32(b"colormap")]).generate_state(
            1, np.uint64
        )[0]
    )
    colormap = build_colormap(policy, seen_picks, all_places, config.colormap_trials, cm_seed)
    encoder = TrigramEncoder()
    seen_instructions = tuple(
        Instruction(PACK_OBJECT, name, "brown box") for name in vocab.names("seen")
    )
    target = rank_edit_quality(
        vocab.names("seen"), alignment_scores={o.name: o.alignment for o in vocab.seen}
    )
    cfg = _pipeline_config(config, colormap, encoder, seen_instructions, target)
    return policy, colormap, encoder, seen_instructions, target, cfg


def _template_canvas(category: str, offset: tuple[int, int], palette, vocab) -> tuple[RGBDImage, np.ndarray]:
    """Small darkgray canvas holding one centered category footprint."""
    obj = vocab[category]
    kern = footprint_kernel(obj.footprint, PPU)
    kh, kw = kern.shape
    size = max(kh, kw) + 12
    mask = np.zeros((size, size), dtype=bool)
    r0 = (size - kh) // 2 + offset[0]
    c0 = (size - kw) // 2 + offset[1]
    mask[r0 : r0 + kh, c0 : c0 + kw] = kern
    rgb = np.empty((size, size, 3), dtype=np.uint8)
    rgb[:, :] = palette.rgb("darkgray")
    depth = np.zeros((size, size), dtype=np.float64)
    depth[mask] = obj.height
    return RGBDImage(rgb=rgb, depth=depth), mask


def _ideal_appearance(category: str, canvas: RGBDImage, mask: np.ndarray, vocab) -> np.ndarray:
    obj = vocab[category]
    rgb = canvas.rgb.copy()
    c1, c2 = variant_rgb(obj, 0)
    if obj.texture == "striped" and c2 is not None:
        origin = frame_of(mask).r0
        rows = np.arange(rgb.shape[0]) - origin
        band = ((rows // STRIPE_PX) % 2).astype(bool)
        layer = np.where(band[:, None, None], c2, c1)
        rgb[mask] = layer[mask]
    else:
        rgb[mask] = c1
    return rgb


def measure_alignment_metrics(
    config: ExperimentConfig, candidates, pack_dataset: UnsuccessfulDataset | None, base_cfg, policy
) -> list[dict]:
    """MSE/SSIM/FID-lite of generated edits vs trained appearance, plus the
    observed task success rate when rewriting everything to the candidate."""
    palette = default_palette()
    vocab = default_vocabulary()
    rows = []
    for cat in candidates:
        gen_corpus = []
        ideal_corpus = []
        pair_mse = []
        pair_ssim = []
        for k in range(config.metrics_renders):
            off = ((k % 3) - 1, (k // 3 % 3) - 1)
            canvas, mask = _template_canvas(cat, off, palette, vocab)
            req = EditRequest(
                image=canvas,
                mask=mask,
                mode=EditMode.DETECTED_FRAME,
                target=EditTarget("category", cat),
                variability=config.variability,
                seed=k,
            )
            edited = inpaint(req, base_cfg.fidelity, palette, vocab)
            ideal = _ideal_appearance(cat, canvas, mask, vocab)
            frame = frame_of(mask)
            gen_crop = frame.crop(edited.rgb)
            ideal_crop = frame.crop(ideal)
            gen_corpus.append(gen_crop)
            ideal_corpus.append(ideal_crop)
            pair_mse.append(mse(gen_crop, ideal_crop))
            pair_ssim.append(ssim(gen_crop, ideal_crop))
        success_rate = 0.0
        if pack_dataset is not None and len(pack_dataset) > 0:
            subset = UnsuccessfulDataset(
                pack_dataset.task,
                pack_dataset.n_variations,
                pack_dataset.master_seed,
                pack_dataset.episodes[: config.metrics_episodes],
            )
            cfg_cat = replace(base_cfg, edit_quality_target=cat)
            results = rerun(subset, "C", cfg_cat, policy)
            success_rate = sum(r.reward == 1.0 for _, r in results) / len(subset)
        rows.append(
            {
                "category": cat,
                "mse": float(np.mean(pair_mse)),
                "ssim": float(np.mean(pair_ssim)),
                "fid_lite": fid_lite(gen_corpus, ideal_corpus),
                "success_rate": success_rate,
            }
        )
    return rows


def run_experiment(config: ExperimentConfig, out_dir) -> Report:
    """Collect, rewrite, rerun and report; writes all artifacts to out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    palette = default_palette()
    vocab = default_vocabulary()
    policy, colormap, encoder, seen_instructions, target, cfg = build_experiment_stack(config)

    (out / "colormap.csv").write_text(colormap_to_csv(colormap))
    plot_colormap(colormap, out / "colormap.png")
    unseen_instrs = [Instruction(PACK_OBJECT, n, "brown box") for n in vocab.names("unseen")]
    plot_semantic_heatmap(encoder, unseen_instrs, list(seen_instructions), out / "semantic_heatmap.png")

    rows: list[TaskMethodRow] = []
    transcript: list[TranscriptRow] = []
    pack_unseen_dataset = None
    for task_kind in config.tasks:
        seen_ds = collect_unsuccessful(
            policy, TaskSpec(task_kind, "seen"), config.n_variations, config.master_seed, config.p_exec
        )
        unseen_ds = collect_unsuccessful(
            policy, TaskSpec(task_kind, "unseen"), config.n_variations, config.master_seed, config.p_exec
        )
        if task_kind == "pack-object":
            pack_unseen_dataset = unseen_ds
        for method in config.methods:
            results = rerun(unseen_ds, method, cfg, policy)
            recovered = sum(r.reward == 1.0 for _, r in results)
            rewrite_failed = len(results) - recovered
            stage_counts = {s.value: 0 for s in FAILURE_STAGES}
            for _, res in results:
                if res.reward != 1.0:
                    stage_counts[res.stage.value] += 1
            pct = (
                recovery_percent(len(unseen_ds), rewrite_failed) if len(unseen_ds) > 0 else None
            )
            rows.append(
                TaskMethodRow(
                    task=task_kind,
                    method=method,
                    seen_failed=len(seen_ds),
                    unseen_failed=len(unseen_ds),
                    rewrite_failed=rewrite_failed,
                    recovered=recovered,
                    recovery_pct=pct,
                    stage_counts=stage_counts,
                )
            )
            for ep, (_, res) in zip(unseen_ds.episodes, results):
                transcript.append(
                    TranscriptRow(
                        task=task_kind,
                        split="unseen",
                        method=method,
                        seed=ep.scene_ref.seed,
                        stage=res.stage.value,
                        baseline_reward=ep.reward,
                        rewrite_reward=res.reward,
                    )
                )

    metric_rows = measure_alignment_metrics(
        config, config.metrics_candidates, pack_unseen_dataset, cfg, policy
    )
    correlations = correlation_report(metric_rows) if len(metric_rows) >= 3 else ()

    report = Report(
        config=config,
        rows=tuple(rows),
        transcript=tuple(transcript),
        metric_rows=tuple(metric_rows),
        correlations=tuple(correlations),
    )
    write_report_files(report, out)
    return report


# --- artifact writers -------------------------------------------------------

def transcript_to_csv(transcript) -> str:
    lines = ["task,split,method,seed,stage,baseline_reward,rewrite_reward"]
    for r in transcript:
        lines.append(
            f"{r.task},{r.split},{r.method},{r.seed},{r.stage},"
            f"{r.baseline_reward:.6f},{r.rewrite_reward:.6f}"
        )
    return "\n".join(lines) + "\n"


def report_to_csv(report: Report) -> str:
    lines = ["task,method,n_variations,seen_failed,unseen_failed,rewrite_failed,recovered,recovery_pct"]
    for r in report.rows:
        pct = "n/a" if r.recovery_pct is None else str(r.recovery_pct)
        lines.append(
            f"{r.task},{r.method},{report.config.n_variations},{r.seen_failed},"
            f"{r.unseen_failed},{r.rewrite_failed},{r.recovered},{pct}"
        )
    return "\n".join(lines) + "\n"


def stages_to_csv(report: Report) -> str:
    lines = ["task,method,stage,count"]
    for r in report.rows:
        for stage in FAILURE_STAGES:
            lines.append(f"{r.task},{r.method},{stage.value},{r.stage_counts[stage.value]}")
    return "\n".join(lines) + "\n"


def metrics_to_csv(metric_rows) -> str:
    lines = ["category,mse,ssim,fid_lite,success_rate"]
    for r in metric_rows:
        lines.append(
            f"{r['category']},{r['mse']:.8f},{r['ssim']:.8f},{r['fid_lite']:.8f},{r['success_rate']:.6f}"
        )
    return "\n".join(lines) + "\n"


def correlations_to_csv(correlations) -> str:
    lines = ["metric,pearson_r"]
    for name, r in correlations:
        lines.append(f"{name},{'undefined' if r is None else f'{r:.8f}'}")
    return "\n".join(lines) + "\n"


def summary_text(report: Report) -> str:
    lines = []
    lines.append("failed runs per task (n=%d variations)" % report.config.n_variations)
    lines.append(f"{'task':42s} {'seen':>5s} {'unseen':>7s} {'rewritten':>10s} {'recovery':>9s}")
    for r in report.rows:
        if r.method != report.config.default_method:
            continue
        pct = "n/a" if r.recovery_pct is None else f"{r.recovery_pct}%"
        lines.append(
            f"{r.task:42s} {r.seen_failed:5d} {r.unseen_failed:7d} {r.rewrite_failed:10d} {pct:>9s}"
        )
    lines.append("")
    lines.append("recovery by editing method")
    methods = list(report.config.methods)
    lines.append(f"{'task':42s} " + " ".join(f"{m:>6s}" for m in methods))
    for task in dict.fromkeys(r.task for r in report.rows):
        cells = []
        for m in methods:
            row = next(r for r in report.rows if r.task == task and r.method == m)
            cells.append("n/a" if row.recovery_pct is None else f"{row.recovery_pct}%")
        lines.append(f"{task:42s} " + " ".join(f"{c:>6s}" for c in cells))
    lines.append("")
    lines.append("failure stages (default method)")
    for r in report.rows:
        if r.method != report.config.default_method:
            continue
        parts = ", ".join(f"{k}={v}" for k, v in r.stage_counts.items() if v)
        lines.append(f"{r.task}: {parts or 'none'}")
    lines.append("")
    lines.append("edit-alignment metrics vs observed success (descriptive only)")
    for row in report.metric_rows:
        lines.append(
            f"{row['category']:34s} mse={row['mse']:.5f} ssim={row['ssim']:.4f} "
            f"fid={row['fid_lite']:.4f} success={row['success_rate']:.2f}"
        )
    for name, r in report.correlations:
        lines.append(f"pearson({name}, success) = {'undefined' if r is None else f'{r:+.4f}'}")
    return "\n".join(lines) + "\n"


def write_report_files(report: Report, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "transcript.csv").write_text(transcript_to_csv(report.transcript))
    (out / "report.csv").write_text(report_to_csv(report))
    (out / "stages.csv").write_text(stages_to_csv(report))
    (out / "metrics.csv").write_text(metrics_to_csv(report.metric_rows))
    (out / "correlations.csv").write_text(correlations_to_csv(report.correlations))
    (out / "summary.txt").write_text(summary_text(report))
