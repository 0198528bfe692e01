"""Failure collection, observation rewriting and rerun orchestration.

The rewrite only ever touches what the policy sees: the rerun executes the
inferred action on the *original* scene regenerated from (task, seed). The
replacement object in the synthetic observation is a perceptual fiction;
the physical pick must still land on the real one.
"""

from __future__ import annotations

import enum
import json
import zlib
from dataclasses import dataclass, field

import numpy as np

from .actions import Action, ExecNoise, ExecutionOutcome, Pixel, apply_action
from .colors import Palette, delta_e, srgb_to_lab
from .geometry import contains_point
from .grounding import DetectionResult, GroundingConfig, NoDetectionError, detect, segment_background
from .inpaint import EditMode, EditRequest, EditTarget, FidelityModel, degradation_applied, inpaint, recolor_background
from .instructions import BLOCK_IN_BOWL, Instruction, rewrite_instruction
from .metrics import sharpness
from .observation import Observation, SceneRef
from .policy import PolicyModel, infer
from .render import instance_map, render_topdown
from .rewriting import ColorMap, map_color, map_place_color, map_semantic
from .scene import Scene, TaskSpec, default_palette, default_vocabulary
from .scoring import score
from .vocabulary import Vocabulary

_SALT_EXEC_BASE = 224
_SALT_EXEC_RERUN = 225
_SALT_EDIT = 26


class FailureStage(enum.Enum):
    SUCCESS = "success"
    MASKING_MISS = "masking-miss"
    MASKING_WRONG_OBJECT = "masking-wrong-object"
    EDIT_QUALITY = "edit-quality"
    AFFORDANCE_ERROR = "affordance-error"
    EXECUTION_ERROR = "execution-error"


FAILURE_STAGES = [s for s in FailureStage if s is not FailureStage.SUCCESS]


@dataclass(frozen=True)
class EpisodeRecord:
    scene_ref: SceneRef
    observation: Observation
    action: Action
    reward: float


@dataclass(frozen=True)
class UnsuccessfulDataset:
    task: TaskSpec
    n_variations: int
    master_seed: int
    episodes: tuple[EpisodeRecord, ...]

    def __post_init__(self):
        if any(e.reward == 1.0 for e in self.episodes):
            raise ValueError("dataset contains a successful episode")

    def __len__(self) -> int:
        return len(self.episodes)


@dataclass(frozen=True)
class RewriteRecord:
    method: str  # "A" | "B" | "C"
    detection: DetectionResult | None
    place_detection: DetectionResult | None
    synthetic_obs: Observation
    stage_status: dict[str, str]
    degraded: bool


@dataclass(frozen=True)
class EpisodeResult:
    action: Action
    outcome: ExecutionOutcome
    reward: float
    stage: FailureStage


@dataclass(frozen=True)
class PipelineConfig:
    grounding: GroundingConfig = field(default_factory=GroundingConfig)
    fidelity: FidelityModel = field(default_factory=FidelityModel)
    colormap: ColorMap | None = None
    encoder: object | None = None
    seen_instructions: tuple[Instruction, ...] = ()
    edit_quality_target: str = "Spider-man figure"
    variability: int = 3
    edit_order: str = "background-first"  # or "object-first"
    p_exec: float = 0.0
    background_tolerance: float = 20.0
    sharpness_threshold: float = 0.0


def _derive_seed(scene_seed: int, salt: int) -> int:
    return int(np.random.SeedSequence([scene_seed, salt]).generate_state(1, np.uint64)[0])


def episode_seeds(master_seed: int, task: TaskSpec, n: int) -> list[int]:
    ss = np.random.SeedSequence([master_seed, zlib.crc32(f"{task.kind}:{task.split}".encode())])
    return [int(s) for s in ss.generate_state(n, np.uint64)]


def run_baseline_episode(policy: PolicyModel, ref: SceneRef, p_exec: float = 0.0):
    """One seeded episode: observe, infer, execute, score."""
    scene = ref.regenerate()
    obs = Observation(render_topdown(scene), scene.instruction, ref)
    action = infer(policy, obs)
    noise = ExecNoise(p_exec, _derive_seed(ref.seed, _SALT_EXEC_BASE)) if p_exec > 0 else None
    after, outcome = apply_action(scene, action, noise)
    return obs, action, outcome, score(after)


def collect_unsuccessful(
    policy: PolicyModel,
    task: TaskSpec,
    n_variations: int,
    master_seed: int,
    p_exec: float = 0.0,
) -> UnsuccessfulDataset:
    """Run n seeded episodes and keep every one with reward != 1."""
    if n_variations < 1:
        raise ValueError("n_variations must be >= 1")
    failures = []
    for seed in episode_seeds(master_seed, task, n_variations):
        ref = SceneRef(task.kind, task.split, seed)
        obs, action, _, reward = run_baseline_episode(policy, ref, p_exec)
        if reward != 1.0:
            failures.append(EpisodeRecord(ref, obs, action, reward))
    return UnsuccessfulDataset(task, n_variations, master_seed, tuple(failures))


def _is_unseen_color(color: str, palette: Palette) -> bool:
    return color not in {c.name for c in palette.seen}


def _rewrite_slots(
    obs: Observation, method: str, cfg: PipelineConfig, palette: Palette, vocab: Vocabulary
) -> tuple[Instruction, str | None, str | None, dict[str, str]]:
    """New instruction plus the replacement token per slot (None = keep)."""
    instr = obs.instruction
    status: dict[str, str] = {}
    if instr.template == BLOCK_IN_BOWL:
        if cfg.colormap is None:
            raise ValueError("color tasks need a colormap in PipelineConfig")
        pick, place = instr.pick_slot, instr.place_slot
        new_place = None
        if _is_unseen_color(place, palette):
            new_place = map_place_color(cfg.colormap, list(cfg.colormap.pick_colors))
            status["place-map"] = f"{place}->{new_place}"
        if _is_unseen_color(pick, palette):
            new_pick = map_color(cfg.colormap, pick, new_place or place)
            status["pick-map"] = f"{pick}->{new_pick}"
        else:
            new_pick = None
        out = instr
        if new_pick is not None:
            out = rewrite_instruction(out, "pick", new_pick)
        if new_place is not None:
            out = rewrite_instruction(out, "place", new_place)
        return out, new_pick, new_place, status

    # packing: the pick slot is a category token
    cat = instr.pick_slot
    if cat in vocab and vocab[cat].split == "seen":
        return instr, None, None, status
    if method == "C":
        new_pick = cfg.edit_quality_target
        status["pick-map"] = f"{cat}->{new_pick} (edit-quality)"
    else:
        if cfg.encoder is None or not cfg.seen_instructions:
            raise ValueError("semantic mapping needs encoder + seen instructions")
        mapped = map_semantic(cfg.encoder, instr, list(cfg.seen_instructions))
        new_pick = mapped.pick_slot
        status["pick-map"] = f"{cat}->{new_pick} (semantic)"
    return rewrite_instruction(instr, "pick", new_pick), new_pick, None, status


def rewrite_step(obs: Observation, method: str, cfg: PipelineConfig) -> RewriteRecord:
    """Produce the synthetic observation for one unsuccessful episode.

    Stage failures are recorded, never raised, so the caller can always
    re-execute. A missed detection returns the original observation.
    """
    if method not in ("A", "B", "C"):
        raise ValueError(f"unknown method: {method!r}")
    palette = default_palette()
    vocab = default_vocabulary()
    status: dict[str, str] = {}
    work = obs.image
    edit_seed = _derive_seed(obs.scene_ref.seed, _SALT_EDIT)
    mode = EditMode.WHOLE_IMAGE if method == "A" else EditMode.DETECTED_FRAME

    def _edit_background(img):
        bare = segment_background(img)
        if not bare.any():
            return img
        est = srgb_to_lab(img.rgb[bare].mean(axis=0))
        if float(delta_e(est, palette.background.lab)) <= cfg.background_tolerance:
            return img
        status["background"] = f"recolored->{palette.background.name}"
        return recolor_background(img, bare, palette.background.name, palette)

    if cfg.edit_order == "background-first":
        work = _edit_background(work)

    new_instr, new_pick, new_place, map_status = _rewrite_slots(obs, method, cfg, palette, vocab)
    status.update(map_status)

    detection = None
    place_detection = None
    degraded = False
    try:
        if new_pick is not None:
            detection = detect(work, obs.instruction.pick.query_text(), cfg.grounding)[0]
            kind = "color" if obs.instruction.template == BLOCK_IN_BOWL else "category"
            req = EditRequest(
                image=work,
                mask=detection.mask,
                mode=mode,
                target=EditTarget(kind, new_pick),
                variability=cfg.variability,
                seed=edit_seed,
            )
            degraded = degraded or degradation_applied(req, cfg.fidelity)
            work = inpaint(req, cfg.fidelity, palette, vocab)
            status["pick-edit"] = "ok"
        if new_place is not None:
            place_detection = detect(work, obs.instruction.place.query_text(), cfg.grounding)[0]
            req = EditRequest(
                image=work,
                mask=place_detection.mask,
                mode=mode,
                target=EditTarget("color", new_place),
                variability=cfg.variability,
                seed=_derive_seed(edit_seed, 1),
            )
            degraded = degraded or degradation_applied(req, cfg.fidelity)
            work = inpaint(req, cfg.fidelity, palette, vocab)
            status["place-edit"] = "ok"
    except NoDetectionError as exc:
        status["masking"] = f"miss: {exc}"
        return RewriteRecord(
            method=method,
            detection=None,
            place_detection=None,
            synthetic_obs=obs,
            stage_status=status,
            degraded=False,
        )

    if cfg.edit_order == "object-first":
        work = _edit_background(work)

    synthetic = Observation(image=work, instruction=new_instr, scene_ref=obs.scene_ref)
    return RewriteRecord(
        method=method,
        detection=detection,
        place_detection=place_detection,
        synthetic_obs=synthetic,
        stage_status=status,
        degraded=degraded,
    )


def _mask_hits_object(mask: np.ndarray, scene: Scene, obj_id: int) -> bool:
    """Detection counts as the right object when most of its mask lies on it."""
    ids = instance_map(scene)
    inside = int(np.count_nonzero(mask & (ids == obj_id)))
    return inside * 2 > int(mask.sum())


def classify_failure(
    record: RewriteRecord, result: EpisodeResult | None, scene: Scene, cfg: PipelineConfig
) -> FailureStage:
    """Charge a rerun episode to the first pipeline stage that went wrong."""
    action, outcome, reward = result.action, result.outcome, result.reward
    if reward == 1.0:
        return FailureStage.SUCCESS
    if "masking" in record.stage_status:
        return FailureStage.MASKING_MISS

    goal_obj = scene.matching(scene.goal_pick)[0]
    receptacle = scene.matching(scene.goal_place)[0]
    if record.detection is not None and not _mask_hits_object(record.detection.mask, scene, goal_obj.id):
        return FailureStage.MASKING_WRONG_OBJECT
    if record.place_detection is not None and not _mask_hits_object(
        record.place_detection.mask, scene, receptacle.id
    ):
        return FailureStage.MASKING_WRONG_OBJECT

    if record.degraded:
        return FailureStage.EDIT_QUALITY
    if record.detection is not None and cfg.sharpness_threshold > 0:
        rgb = record.synthetic_obs.image.rgb
        crop = record.detection.frame.expanded(3, rgb.shape[0], rgb.shape[1]).crop(rgb)
        if sharpness(crop) < cfg.sharpness_threshold:
            return FailureStage.EDIT_QUALITY

    px, py = action.pick.xy
    if not contains_point(goal_obj.footprint, goal_obj.x, goal_obj.y, goal_obj.theta, px, py):
        return FailureStage.AFFORDANCE_ERROR
    qx, qy = action.place.xy
    if not contains_point(receptacle.footprint, receptacle.x, receptacle.y, receptacle.theta, qx, qy):
        return FailureStage.AFFORDANCE_ERROR
    return FailureStage.EXECUTION_ERROR


def rerun(
    dataset: UnsuccessfulDataset, method: str, cfg: PipelineConfig, policy: PolicyModel
) -> list[tuple[RewriteRecord, EpisodeResult]]:
    """Rewrite and re-execute every stored failure."""
    out = []
    for ep in dataset.episodes:
        record = rewrite_step(ep.observation, method, cfg)
        action = infer(policy, record.synthetic_obs)
        scene = ep.scene_ref.regenerate()
        noise = (
            ExecNoise(cfg.p_exec, _derive_seed(ep.scene_ref.seed, _SALT_EXEC_RERUN))
            if cfg.p_exec > 0
            else None
        )
        after, outcome = apply_action(scene, action, noise)
        reward = score(after)
        result = EpisodeResult(action=action, outcome=outcome, reward=reward, stage=FailureStage.SUCCESS)
        stage = classify_failure(record, result, scene, cfg)
        out.append((record, EpisodeResult(action, outcome, reward, stage)))
    return out


# --- dataset file io --------------------------------------------------------

def dataset_to_json(dataset: UnsuccessfulDataset) -> str:
    payload = {
        "task": dataset.task.kind,
        "split": dataset.task.split,
        "n_variations": dataset.n_variations,
        "master_seed": dataset.master_seed,
        "episodes": [
            {
                "seed": ep.scene_ref.seed,
                "reward": ep.reward,
                "action": [ep.action.pick.row, ep.action.pick.col, ep.action.place.row, ep.action.place.col],
                "instruction": ep.observation.instruction.raw,
            }
            for ep in dataset.episodes
        ],
    }
    return json.dumps(payload, indent=2) + "\n"


def dataset_from_json(text: str) -> UnsuccessfulDataset:
    payload = json.loads(text)
    task = TaskSpec(payload["task"], payload["split"])
    episodes = []
    for ep in payload["episodes"]:
        ref = SceneRef(task.kind, task.split, int(ep["seed"]))
        scene = ref.regenerate()
        obs = Observation(render_topdown(scene), scene.instruction, ref)
        pr, pc, qr, qc = ep["action"]
        episodes.append(
            EpisodeRecord(
                scene_ref=ref,
                observation=obs,
                action=Action(pick=Pixel(pr, pc), place=Pixel(qr, qc)),
                reward=float(ep["reward"]),
            )
        )
    return UnsuccessfulDataset(task, payload["n_variations"], payload["master_seed"], tuple(episodes))
