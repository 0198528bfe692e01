"""Instruction rewriting: colormap lookup, semantic-similarity argmax over
seen instructions, and edit-quality ranking of replacement categories.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np
from numpy.random import SeedSequence

from .actions import apply_action
from .instructions import Instruction, rewrite_instruction  # noqa: F401  (re-export)
from .observation import Observation, SceneRef
from .policy import PolicyModel, infer
from .render import render_topdown
from .scene import PUT_BLOCK_IN_BOWL, TaskSpec, generate_scene
from .scoring import score


class RewriteError(RuntimeError):
    pass


# --- colormap -------------------------------------------------------------

@dataclass(frozen=True)
class ColorMap:
    pick_colors: tuple[str, ...]  # rows (seen picks, palette order)
    place_colors: tuple[str, ...]  # columns
    success: np.ndarray  # (picks, places) rates in [0,1]
    trials_per_cell: int


def build_colormap(
    policy: PolicyModel,
    pick_colors: list[str],
    place_colors: list[str],
    trials: int = 10,
    seed: int = 0,
) -> ColorMap:
    """Success-rate matrix from seeded block-in-bowl episodes per color pair."""
    if trials < 1:
        raise RewriteError("trials must be >= 1")
    task = TaskSpec(PUT_BLOCK_IN_BOWL, "seen")
    rates = np.zeros((len(pick_colors), len(place_colors)), dtype=np.float64)
    for i, pick in enumerate(pick_colors):
        for j, place in enumerate(place_colors):
            wins = 0
            cell_seeds = SeedSequence([seed, i, j]).generate_state(trials, np.uint64)
            for t in range(trials):
                scene_seed = int(cell_seeds[t])
                scene = generate_scene(task, scene_seed, goal_colors=(pick, place))
                obs = Observation(
                    image=render_topdown(scene),
                    instruction=scene.instruction,
                    scene_ref=SceneRef(task.kind, task.split, scene_seed, goal_colors=(pick, place)),
                )
                action = infer(policy, obs)
                after, _ = apply_action(scene, action)
                wins += int(score(after) == 1.0)
            rates[i, j] = wins / trials
    return ColorMap(tuple(pick_colors), tuple(place_colors), rates, trials)


def map_color(cm: ColorMap, pick: str, place: str) -> str:
    """Best seen pick color for the given place color; ties take the first
    (palette-order) row."""
    if place not in cm.place_colors:
        raise RewriteError(f"place color not in colormap columns: {place!r}")
    j = cm.place_colors.index(place)
    i = int(np.argmax(cm.success[:, j]))
    return cm.pick_colors[i]


def map_place_color(cm: ColorMap, candidates: list[str] | None = None) -> str:
    """Seen place color with the best column mean over all seen picks."""
    names = list(candidates) if candidates is not None else list(cm.pick_colors)
    cols = []
    for name in names:
        if name not in cm.place_colors:
            raise RewriteError(f"candidate place color not in colormap: {name!r}")
        cols.append(float(cm.success[:, cm.place_colors.index(name)].mean()))
    return names[int(np.argmax(cols))]


def colormap_to_csv(cm: ColorMap) -> str:
    lines = ["pick\\place," + ",".join(cm.place_colors)]
    for i, pick in enumerate(cm.pick_colors):
        lines.append(pick + "," + ",".join(f"{v:.6f}" for v in cm.success[i]))
    lines.append(f"# trials_per_cell={cm.trials_per_cell}")
    return "\n".join(lines) + "\n"


def colormap_from_csv(text: str) -> ColorMap:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    trials = 1
    if lines[-1].startswith("# trials_per_cell="):
        trials = int(lines[-1].split("=", 1)[1])
        lines = lines[:-1]
    place_colors = tuple(lines[0].split(",")[1:])
    pick_colors = []
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        pick_colors.append(parts[0])
        rows.append([float(v) for v in parts[1:]])
    return ColorMap(tuple(pick_colors), place_colors, np.array(rows), trials)


# --- text embeddings -------------------------------------------------------

class TrigramEncoder:
    """Hashed character-trigram counts folded into `dimension` buckets,
    L2-normalized. Deterministic across processes (crc32 hashing)."""

    def __init__(self, dimension: int = 256):
        if dimension < 1:
            raise RewriteError("dimension must be >= 1")
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise RewriteError("cannot embed empty text")
        vec = np.zeros(self.dimension, dtype=np.float64)
        grams = [text[i : i + 3] for i in range(max(len(text) - 2, 1))]
        for g in grams:
            vec[zlib.crc32(g.encode()) % self.dimension] += 1.0
        return vec / np.linalg.norm(vec)


class EmbeddingTable:
    """File-backed embedding lookup. Format: first line is the dimension,
    then one record per line: ``text<TAB>f1 f2 ... fd``."""

    def __init__(self, dimension: int, entries: dict[str, np.ndarray]):
        self.dimension = dimension
        self.entries = {}
        for text, vec in entries.items():
            vec = np.asarray(vec, dtype=np.float64)
            if vec.shape != (dimension,):
                raise RewriteError(f"vector for {text!r} has wrong dimension")
            norm = float(np.linalg.norm(vec))
            if norm == 0:
                raise RewriteError(f"zero vector for {text!r}")
            self.entries[text] = vec / norm

    def embed(self, text: str) -> np.ndarray:
        try:
            return self.entries[text]
        except KeyError:
            raise RewriteError(f"text missing from embedding table: {text!r}") from None

    @classmethod
    def parse(cls, text: str) -> "EmbeddingTable":
        lines = text.splitlines()
        if not lines:
            raise RewriteError("empty embedding table")
        dimension = int(lines[0].strip())
        entries = {}
        for ln in lines[1:]:
            if not ln.strip():
                continue
            key, _, values = ln.partition("\t")
            entries[key] = np.array([float(v) for v in values.split()])
        return cls(dimension, entries)

    def dump(self) -> str:
        lines = [str(self.dimension)]
        for text, vec in self.entries.items():
            lines.append(text + "\t" + " ".join(repr(float(v)) for v in vec))
        return "\n".join(lines) + "\n"


def embed(backend, text: str) -> np.ndarray:
    """Unit-norm embedding of `text` from an encoder or table backend."""
    return backend.embed(text)


def map_semantic(backend, instruction: Instruction, seen: list[Instruction]) -> Instruction:
    """Seen instruction with the largest embedding inner product; ties break
    to the lexicographically smallest raw text."""
    if not seen:
        raise RewriteError("empty seen-instruction set")
    query = embed(backend, instruction.raw)
    best = None
    best_key = None
    for cand in seen:
        sim = float(np.dot(query, embed(backend, cand.raw)))
        key = (-sim, cand.raw)
        if best_key is None or key < best_key:
            best, best_key = cand, key
    return best


# --- edit-quality ranking ---------------------------------------------------

def rank_edit_quality(
    candidates: list[str],
    alignment_scores: dict[str, float] | None = None,
    fid_scores: dict[str, float] | None = None,
) -> str:
    """Single best seen category to render edits as.

    Either declared alignment scores (higher is better) or measured
    FID-lite scores (lower is better) drive the ranking; ties break
    lexicographically.
    """
    if not candidates:
        raise RewriteError("empty candidate set")
    if (alignment_scores is None) == (fid_scores is None):
        raise RewriteError("provide exactly one of alignment_scores / fid_scores")
    if alignment_scores is not None:
        return min(candidates, key=lambda c: (-alignment_scores[c], c))
    return min(candidates, key=lambda c: (fid_scores[c], c))
