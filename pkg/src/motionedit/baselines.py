"""Text-to-motion editing baselines and body-part masks for inpainting."""

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np
import torch

from .codec import FEATURE_DIM, FeatureSequence, encode, normalize, position_dims, rotation_dims
from .diffusion import (
    ConditionSet, GuidanceScales, Inpainting, lengths_to_mask, pad_features, q_sample, sample_loop, unpad,
)
from .errors import CacheParseError, InvalidConfigError, InvalidLexiconError
from .skeleton import JOINT_NAMES
from .training import batch_seed

PARTS = ("left arm", "right arm", "left leg", "right leg", "buttocks", "waist", "torso", "neck")
PART_JOINTS = {
    "left arm": ("left_collar", "left_shoulder", "left_elbow", "left_wrist"),
    "right arm": ("right_collar", "right_shoulder", "right_elbow", "right_wrist"),
    "left leg": ("left_hip", "left_knee", "left_ankle", "left_foot"),
    "right leg": ("right_hip", "right_knee", "right_ankle", "right_foot"),
    "buttocks": ("pelvis",),
    "waist": ("spine1", "spine2"),
    "torso": ("spine3",),
    "neck": ("neck", "head"),
}
# root translation and both orientation blocks move with the hips and lower back
ROOT_DIMS = slice(0, 15)
ROOT_PARTS = ("buttocks", "waist")
BASELINE_KINDS = ("mdm", "mdm_s", "mdm_bp", "mdm_bp_s")

_WORDS = re.compile(r"[a-z']+")
ARM_WORDS = {"arm", "arms", "hand", "hands", "wave", "waves", "waving", "wrist", "elbow", "shoulder",
             "reach", "throw", "throwing", "clap", "punch", "pray"}
LEG_WORDS = {"leg", "legs", "foot", "feet", "knee", "knees", "kick", "hip", "hips"}
MOTION_WORDS = {"step", "steps", "stride", "strides", "walk", "walks", "walking", "run", "jump", "jumps",
                "turn", "turning", "rotate", "squat", "squatting", "sit", "circle", "circling",
                "faster", "slower", "quicker", "quickly", "slowly", "speed", "slow"}
TORSO_WORDS = {"torso", "chest", "back", "lean", "bow", "tilt"}
NECK_WORDS = {"head", "neck", "look", "nod"}
WHOLE_WORDS = {"around", "body", "whole", "entire", "everything", "mirror", "backwards", "reverse",
               "earlier", "later", "sooner", "beginning", "ending", "middle", "start", "stop"}


@dataclass(frozen=True)
class BodyPartSet:
    parts: tuple
    provenance: str  # "cached-llm" | "lexicon-rule" | "explicit"

    def __post_init__(self):
        unknown = [p for p in self.parts if p not in PARTS]
        if unknown:
            raise InvalidLexiconError(f"unknown body parts {unknown}")


def normalize_text(text):
    return " ".join(text.lower().split())


def parse_cache(text):
    """Parse a JSONL response cache into {normalized text: tuple of parts}."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CacheParseError(f"invalid JSON ({exc.msg})", lineno) from None
        if not isinstance(rec, dict) or not isinstance(rec.get("text"), str) or not isinstance(rec.get("parts"), list):
            raise CacheParseError("record needs a 'text' string and a 'parts' list", lineno)
        bad = [p for p in rec["parts"] if p not in PARTS]
        if bad:
            raise CacheParseError(f"unknown body parts {bad}", lineno)
        out[normalize_text(rec["text"])] = tuple(rec["parts"])
    return out


@lru_cache(maxsize=8)
def _load_cache(path):
    if path is None:
        text = resources.files("motionedit.data").joinpath("bodypart_cache.jsonl").read_text()
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_cache(text)


def load_cache(path=None):
    return dict(_load_cache(None if path is None else str(path)))


def lexicon_parts(text):
    words = set(_WORDS.findall(text.lower()))
    if not words:
        return ()
    if words & WHOLE_WORDS:
        return PARTS
    left, right = "left" in words, "right" in words
    sides = ("left", "right") if left == right else ("left",) if left else ("right",)
    parts = set()
    if words & ARM_WORDS:
        parts |= {f"{s} arm" for s in sides}
    if words & LEG_WORDS:
        parts |= {f"{s} leg" for s in sides}
        if words & {"knee", "knees", "hip", "hips"}:
            parts.add("buttocks")
    if words & TORSO_WORDS:
        parts.add("torso")
    if words & NECK_WORDS:
        parts.add("neck")
    # action and tempo words only decide when no body part is named
    if not parts and words & MOTION_WORDS:
        parts = {"left leg", "right leg", "buttocks"}
    if not parts:
        return PARTS
    return tuple(p for p in PARTS if p in parts)


def body_parts_for_edit(text, cache=None):
    """Cached LLM answer when available, lexicon rules otherwise.

    ``cache`` is a path, a parsed dict, or None for the bundled cache.
    """
    table = cache if isinstance(cache, dict) else load_cache(cache)
    key = normalize_text(text)
    if key in table:
        return BodyPartSet(tuple(table[key]), "cached-llm")
    parts = lexicon_parts(key)
    if not parts and key:
        parts = PARTS
    return BodyPartSet(parts, "lexicon-rule")


def render_prompt(text):
    tmpl = resources.files("motionedit.data").joinpath("bodypart_prompt.txt").read_text()
    body = "\n".join(line for line in tmpl.splitlines() if not line.startswith("#"))
    return body.replace("[EDIT TEXT]", normalize_text(text))


def part_dims(part):
    if part not in PART_JOINTS:
        raise InvalidLexiconError(f"unknown body part {part!r}")
    dims = []
    for name in PART_JOINTS[part]:
        j = JOINT_NAMES.index(name)
        if j > 0:
            dims += list(rotation_dims(j))
        dims += list(position_dims(j))
    if part in ROOT_PARTS:
        dims += list(range(*ROOT_DIMS.indices(FEATURE_DIM)))
    return sorted(dims)


def part_mask(parts, skeleton=None):
    """207 booleans, True where the feature belongs to one of ``parts`` (editable)."""
    names = parts.parts if isinstance(parts, BodyPartSet) else tuple(parts)
    if skeleton is not None and tuple(skeleton.joint_names) != JOINT_NAMES:
        raise InvalidLexiconError("part table assumes the standard joint order")
    mask = np.zeros(FEATURE_DIM, dtype=bool)
    for p in names:
        mask[part_dims(p)] = True
    return mask


def sample_baseline(kind, denoiser, sched, stats, sources=None, texts=(), scales=GuidanceScales(),
                    seed=0, masks=None, target_lengths=None):
    """Sample one of the text-only baselines for a batch; returns denormalized FeatureSequences.

    ``sources`` are raw (unnormalized) FeatureSequences. ``mdm`` uses
    ``target_lengths`` (default: source lengths); the source-dependent kinds
    always generate at the source length.
    """
    if kind not in BASELINE_KINDS:
        raise InvalidConfigError(f"unknown baseline {kind!r}; expected one of {BASELINE_KINDS}")
    texts = list(texts)
    if kind != "mdm" and sources is None:
        raise InvalidConfigError(f"baseline {kind} needs a source motion")
    if kind in ("mdm_bp", "mdm_bp_s") and masks is None:
        raise InvalidConfigError(f"baseline {kind} needs body-part masks")
    if sources is not None and any(s.normalized for s in sources):
        raise InvalidConfigError("pass raw source features; normalization happens here")
    if kind == "mdm":
        lengths = target_lengths if target_lengths is not None else [s.num_frames for s in sources]
    else:
        lengths = [s.num_frames for s in sources]
    lengths = np.atleast_1d(np.asarray(lengths))
    if np.any(lengths < 2):
        raise InvalidConfigError("target_length must be at least 2 frames")
    x_mask = lengths_to_mask(lengths)
    cond = ConditionSet(texts)
    gen = torch.Generator().manual_seed(int(seed))
    shape = tuple(x_mask.shape) + (FEATURE_DIM,)
    x_init = torch.randn(shape, generator=gen)
    src_norm = None
    if sources is not None and kind != "mdm":
        src_norm, _ = pad_features([normalize(s, stats).data for s in sources])
    if kind in ("mdm_s", "mdm_bp_s"):
        x_init = q_sample(src_norm, sched.num_steps, x_init, sched)
    inpaint = None
    if kind in ("mdm_bp", "mdm_bp_s"):
        editable = torch.from_numpy(np.stack([np.asarray(m, dtype=bool) for m in masks]))
        # separate noise stream so a full mask reproduces plain MDM exactly
        inpaint = Inpainting(editable, src_norm, torch.Generator().manual_seed(int(seed) + 1))
    x = sample_loop(denoiser, cond, x_mask, sched, scales, gen, x_init=x_init, inpaint=inpaint)
    out = unpad(x, x_mask, stats)
    if inpaint is None:
        return out
    held = []
    for f, s, m in zip(out, sources, masks):
        data = f.data.copy()
        keep = ~np.asarray(m, dtype=bool)
        data[:, keep] = s.data[:, keep]
        held.append(FeatureSequence(data))
    return held


class BaselineSampler:
    """Evaluation sampler for a text-only denoiser in one of the baseline modes."""

    def __init__(self, kind, model, stats, sched, scales=GuidanceScales(), seed=0, cache=None, skeleton=None):
        if kind not in BASELINE_KINDS:
            raise InvalidConfigError(f"unknown baseline {kind!r}")
        self.kind, self.model, self.stats, self.sched = kind, model, stats, sched
        self.scales, self.seed, self.skeleton = scales, seed, skeleton
        self.cache = load_cache(cache) if not isinstance(cache, dict) else cache

    def masks_for(self, texts):
        return [part_mask(body_parts_for_edit(t, self.cache)) for t in texts]

    def __call__(self, triplets):
        texts = [t.edit_text for t in triplets]
        sources = [encode(t.source, self.skeleton) for t in triplets]
        masks = self.masks_for(texts) if self.kind in ("mdm_bp", "mdm_bp_s") else None
        return sample_baseline(self.kind, self.model, self.sched, self.stats, sources, texts, self.scales,
                               batch_seed(self.seed, [t.id for t in triplets]), masks,
                               [t.target.num_frames for t in triplets])
