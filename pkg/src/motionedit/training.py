"""Denoiser training loops, checkpoints and batch samplers."""

import time
import zlib
from dataclasses import dataclass

import numpy as np
import torch

from .codec import FeatureStats, compute_stats, encode, normalize
from .denoiser import DenoiserConfig, TMEDDenoiser
from .diffusion import (
    ConditionSet, GuidanceScales, TripletBatch, cosine_schedule, pad_features, sample, training_loss,
)
from .errors import InvalidConfigError

CHECKPOINT_VERSION = "motionedit-checkpoint/1"
KINDS = ("tmed", "mdm")


@dataclass
class TrainConfig:
    epochs: int = 1000
    batch_size: int = 32
    lr: float = 1e-3
    weight_decay: float = 0.0
    grad_clip: float = 1.0
    seed: int = 0
    max_minutes: float = None  # wall-clock cap; training stops after the current epoch

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.lr <= 0:
            raise InvalidConfigError("epochs, batch_size and lr must be positive")


@dataclass
class EncodedTriplet:
    id: str
    source: np.ndarray  # normalized (F_S, 207)
    target: np.ndarray  # normalized (F_T, 207)
    text: str


def fit_stats(triplets, skeleton=None):
    """Feature stats over every source and target frame of the training triplets."""
    return compute_stats([encode(m, skeleton) for t in triplets for m in (t.source, t.target)])


def encode_triplets(triplets, stats, skeleton=None):
    return [EncodedTriplet(t.id, normalize(encode(t.source, skeleton), stats).data,
                           normalize(encode(t.target, skeleton), stats).data, t.edit_text) for t in triplets]


def collate(items, kind):
    target, mask = pad_features([it.target for it in items])
    texts = [it.text for it in items]
    if kind == "tmed":
        src, src_mask = pad_features([it.source for it in items])
        cond = ConditionSet(texts, src, src_mask)
    else:
        cond = ConditionSet(texts)
    return TripletBatch(target, mask, cond, True, [it.id for it in items])


def train_denoiser(triplets, kind="tmed", config=None, train_config=None, sched=None, stats=None,
                   skeleton=None, log=None):
    """Train a TMED (source + text) or MDM (text only) denoiser from scratch.

    Returns (model, stats, history) with per-epoch mean losses in history.
    """
    if kind not in KINDS:
        raise InvalidConfigError(f"unknown model kind {kind!r}; expected one of {KINDS}")
    if not triplets:
        raise InvalidConfigError("no training triplets")
    cfg = config or DenoiserConfig()
    tc = train_config or TrainConfig()
    sched = sched or cosine_schedule(300)
    stats = stats or fit_stats(triplets, skeleton)
    data = encode_triplets(triplets, stats, skeleton)
    torch.manual_seed(tc.seed)
    rng = np.random.default_rng(tc.seed)
    model = TMEDDenoiser(cfg)
    opt = torch.optim.AdamW(model.parameters(), lr=tc.lr, weight_decay=tc.weight_decay)
    history = []
    start = time.time()
    model.train()
    for epoch in range(tc.epochs):
        order = rng.permutation(len(data))
        total, count = 0.0, 0
        for i in range(0, len(order), tc.batch_size):
            batch = collate([data[j] for j in order[i: i + tc.batch_size]], kind)
            b = batch.target.shape[0]
            t = torch.from_numpy(rng.integers(1, sched.num_steps + 1, size=b))
            eps = torch.from_numpy(rng.standard_normal(batch.target.shape).astype(np.float32))
            loss = training_loss(model, batch, t, eps, rng, sched)
            opt.zero_grad()
            loss.backward()
            if tc.grad_clip:
                torch.nn.utils.clip_grad_norm_(model.parameters(), tc.grad_clip)
            opt.step()
            total += loss.item() * b
            count += b
        history.append(total / count)
        if log:
            log(f"{kind} epoch {epoch + 1}/{tc.epochs} loss {history[-1]:.4f}")
        if tc.max_minutes is not None and time.time() - start > 60 * tc.max_minutes:
            break
    model.eval()
    return model, stats, history


def save_checkpoint(path, model, stats, sched, kind, seed=None, extra=None):
    torch.save({
        "format_version": CHECKPOINT_VERSION, "kind": kind, "seed": seed,
        "denoiser": model.config.to_dict(), "state_dict": model.state_dict(),
        "schedule": sched.to_dict(), "stats": stats.to_dict(), "extra": extra or {},
    }, path)


def load_checkpoint(path):
    """Returns (model, stats, schedule, meta)."""
    blob = torch.load(path, map_location="cpu", weights_only=False)
    if blob.get("format_version") != CHECKPOINT_VERSION:
        raise InvalidConfigError(f"{path}: unsupported checkpoint format {blob.get('format_version')!r}")
    model = TMEDDenoiser(DenoiserConfig(**blob["denoiser"]))
    model.load_state_dict(blob["state_dict"])
    model.eval()
    sched = cosine_schedule(blob["schedule"]["steps"])
    meta = {k: blob[k] for k in ("kind", "seed", "extra")}
    return model, FeatureStats.from_dict(blob["stats"]), sched, meta


def batch_seed(seed, ids):
    """Deterministic per-gallery seed so repeated evaluations draw the same noise."""
    return (int(seed) * 1_000_003 + zlib.crc32("|".join(ids).encode())) % (2 ** 31)


class TMEDSampler:
    """Evaluation sampler: edits each source with its text at the ground-truth target length."""

    def __init__(self, model, stats, sched, scales=GuidanceScales(), seed=0, skeleton=None):
        self.model, self.stats, self.sched = model, stats, sched
        self.scales, self.seed, self.skeleton = scales, seed, skeleton

    def __call__(self, triplets):
        sources = [normalize(encode(t.source, self.skeleton), self.stats) for t in triplets]
        lengths = [t.target.num_frames for t in triplets]
        return sample(self.model, self.sched, self.stats, sources, [t.edit_text for t in triplets],
                      self.scales, lengths, batch_seed(self.seed, [t.id for t in triplets]))

