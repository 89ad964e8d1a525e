"""Sliding-window pair mining: candidate source/target pairs for annotation."""

import json
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .codec import canonicalize
from .errors import InvalidConfigError, MissingMotionError
from .storage import atomic_write_text, dump_json, save_motion

WINDOW_DURATIONS = (3.0, 4.0, 5.0)
MIN_WINDOW, MAX_WINDOW = 3.0, 5.0
DEDUP_THRESHOLD = 0.99
POOL_FORMAT = "motionedit-pool"

POOLED, TOO_SIMILAR, FILTERED = "pooled", "too-similar", "filtered"


@dataclass(frozen=True)
class MotionWindow:
    parent: str
    start: int   # frame, inclusive
    end: int     # frame, exclusive
    duration: float
    embedding: np.ndarray = None

    def __post_init__(self):
        if self.end <= self.start:
            raise InvalidConfigError("window end must come after start")
        if not MIN_WINDOW - 1e-9 <= self.duration <= MAX_WINDOW + 1e-9:
            raise InvalidConfigError(f"window duration {self.duration} outside [3, 5] s")

    @property
    def id(self):
        return f"{self.parent}@{self.start}-{self.end}"

    def overlaps(self, other):
        return self.parent == other.parent and self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class CandidatePair:
    source: str
    target: str
    similarity: float
    status: str


def slide_windows(m, parent="m0", durations=WINDOW_DURATIONS, stride=1.0):
    """All windows of the given durations starting every ``stride`` seconds."""
    if stride <= 0:
        raise InvalidConfigError("stride must be positive")
    total = m.num_frames / m.fps
    if total < MIN_WINDOW - 1e-9:
        warnings.warn(f"motion {parent} is {total:.2f} s long, shorter than {MIN_WINDOW} s; no windows",
                      stacklevel=2)
        return []
    out = []
    for dur in durations:
        length = int(round(dur * m.fps))
        k = 0
        while k * stride + dur <= total + 1e-9:
            start = int(round(k * stride * m.fps))
            out.append(MotionWindow(parent, start, start + length, length / m.fps))
            k += 1
    return out


def window_motion(window, motions):
    return motions[window.parent].slice(window.start, window.end)


def embed_windows(windows, motions, embedder):
    clips = [window_motion(w, motions) for w in windows]
    emb = embedder.embed_motions(clips)
    return [replace(w, embedding=e) for w, e in zip(windows, emb)]


def similarity_matrix(windows):
    emb = np.stack([w.embedding for w in windows])
    return np.clip(emb @ emb.T, -1.0, 1.0)


def mine_pairs(windows, k=2, dedup=DEDUP_THRESHOLD, include_filtered=False, similarity=None):
    """Top-``k`` neighbours per query window after dropping near-duplicates.

    Neighbours with similarity >= ``dedup`` come back as too-similar records;
    same-parent overlapping windows are never candidates (returned as filtered
    records only when ``include_filtered``). ``similarity`` overrides the
    cosine matrix computed from the window embeddings.
    """
    if len(windows) < 2:
        raise InvalidConfigError("need at least two windows")
    sims = similarity_matrix(windows) if similarity is None else np.asarray(similarity, dtype=np.float64)
    if sims.shape != (len(windows), len(windows)):
        raise InvalidConfigError("similarity matrix does not match the window count")
    parents = np.array([w.parent for w in windows])
    starts = np.array([w.start for w in windows])
    ends = np.array([w.end for w in windows])
    out = []
    for i, q in enumerate(windows):
        blocked = (parents == q.parent) & (starts < q.end) & (q.start < ends)
        blocked[i] = True
        if include_filtered:
            out += [CandidatePair(q.id, windows[j].id, float(sims[i, j]), FILTERED)
                    for j in np.flatnonzero(blocked) if j != i]
        order = np.argsort(-sims[i], kind="stable")
        pooled = 0
        for j in order:
            if blocked[j]:
                continue
            s = float(sims[i, j])
            if s >= dedup:
                out.append(CandidatePair(q.id, windows[j].id, s, TOO_SIMILAR))
                continue
            out.append(CandidatePair(q.id, windows[j].id, s, POOLED))
            pooled += 1
            if pooled == k:
                break
    return out


def align_pair(source, target):
    """Put both motions at the origin with zero initial heading."""
    return canonicalize(source), canonicalize(target)


def export_pool(pairs, windows, motions, root, seed=None):
    """Write aligned clips and a manifest for pooled pairs; returns the manifest dict."""
    root = Path(root)
    by_id = {w.id: w for w in windows}
    if any(p.status != POOLED for p in pairs):
        raise InvalidConfigError("export_pool only accepts pooled pairs")
    missing = {by_id[w].parent for p in pairs for w in (p.source, p.target) if by_id[w].parent not in motions}
    if missing:
        raise MissingMotionError(missing)
    ordered = sorted(pairs, key=lambda p: (p.source, -p.similarity, p.target))
    records = []
    if ordered:
        (root / "clips").mkdir(parents=True, exist_ok=True)
    for n, p in enumerate(ordered):
        sw, tw = by_id[p.source], by_id[p.target]
        src, tgt = align_pair(window_motion(sw, motions), window_motion(tw, motions))
        pid = f"pair{n:05d}"
        paths = {"source": f"clips/{pid}_source.mfxa", "target": f"clips/{pid}_target.mfxa"}
        save_motion(root / paths["source"], src)
        save_motion(root / paths["target"], tgt)
        records.append({
            "pair_id": pid, "similarity": p.similarity,
            "source_window": _window_record(sw), "target_window": _window_record(tw),
            "source_clip": paths["source"], "target_clip": paths["target"],
        })
    manifest = {"format": POOL_FORMAT, "version": 1, "seed": seed, "records": records}
    root.mkdir(parents=True, exist_ok=True)
    atomic_write_text(root / "manifest.json", dump_json(manifest))
    return manifest


def _window_record(w):
    return {"id": w.id, "parent": w.parent, "start": w.start, "end": w.end, "duration": w.duration}


def load_pool(root):
    manifest = json.loads((Path(root) / "manifest.json").read_text())
    if manifest.get("format") != POOL_FORMAT or manifest.get("version") != 1:
        raise InvalidConfigError(f"{root}: not a version-1 pool manifest")
    return manifest
