"""Edit triplets, dataset splits and the on-disk triplet store.

Store layout (``root/``):

    manifest.json   {"format": "motionedit-triplets", "version": 1, "fps", "seed", "records": [...]}
    texts.jsonl     one {"id", "edit_text"} object per line, manifest order
    motions/<id>_source.mfxa, motions/<id>_target.mfxa   packed float64 motions
"""

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidConfigError
from .storage import atomic_write_text, dump_json, load_motion, save_motion

SPLITS = ("train", "val", "test")
DEFAULT_RATIOS = (0.80, 0.05, 0.15)
DATA_ROOT_ENV = "MOTIONEDIT_DATA"


@dataclass
class EditTriplet:
    id: str
    source: object  # Motion
    target: object  # Motion
    edit_text: str
    split: str = "train"
    provenance: str = "synthetic"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.edit_text:
            raise InvalidConfigError(f"triplet {self.id}: edit text must be non-empty")
        if self.source.fps != self.target.fps:
            raise InvalidConfigError(f"triplet {self.id}: source and target fps differ")
        if self.split not in SPLITS:
            raise InvalidConfigError(f"triplet {self.id}: unknown split {self.split!r}")


def data_root(default="data"):
    return Path(os.environ.get(DATA_ROOT_ENV, default))


def split_counts(n, ratios=DEFAULT_RATIOS):
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise InvalidConfigError(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")
    n_train = round(n * ratios[0])
    n_val = round(n * ratios[1])
    return n_train, n_val, n - n_train - n_val


def split_dataset(triplets, ratios=DEFAULT_RATIOS, seed=0):
    """Seeded shuffle then contiguous train/val/test assignment.

    Returns the split label per input position and sets ``.split`` on triplets.
    """
    n = triplets if isinstance(triplets, int) else len(triplets)
    n_train, n_val, _ = split_counts(n, ratios)
    order = np.random.default_rng(seed).permutation(n)
    labels = [None] * n
    for rank, idx in enumerate(order):
        labels[idx] = "train" if rank < n_train else "val" if rank < n_train + n_val else "test"
    if not isinstance(triplets, int):
        for t, lab in zip(triplets, labels):
            t.split = lab
    return labels


def by_split(triplets, split):
    return [t for t in triplets if t.split == split]


def nested_subset(items, fraction, seed=0):
    """First ``round(fraction * n)`` items of a seeded permutation (nested across fractions)."""
    if not 0 < fraction <= 1:
        raise InvalidConfigError("fraction must be in (0, 1]")
    order = np.random.default_rng(seed).permutation(len(items))
    k = max(1, int(math.floor(fraction * len(items) + 0.5)))
    return [items[i] for i in sorted(order[:k])]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def save_triplets(root, triplets, seed=None):
    root = Path(root)
    (root / "motions").mkdir(parents=True, exist_ok=True)
    fps = {t.source.fps for t in triplets}
    if len(fps) > 1:
        raise InvalidConfigError("all triplets in a store must share one fps")
    records, texts = [], []
    for t in triplets:
        src, tgt = f"motions/{t.id}_source.mfxa", f"motions/{t.id}_target.mfxa"
        save_motion(root / src, t.source)
        save_motion(root / tgt, t.target)
        records.append({"id": t.id, "split": t.split, "provenance": t.provenance,
                        "source": src, "target": tgt, "meta": _jsonable(t.meta)})
        texts.append(json.dumps({"id": t.id, "edit_text": t.edit_text}, ensure_ascii=False))
    manifest = {"format": "motionedit-triplets", "version": 1, "fps": fps.pop() if fps else 20.0,
                "seed": seed, "records": records}
    atomic_write_text(root / "texts.jsonl", "\n".join(texts) + ("\n" if texts else ""))
    atomic_write_text(root / "manifest.json", dump_json(manifest))


def load_triplets(root, split=None):
    root = Path(root)
    manifest = json.loads((root / "manifest.json").read_text())
    if manifest.get("format") != "motionedit-triplets" or manifest.get("version") != 1:
        raise InvalidConfigError(f"{root}: not a version-1 triplet store")
    texts = {}
    for line in (root / "texts.jsonl").read_text(encoding="utf-8").splitlines():
        if line.strip():
            rec = json.loads(line)
            texts[rec["id"]] = rec["edit_text"]
    fps = manifest["fps"]
    out = []
    for rec in manifest["records"]:
        if split is not None and rec["split"] != split:
            continue
        out.append(EditTriplet(rec["id"], load_motion(root / rec["source"], fps), load_motion(root / rec["target"], fps),
                               texts[rec["id"]], rec["split"], rec["provenance"], rec.get("meta", {})))
    return out
