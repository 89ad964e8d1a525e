"""Independent reference implementations shared by the unit and acceptance tests."""

import numpy as np
import torch

from motionedit.mining import MotionWindow


def brute_force_ranks(sims):
    n = len(sims)
    return [1 + sum(1 for j in range(n) if sims[j] > sims[i] or (sims[j] == sims[i] and j < i)) for i in range(n)]


def mining_oracle(windows, k, dedup):
    """Plain double loop over every ordered window pair."""
    out = []
    for i, q in enumerate(windows):
        cands = []
        for j, w in enumerate(windows):
            if i == j or (q.parent == w.parent and q.start < w.end and w.start < q.end):
                continue
            cands.append((-float(np.dot(q.embedding, w.embedding)), j))
        cands.sort()
        pooled = 0
        for neg, j in cands:
            s = min(1.0, max(-1.0, -neg))
            if s >= dedup:
                out.append((q.id, windows[j].id, "too-similar"))
            elif pooled < k:
                out.append((q.id, windows[j].id, "pooled"))
                pooled += 1
    return out


def synthetic_window_corpus(rng, n=500, dim=16):
    centers = rng.normal(size=(40, dim))
    emb = centers[rng.integers(40, size=n)] + rng.normal(scale=0.05, size=(n, dim))
    emb[::7] = emb[1::7][: len(emb[::7])]  # exact duplicates
    emb /= np.linalg.norm(emb, axis=1, keepdims=True)
    wins = []
    for i in range(n):
        parent = f"m{i // 10}"
        start = 20 * (i % 10)
        wins.append(MotionWindow(parent, start, start + 60 + 20 * (i % 3), (60 + 20 * (i % 3)) / 20, emb[i]))
    return wins


class StubDenoiser:
    """Returns 0 for (none, none), 1 for (source, none), 3 for (source, text) per sample."""

    def __init__(self, values=(0.0, 1.0, 3.0), text_only=2.0):
        self.values = values
        self.text_only = text_only
        self.calls = []

    def __call__(self, x_t, x_mask, t, cond):
        self.calls.append((cond.drop_text.copy(), cond.drop_source.copy()))
        out = torch.empty(x_t.shape, dtype=torch.float64)
        for i in range(x_t.shape[0]):
            dt, ds = cond.drop_text[i], cond.drop_source[i]
            v = (self.values[0] if dt and ds else self.values[1] if dt else
                 self.values[2] if not ds else self.text_only)
            out[i] = v + 0.01 * x_t[i]
        return out
