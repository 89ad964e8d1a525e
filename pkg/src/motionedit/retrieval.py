"""Contrastive motion/text embedder and the motion-editing retrieval benchmark."""

import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .codec import (
    FEATURE_DIM, FeatureSequence, FeatureStats, Motion, canonicalize, compute_stats, decode, encode, normalize,
)
from .denoiser import PAD_ID, sinusoidal, tokenize
from .errors import InvalidConfigError, ShapeError, SingularCovarianceWarning
from .storage import atomic_write_text, dump_json

EMBEDDER_VERSION = "motionedit-embedder/1"
REPORT_FORMAT = "motionedit-eval-report"
COV_EPS = 1e-6
EMBED_STD_FLOOR = 1e-2  # raw feature units (6D entries, meters)


@dataclass
class EmbedderConfig:
    latent_dim: int = 128
    d_model: int = 64
    layers: int = 2
    heads: int = 4
    ff_dim: int = 128
    dropout: float = 0.1
    vocab_size: int = 4096
    temperature: float = 0.1
    epochs: int = 30
    batch_size: int = 64
    lr: float = 1e-3

    def __post_init__(self):
        if self.d_model % self.heads or self.d_model % 2:
            raise InvalidConfigError("embedder d_model must be even and divisible by heads")
        if self.temperature <= 0:
            raise InvalidConfigError("temperature must be positive")


class MotionEmbedder(nn.Module):
    """Maps normalized feature sequences and texts into a shared unit sphere."""

    version = EMBEDDER_VERSION

    def __init__(self, config=None, stats=None):
        super().__init__()
        self.config = cfg = config or EmbedderConfig()
        self.stats = stats
        d = cfg.d_model
        self.motion_in = nn.Linear(FEATURE_DIM, d)
        layer = nn.TransformerEncoderLayer(d, cfg.heads, cfg.ff_dim, cfg.dropout, activation="gelu",
                                           batch_first=True)
        self.motion_encoder = nn.TransformerEncoder(layer, cfg.layers, enable_nested_tensor=False)
        self.motion_out = nn.Linear(d, cfg.latent_dim)
        self.word = nn.Embedding(cfg.vocab_size, d, padding_idx=PAD_ID)
        self.text_mlp = nn.Sequential(nn.Linear(d, d), nn.GELU(), nn.Linear(d, cfg.latent_dim))

    def encode_motion(self, x, mask):
        h = self.motion_in(x) + sinusoidal(torch.arange(x.shape[1]), self.config.d_model).float()
        h = self.motion_encoder(h, src_key_padding_mask=~mask)
        m = mask.unsqueeze(-1).float()
        pooled = (h * m).sum(1) / m.sum(1).clamp(min=1.0)
        return F.normalize(self.motion_out(pooled), dim=-1)

    def encode_text(self, texts):
        ids = [tokenize(t, self.config.vocab_size) for t in texts]
        width = max(len(i) for i in ids)
        tok = torch.full((len(ids), width), PAD_ID, dtype=torch.long)
        for r, seq in enumerate(ids):
            tok[r, : len(seq)] = torch.tensor(seq)
        m = (tok != PAD_ID).unsqueeze(-1).float()
        bag = (self.word(tok) * m).sum(1) / m.sum(1).clamp(min=1.0)
        return F.normalize(self.text_mlp(bag), dim=-1)

    def features(self, motion):
        """Normalized embedder input for a Motion (canonicalized first)."""
        if self.stats is None:
            raise InvalidConfigError("embedder has no feature stats; train or load it first")
        return normalize(encode(canonicalize(motion)), self.stats).data

    @torch.no_grad()
    def embed_arrays(self, arrays, batch_size=128):
        was = self.training
        self.eval()
        out = []
        for i in range(0, len(arrays), batch_size):
            x, mask = _pad(arrays[i: i + batch_size])
            out.append(self.encode_motion(x, mask).double().numpy())
        self.train(was)
        return np.concatenate(out) if out else np.zeros((0, self.config.latent_dim))

    def embed_motions(self, motions, batch_size=128):
        return self.embed_arrays([self.features(m) for m in motions], batch_size)

    @torch.no_grad()
    def embed_texts(self, texts):
        was = self.training
        self.eval()
        out = self.encode_text(list(texts)).double().numpy()
        self.train(was)
        return out


def _pad(arrays):
    lengths = [len(a) for a in arrays]
    x = torch.zeros(len(arrays), max(lengths), FEATURE_DIM)
    for i, a in enumerate(arrays):
        x[i, : len(a)] = torch.as_tensor(a, dtype=torch.float32)
    mask = torch.arange(max(lengths))[None, :] < torch.tensor(lengths)[:, None]
    return x, mask


def contrastive_loss(motion_emb, text_emb, texts, temperature):
    """Symmetric InfoNCE; negatives sharing the positive's exact text are masked out."""
    logits = motion_emb @ text_emb.T / temperature
    same = np.array([[a == b for b in texts] for a in texts])
    np.fill_diagonal(same, False)
    logits = logits.masked_fill(torch.from_numpy(same), float("-inf"))
    target = torch.arange(len(texts))
    return 0.5 * (F.cross_entropy(logits, target) + F.cross_entropy(logits.T, target))


def embedder_stats(stats, floor=EMBED_STD_FLOOR):
    """Stats with a coarse std floor: dims that never move in training must not
    turn numerically tiny deviations of generated motions into huge inputs."""
    return FeatureStats(stats.mean, np.maximum(stats.std, floor), stats.count, stats.constant)


def train_embedder(pairs, config=None, seed=0, heldout=None, log=None):
    """Fit a MotionEmbedder on (Motion, text) pairs.

    Returns the embedder; ``embedder.history`` holds per-epoch train loss and,
    when ``heldout`` pairs are given, the held-out loss.
    """
    if len(pairs) < 2:
        raise InvalidConfigError("need at least two (motion, text) pairs")
    cfg = config or EmbedderConfig()
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    feats = [encode(canonicalize(m)) for m, _ in pairs]
    stats = embedder_stats(compute_stats(feats))
    model = MotionEmbedder(cfg, stats)
    arrays = [normalize(f, stats).data for f in feats]
    texts = [t for _, t in pairs]
    held = None
    if heldout:
        held = ([model.features(m) for m, _ in heldout], [t for _, t in heldout])
    opt = torch.optim.AdamW(model.parameters(), lr=cfg.lr, weight_decay=1e-4)
    history = {"train": [], "heldout": []}
    bs = min(cfg.batch_size, len(pairs))
    for epoch in range(cfg.epochs):
        model.train()
        order = rng.permutation(len(pairs))
        total, count = 0.0, 0
        for i in range(0, len(order) - bs + 1, bs):
            idx = order[i: i + bs]
            x, mask = _pad([arrays[j] for j in idx])
            bt = [texts[j] for j in idx]
            loss = contrastive_loss(model.encode_motion(x, mask), model.encode_text(bt), bt, cfg.temperature)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
            count += len(idx)
        history["train"].append(total / count)
        if held is not None:
            history["heldout"].append(_eval_loss(model, *held))
        if log:
            log(f"embedder epoch {epoch + 1}/{cfg.epochs} loss {history['train'][-1]:.4f}")
    model.eval()
    model.history = history
    return model


@torch.no_grad()
def _eval_loss(model, arrays, texts, bs=64):
    model.eval()
    total, count = 0.0, 0
    for i in range(0, len(arrays) - 1, bs):
        a, t = arrays[i: i + bs], texts[i: i + bs]
        if len(a) < 2:
            break
        x, mask = _pad(a)
        total += float(contrastive_loss(model.encode_motion(x, mask), model.encode_text(t), t,
                                        model.config.temperature)) * len(a)
        count += len(a)
    model.train()
    return total / max(count, 1)


def save_embedder(path, model):
    torch.save({"format_version": EMBEDDER_VERSION, "config": asdict(model.config),
                "state_dict": model.state_dict(), "stats": model.stats.to_dict()}, path)


def load_embedder(path):
    blob = torch.load(path, map_location="cpu", weights_only=False)
    if blob.get("format_version") != EMBEDDER_VERSION:
        raise InvalidConfigError(f"{path}: unsupported embedder format {blob.get('format_version')!r}")
    model = MotionEmbedder(EmbedderConfig(**blob["config"]), FeatureStats.from_dict(blob["stats"]))
    model.load_state_dict(blob["state_dict"])
    model.eval()
    return model


# ---------------------------------------------------------------- ranking


def rank_gallery(query, gallery):
    """1-based rank of every gallery item by descending cosine similarity (ties by index)."""
    query = np.asarray(query, dtype=np.float64)
    gallery = np.asarray(gallery, dtype=np.float64)
    if gallery.ndim != 2 or query.shape != gallery.shape[1:]:
        raise ShapeError(f"query {query.shape} does not match gallery {gallery.shape}")
    sims = gallery @ query
    order = np.argsort(-sims, kind="stable")
    ranks = np.empty(len(gallery), dtype=int)
    ranks[order] = np.arange(1, len(gallery) + 1)
    return ranks


def true_ranks(queries, gallery):
    """Rank of gallery[i] for queries[i], with the same tie-break as rank_gallery."""
    queries = np.asarray(queries, dtype=np.float64)
    gallery = np.asarray(gallery, dtype=np.float64)
    if queries.shape != gallery.shape:
        raise ShapeError(f"queries {queries.shape} do not match gallery {gallery.shape}")
    # same matrix-vector product as rank_gallery so near-ties resolve identically
    return np.array([rank_gallery(q, gallery)[i] for i, q in enumerate(queries)], dtype=int)


def recall_summary(ranks):
    ranks = np.asarray(ranks)
    out = {f"R@{k}": float(100.0 * np.mean(ranks <= k)) for k in (1, 2, 3)}
    out["AvgR"] = float(np.mean(ranks))
    return out


# ---------------------------------------------------------------- metrics


def _sqrt_psd(c):
    w, v = np.linalg.eigh(c)
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.T


def fid(features_a, features_b):
    """Frechet distance between Gaussian fits of two embedding sets."""
    a, b = np.asarray(features_a, dtype=np.float64), np.asarray(features_b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise InvalidConfigError("FID needs at least two samples per set")
    if a.shape[1] != b.shape[1]:
        raise ShapeError("embedding dimensions differ")
    mu_a, mu_b = a.mean(0), b.mean(0)
    ca, cb = np.cov(a, rowvar=False), np.cov(b, rowvar=False)
    ca, cb = np.atleast_2d(ca), np.atleast_2d(cb)
    if min(np.linalg.eigvalsh(ca).min(), np.linalg.eigvalsh(cb).min()) < COV_EPS:
        warnings.warn("singular covariance in FID; adding 1e-6 * I", SingularCovarianceWarning, stacklevel=2)
        ca = ca + COV_EPS * np.eye(len(ca))
        cb = cb + COV_EPS * np.eye(len(cb))
    sa = _sqrt_psd(ca)
    cross = np.trace(_sqrt_psd(sa @ cb @ sa))
    return float(np.sum((mu_a - mu_b) ** 2) + np.trace(ca) + np.trace(cb) - 2 * cross)


def _resample_positions(pos, n):
    if len(pos) == n:
        return pos
    u = np.linspace(0, len(pos) - 1, n)
    i0 = np.floor(u).astype(int)
    i1 = np.minimum(i0 + 1, len(pos) - 1)
    w = (u - i0)[:, None, None]
    return pos[i0] * (1 - w) + pos[i1] * w


def l2_joints(gen, ref, skeleton=None):
    """Mean per-joint Euclidean distance in cm; the shorter motion is linearly resampled."""
    a, b = gen.joints(skeleton), ref.joints(skeleton)
    n = max(len(a), len(b))
    a, b = _resample_positions(a, n), _resample_positions(b, n)
    return float(100.0 * np.linalg.norm(a - b, axis=-1).mean())


# ---------------------------------------------------------------- protocol


@dataclass
class EvalReport:
    target: dict
    source: dict
    fid: float
    l2_cm: float
    seed: int
    gallery_size: int
    batches: int
    model: str = ""
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for bench in (self.target, self.source):
            if not (bench["R@1"] <= bench["R@2"] <= bench["R@3"] <= 100.0 and bench["AvgR"] >= 1.0):
                raise InvalidConfigError(f"inconsistent retrieval summary {bench}")

    def to_dict(self):
        d = asdict(self)
        d.update(format=REPORT_FORMAT, version=1)
        return d

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != REPORT_FORMAT or d.get("version") != 1:
            raise InvalidConfigError("not a version-1 eval report")
        d = {k: v for k, v in d.items() if k not in ("format", "version")}
        return cls(**d)

    def save(self, path):
        atomic_write_text(path, dump_json(self.to_dict()))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def format_table(reports):
    """Rows of R@1 R@2 R@3 AvgR for generated-to-target then generated-to-source."""
    head = f"{'model':<12}" + " | ".join(f"{'R@1':>6} {'R@2':>6} {'R@3':>6} {'AvgR':>6}" for _ in range(2))
    lines = [f"{'':<12}{'generated-to-target':^30}| {'generated-to-source':^29}", head, "-" * len(head)]
    for name, r in reports.items():
        cells = [" ".join(f"{b[k]:6.2f}" for k in ("R@1", "R@2", "R@3", "AvgR")) for b in (r.target, r.source)]
        lines.append(f"{name:<12}" + " | ".join(cells))
    return "\n".join(lines)


def gallery_batches(n, gallery_size=32, seed=0):
    """Fixed seeded partition of range(n) into full galleries (remainder dropped)."""
    if gallery_size is None:
        gallery_size = n
    if n < gallery_size or gallery_size < 1:
        raise InvalidConfigError(f"test set of {n} is smaller than gallery size {gallery_size}")
    order = np.random.default_rng(seed).permutation(n)
    k = n // gallery_size
    return [order[i * gallery_size: (i + 1) * gallery_size] for i in range(k)]


def as_motion(x, fps):
    if isinstance(x, Motion):
        return x
    if isinstance(x, FeatureSequence):
        return decode(x, fps=fps)
    raise TypeError(f"sampler returned {type(x).__name__}, expected Motion or FeatureSequence")


def evaluate_editing(sampler, testset, embedder, gallery_size=32, seed=0, skeleton=None, name=""):
    """Generated-to-target and generated-to-source retrieval plus FID and L2.

    ``sampler(triplets)`` is called once per gallery with the triplets of that
    gallery and returns one Motion or denormalized FeatureSequence each.
    """
    batches = gallery_batches(len(testset), gallery_size, seed)
    t_ranks, s_ranks, gen_emb, tgt_emb, l2 = [], [], [], [], []
    for idx in batches:
        trips = [testset[i] for i in idx]
        gens = [as_motion(g, trips[0].source.fps) for g in sampler(trips)]
        if len(gens) != len(trips):
            raise ShapeError(f"sampler returned {len(gens)} motions for {len(trips)} triplets")
        g = embedder.embed_motions(gens)
        t = embedder.embed_motions([tr.target for tr in trips])
        s = embedder.embed_motions([tr.source for tr in trips])
        t_ranks.append(true_ranks(g, t))
        s_ranks.append(true_ranks(g, s))
        gen_emb.append(g)
        tgt_emb.append(t)
        l2 += [l2_joints(a, tr.target, skeleton) for a, tr in zip(gens, trips)]
    size = len(batches[0])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SingularCovarianceWarning)
        fid_value = fid(np.concatenate(gen_emb), np.concatenate(tgt_emb))
    return EvalReport(recall_summary(np.concatenate(t_ranks)), recall_summary(np.concatenate(s_ranks)),
                      fid_value, float(np.mean(l2)), int(seed), size, len(batches), name,
                      {"fid_regularized": bool(caught)})


def self_retrieval(embedder, pairs, gallery_size=32, seed=0):
    """Motion-to-text R@1 (percent) over seeded galleries of pairs with distinct texts."""
    by_text = {}
    for i, (_, t) in enumerate(pairs):
        by_text.setdefault(t, []).append(i)
    rng = np.random.default_rng(seed)
    keys = list(by_text)
    if len(keys) < gallery_size:
        raise InvalidConfigError("not enough distinct texts for a gallery")
    hits, total = 0, 0
    for _ in range(max(1, len(pairs) // gallery_size)):
        chosen = rng.choice(len(keys), gallery_size, replace=False)
        idx = [by_text[keys[c]][rng.integers(len(by_text[keys[c]]))] for c in chosen]
        m = embedder.embed_motions([pairs[i][0] for i in idx])
        t = embedder.embed_texts([pairs[i][1] for i in idx])
        hits += int(np.sum(true_ranks(m, t) == 1))
        total += gallery_size
    return 100.0 * hits / total


def chance_recall(gallery_size=32, k=1):
    return 100.0 * min(k, gallery_size) / gallery_size


def expected_random_avg_rank(gallery_size=32):
    return (gallery_size + 1) / 2.0

