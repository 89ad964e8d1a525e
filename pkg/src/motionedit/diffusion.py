"""DDPM machinery with x0-prediction and two-way classifier-free guidance."""

import math
from dataclasses import dataclass, field, replace

import numpy as np
import torch

from .codec import FEATURE_DIM, FeatureSequence, denormalize
from .errors import InvalidConfigError, MustNormalizeError, ShapeError

# categorical condition-dropout events: keep all, drop source, drop text, drop both
DROPOUT_PROBS = (0.85, 0.05, 0.05, 0.05)


@dataclass(frozen=True)
class NoiseSchedule:
    betas: np.ndarray      # (N,)
    alpha_bar: np.ndarray  # (N + 1,), alpha_bar[0] == 1

    @property
    def num_steps(self):
        return len(self.betas)

    @classmethod
    def from_betas(cls, betas, validate=True):
        betas = np.asarray(betas, dtype=np.float64)
        alpha_bar = np.concatenate([[1.0], np.cumprod(1.0 - betas)])
        sched = cls(betas, alpha_bar)
        if validate:
            sched.check()
        return sched

    def check(self):
        if not np.all((self.betas > 0) & (self.betas < 1)):
            raise InvalidConfigError("betas must lie in (0, 1)")
        if self.alpha_bar[0] != 1.0 or not np.all(np.diff(self.alpha_bar) < 0):
            raise InvalidConfigError("alpha_bar must start at 1 and strictly decrease")

    def posterior(self, t):
        """(coef_x0, coef_xt, variance) of q(x_{t-1} | x_t, x0)."""
        ab_t, ab_prev = self.alpha_bar[t], self.alpha_bar[t - 1]
        beta = self.betas[t - 1]
        denom = 1.0 - ab_t
        if denom <= 0.0:
            # noiseless degenerate schedule: the step is the identity on x_t
            return 0.0, 1.0, 0.0
        coef_x0 = math.sqrt(ab_prev) * beta / denom
        coef_xt = math.sqrt(1.0 - beta) * (1.0 - ab_prev) / denom
        var = beta * (1.0 - ab_prev) / denom
        return coef_x0, coef_xt, var

    def to_dict(self):
        return {"kind": "cosine", "steps": self.num_steps}


def cosine_schedule(num_steps=300, s=0.008, max_beta=0.999):
    """Squared-cosine alpha_bar with offset ``s``; betas clipped at ``max_beta``."""
    if num_steps < 1:
        raise InvalidConfigError("need at least one diffusion step")

    def f(u):
        return math.cos((u + s) / (1 + s) * math.pi / 2) ** 2

    betas = [min(1 - f((i + 1) / num_steps) / f(i / num_steps), max_beta) for i in range(num_steps)]
    return NoiseSchedule.from_betas(betas)


@dataclass(frozen=True)
class GuidanceScales:
    text: float = 2.0
    source: float = 2.0

    def __post_init__(self):
        for v in (self.text, self.source):
            if not (math.isfinite(v) and v >= 0):
                raise InvalidConfigError("guidance scales must be finite and non-negative")


@dataclass
class ConditionSet:
    """Per-sample conditions. An empty text or an all-False source mask row is the null condition."""

    texts: list
    source: torch.Tensor = None        # (B, F_S, 207), normalized
    source_mask: torch.Tensor = None   # (B, F_S) bool
    drop_text: np.ndarray = None
    drop_source: np.ndarray = None

    def __post_init__(self):
        b = len(self.texts)
        if self.drop_text is None:
            self.drop_text = np.array([t == "" for t in self.texts], dtype=bool)
        if self.source is not None and self.source_mask is None:
            self.source_mask = torch.ones(self.source.shape[:2], dtype=torch.bool)
        if self.drop_source is None:
            if self.source is None:
                self.drop_source = np.ones(b, dtype=bool)
            else:
                self.drop_source = ~self.source_mask.any(dim=1).numpy()

    def __len__(self):
        return len(self.texts)

    def drop(self, text=None, source=None):
        """Null out conditions. ``text``/``source`` are bool or per-sample bool arrays."""
        b = len(self)
        text = np.broadcast_to(np.asarray(False if text is None else text, dtype=bool), (b,))
        source = np.broadcast_to(np.asarray(False if source is None else source, dtype=bool), (b,))
        texts = ["" if d else t for t, d in zip(self.texts, text)]
        mask = self.source_mask
        if mask is not None and source.any():
            mask = mask & ~torch.from_numpy(source.copy())[:, None]
        return replace(self, texts=texts, source_mask=mask,
                       drop_text=self.drop_text | text, drop_source=self.drop_source | source)

    def to(self, dtype):
        if self.source is None:
            return self
        return replace(self, source=self.source.to(dtype))


@dataclass
class TripletBatch:
    target: torch.Tensor        # (B, F_T, 207)
    target_mask: torch.Tensor   # (B, F_T) bool
    cond: ConditionSet
    normalized: bool = True
    ids: list = field(default_factory=list)


def sample_condition_dropout(rng, n):
    """One categorical draw per sample -> (drop_text, drop_source) bool arrays."""
    event = rng.choice(4, size=n, p=DROPOUT_PROBS)
    drop_source = (event == 1) | (event == 3)
    drop_text = (event == 2) | (event == 3)
    return drop_text, drop_source


def _ab(sched, t, like):
    t = torch.as_tensor(t)
    ab = torch.as_tensor(sched.alpha_bar, dtype=like.dtype)[t]
    return ab.reshape(ab.shape + (1,) * (like.dim() - ab.dim()))


def q_sample(x0, t, eps, sched):
    """sqrt(alpha_bar[t]) * x0 + sqrt(1 - alpha_bar[t]) * eps; ``t`` scalar or (B,)."""
    if eps.shape != x0.shape:
        raise ShapeError(f"noise shape {tuple(eps.shape)} != signal shape {tuple(x0.shape)}")
    t_arr = np.asarray(t)
    if np.any(t_arr < 0) or np.any(t_arr > sched.num_steps):
        raise InvalidConfigError(f"timestep out of range [0, {sched.num_steps}]")
    ab = _ab(sched, t, x0)
    return ab.sqrt() * x0 + (1 - ab).sqrt() * eps


def masked_mse(pred, target, mask):
    """Mean squared error over unmasked frames and all feature dims."""
    m = mask.to(pred.dtype).unsqueeze(-1)
    return ((pred - target) ** 2 * m).sum() / (m.sum() * pred.shape[-1])


def training_loss(denoiser, batch, t, eps, dropout_rng, sched):
    """x0-prediction MSE with 5/5/5/85 condition dropout applied first."""
    if not batch.normalized:
        raise MustNormalizeError("training_loss expects normalized features")
    drop_text, drop_source = sample_condition_dropout(dropout_rng, len(batch.cond))
    cond = batch.cond.drop(text=drop_text, source=drop_source)
    x_t = q_sample(batch.target, t, eps, sched)
    pred = denoiser(x_t, batch.target_mask, torch.as_tensor(t), cond)
    return masked_mse(pred, batch.target, batch.target_mask)


def guided_x0(denoiser, x_t, x_mask, t, cond, scales):
    """Two-way guided x0 estimate.

    Combines the (none, none), (source, none) and (source, text) passes as
    e00 + s_src * (e_s - e00) + s_txt * (e_st - e_s), written in a weighted form
    so integer scales reproduce the underlying passes exactly.
    """
    uncond = cond.drop(text=True, source=True)
    full = cond
    if cond.source is None:
        e00 = denoiser(x_t, x_mask, t, uncond)
        e_l = denoiser(x_t, x_mask, t, full)
        return e_l * scales.text + e00 * (1.0 - scales.text)
    src_only = cond.drop(text=True)
    e00 = denoiser(x_t, x_mask, t, uncond)
    e_s = denoiser(x_t, x_mask, t, src_only)
    e_st = denoiser(x_t, x_mask, t, full)
    return e_st * scales.text + e_s * (scales.source - scales.text) + e00 * (1.0 - scales.source)


def ddpm_reverse_step(x_t, x0_pred, t, sched, generator=None):
    coef_x0, coef_xt, var = sched.posterior(int(t))
    mean = coef_x0 * x0_pred + coef_xt * x_t
    if t > 1:
        z = torch.randn(x_t.shape, generator=generator, dtype=x_t.dtype)
        return mean + math.sqrt(var) * z
    return mean


@dataclass
class Inpainting:
    """Hold dims where ``editable`` is False to a noised copy of ``source`` along the chain."""

    editable: torch.Tensor   # (B, 207) bool
    source: torch.Tensor     # (B, F, 207) normalized
    generator: torch.Generator = None

    def apply(self, x, t, sched):
        eps = torch.randn(self.source.shape, generator=self.generator, dtype=x.dtype)
        held = q_sample(self.source.to(x.dtype), t, eps, sched)
        return torch.where(self.editable[:, None, :], x, held)


def sample_loop(denoiser, cond, x_mask, sched, scales, generator, x_init=None, inpaint=None):
    """Run t = N..1 of guided x0 prediction + DDPM posterior steps; returns normalized x_0."""
    shape = tuple(x_mask.shape) + (FEATURE_DIM,)
    x = torch.randn(shape, generator=generator) if x_init is None else x_init
    with torch.no_grad():
        for t in range(sched.num_steps, 0, -1):
            if inpaint is not None:
                x = inpaint.apply(x, t, sched)
            tt = torch.full((shape[0],), t, dtype=torch.long)
            x0 = guided_x0(denoiser, x, x_mask, tt, cond, scales)
            x = ddpm_reverse_step(x, x0, t, sched, generator)
    return x


def lengths_to_mask(lengths):
    lengths = torch.as_tensor(lengths)
    return torch.arange(int(lengths.max()))[None, :] < lengths[:, None]


def pad_features(seqs):
    """Stack variable-length (F, 207) arrays into a zero-padded tensor plus mask."""
    lengths = [len(s) for s in seqs]
    out = torch.zeros(len(seqs), max(lengths), FEATURE_DIM)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = torch.as_tensor(np.asarray(s), dtype=torch.float32)
    return out, lengths_to_mask(lengths)


def unpad(x, mask, stats=None):
    """Split a padded batch back into FeatureSequences (denormalized if ``stats``)."""
    out = []
    for i in range(x.shape[0]):
        n = int(mask[i].sum())
        f = FeatureSequence(x[i, :n].double().numpy(), True, stats.stats_id if stats else None)
        out.append(denormalize(f, stats) if stats is not None else f)
    return out


def sample(denoiser, sched, stats, sources, texts, scales, target_lengths, seed):
    """Sample edited motions for a batch; returns denormalized FeatureSequences.

    ``sources`` is a list of normalized FeatureSequences (or None for a
    text-only model); everything is deterministic given ``seed``.
    """
    lengths = np.atleast_1d(np.asarray(target_lengths))
    if np.any(lengths < 2):
        raise InvalidConfigError("target_length must be at least 2 frames")
    if sources is not None:
        for s in sources:
            if not s.normalized:
                raise MustNormalizeError("source features must be normalized")
        src, src_mask = pad_features([s.data for s in sources])
        cond = ConditionSet(list(texts), src, src_mask)
    else:
        cond = ConditionSet(list(texts))
    x_mask = lengths_to_mask(lengths)
    gen = torch.Generator().manual_seed(int(seed))
    x = sample_loop(denoiser, cond, x_mask, sched, scales, gen)
    return unpad(x, x_mask, stats)
