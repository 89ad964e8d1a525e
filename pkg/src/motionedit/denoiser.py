"""Transformer denoiser conditioned on timestep, edit text and source motion."""

import math
import re
import warnings
import zlib
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np
import torch
from torch import nn

from .codec import FEATURE_DIM
from .errors import InvalidConfigError

PAD_ID = 0
NULL_ID = 1
MAX_TEXT_CHARS = 512
_WORD = re.compile(r"[a-z0-9']+")


@dataclass
class DenoiserConfig:
    d_model: int = 128
    layers: int = 4
    heads: int = 4
    ff_dim: int = 256
    max_text_tokens: int = 77
    max_frames: int = 128
    dropout: float = 0.1
    vocab_size: int = 4096
    text_dim: int = None  # defaults to d_model for the bundled encoder

    def __post_init__(self):
        if self.text_dim is None:
            self.text_dim = self.d_model
        if self.d_model % self.heads:
            raise InvalidConfigError("d_model must be divisible by heads")
        if self.d_model % 2:
            raise InvalidConfigError("d_model must be even for sinusoidal embeddings")
        if self.vocab_size < 3 or self.max_text_tokens < 1 or self.max_frames < 2:
            raise InvalidConfigError("invalid text/frame limits")

    def to_dict(self):
        return asdict(self)


@dataclass
class TextEncoding:
    tokens: torch.Tensor  # (B, T, d_text)
    mask: torch.Tensor    # (B, T) bool, True = real token


@lru_cache(maxsize=65536)
def tokenize(text, vocab_size=4096, max_tokens=77):
    """Hashed word ids; the empty string (null condition) is the single NULL token."""
    if len(text) > MAX_TEXT_CHARS:
        warnings.warn(f"edit text longer than {MAX_TEXT_CHARS} characters truncated", stacklevel=2)
        text = text[:MAX_TEXT_CHARS]
    words = _WORD.findall(text.lower())
    if not words:
        return (NULL_ID,)
    if len(words) > max_tokens:
        warnings.warn(f"edit text truncated to {max_tokens} tokens", stacklevel=2)
        words = words[:max_tokens]
    return tuple(2 + zlib.crc32(w.encode()) % (vocab_size - 2) for w in words)


def sinusoidal(pos, dim):
    """[sin(pos * w_i), cos(pos * w_i)] with geometric frequencies; pos: (...,)."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float64) / half)
    ang = torch.as_tensor(pos, dtype=torch.float64)[..., None] * freqs
    return torch.cat([torch.sin(ang), torch.cos(ang)], dim=-1)


class HashedTextEncoder(nn.Module):
    """Trainable bag of hashed-word embeddings, capped at ``max_tokens``."""

    def __init__(self, vocab_size=4096, dim=128, max_tokens=77):
        super().__init__()
        self.vocab_size = vocab_size
        self.max_tokens = max_tokens
        self.dim = dim
        self.embed = nn.Embedding(vocab_size, dim)

    def token_ids(self, texts):
        ids = [tokenize(t, self.vocab_size, self.max_tokens) for t in texts]
        width = max(len(i) for i in ids)
        out = torch.full((len(ids), width), PAD_ID, dtype=torch.long)
        for row, seq in enumerate(ids):
            out[row, : len(seq)] = torch.tensor(seq)
        return out, out != PAD_ID

    def forward(self, texts):
        ids, mask = self.token_ids(texts)
        return TextEncoding(self.embed(ids), mask)


class PretrainedTextAdapter(nn.Module):
    """Frozen per-text token embeddings (e.g. exported from a CLIP text tower).

    ``table`` maps text -> (T, d_text) array with T <= 77; the null condition
    is a learned token. Unknown texts raise KeyError.
    """

    def __init__(self, table, dim, max_tokens=77):
        super().__init__()
        if max_tokens != 77:
            raise InvalidConfigError("pretrained adapter expects 77-token outputs")
        self.table = {k: torch.as_tensor(np.asarray(v), dtype=torch.float32) for k, v in table.items()}
        for k, v in self.table.items():
            if v.ndim != 2 or v.shape[1] != dim or v.shape[0] > max_tokens:
                raise InvalidConfigError(f"embedding for {k!r} has shape {tuple(v.shape)}")
        self.dim = dim
        self.max_tokens = max_tokens
        self.null = nn.Parameter(torch.zeros(1, dim))

    def forward(self, texts):
        rows = [self.null if t == "" else self.table[t] for t in texts]
        width = max(r.shape[0] for r in rows)
        tokens = torch.zeros(len(rows), width, self.dim, dtype=self.null.dtype)
        mask = torch.zeros(len(rows), width, dtype=torch.bool)
        for i, r in enumerate(rows):
            tokens[i, : r.shape[0]] = r.to(tokens.dtype)
            mask[i, : r.shape[0]] = True
        return TextEncoding(tokens, mask)


class TimestepEmbedder(nn.Module):
    def __init__(self, d_model):
        super().__init__()
        self.d_model = d_model
        self.mlp = nn.Sequential(nn.Linear(d_model, d_model), nn.SiLU(), nn.Linear(d_model, d_model))

    def forward(self, t):
        emb = sinusoidal(t, self.d_model).to(self.mlp[0].weight.dtype)
        return self.mlp(emb)


class TMEDDenoiser(nn.Module):
    """Predicts clean target features from [timestep; text; source; SEP; noised target]."""

    def __init__(self, config=None, text_encoder=None):
        super().__init__()
        self.config = cfg = config or DenoiserConfig()
        d = cfg.d_model
        self.time_embed = TimestepEmbedder(d)
        self.text_encoder = text_encoder or HashedTextEncoder(cfg.vocab_size, cfg.text_dim, cfg.max_text_tokens)
        self.text_proj = nn.Linear(cfg.text_dim, d)
        self.motion_proj = nn.Linear(FEATURE_DIM, d)
        self.sep = nn.Parameter(torch.randn(d) * 0.02)
        layer = nn.TransformerEncoderLayer(d, cfg.heads, cfg.ff_dim, cfg.dropout, activation="gelu",
                                           batch_first=True)
        self.encoder = nn.TransformerEncoder(layer, cfg.layers, enable_nested_tensor=False)
        self.out_proj = nn.Linear(d, FEATURE_DIM)
        max_len = 1 + cfg.max_text_tokens + 2 * cfg.max_frames + 1
        self.register_buffer("pos_table", sinusoidal(torch.arange(max_len), d).float(), persistent=False)

    def forward(self, x_t, x_mask, t, cond):
        return self.forward_encoded(x_t, x_mask, t, self.text_encoder(cond.texts), cond.source, cond.source_mask)

    def forward_encoded(self, x_t, x_mask, t, text, source=None, source_mask=None):
        cfg = self.config
        b, f_t = x_t.shape[:2]
        if f_t > cfg.max_frames or (source is not None and source.shape[1] > cfg.max_frames):
            raise InvalidConfigError(f"motion longer than max_frames={cfg.max_frames}")
        dtype = self.motion_proj.weight.dtype
        t = torch.as_tensor(t).reshape(-1).expand(b)
        parts = [self.time_embed(t)[:, None, :], self.text_proj(text.tokens.to(dtype))]
        masks = [torch.ones(b, 1, dtype=torch.bool), text.mask]
        if source is not None:
            parts.append(self.motion_proj(source.to(dtype)))
            masks.append(source_mask)
        parts += [self.sep.expand(b, 1, -1), self.motion_proj(x_t.to(dtype))]
        masks += [torch.ones(b, 1, dtype=torch.bool), x_mask]
        seq = torch.cat(parts, dim=1)
        valid = torch.cat(masks, dim=1)
        # positions count real tokens only, so padding never shifts content
        pos = (valid.long().cumsum(dim=1) - 1).clamp(min=0)
        seq = seq + self.pos_table[pos].to(dtype)
        h = self.encoder(seq, src_key_padding_mask=~valid)
        return self.out_proj(h[:, -f_t:])


def expected_parameter_count(cfg, text_params=None):
    """Closed-form parameter count of TMEDDenoiser for ``cfg``."""
    d, ff = cfg.d_model, cfg.ff_dim
    if text_params is None:
        text_params = cfg.vocab_size * cfg.text_dim
    time = 2 * (d * d + d)
    text = text_params + cfg.text_dim * d + d
    motion = FEATURE_DIM * d + d + d * FEATURE_DIM + FEATURE_DIM
    per_layer = (3 * d * d + 3 * d) + (d * d + d) + (d * ff + ff) + (ff * d + d) + 4 * d
    return time + text + motion + d + cfg.layers * per_layer


def count_parameters(module):
    return sum(p.numel() for p in module.parameters())
