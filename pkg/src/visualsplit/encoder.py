"""Conditioned transformer encoder over patchified edge+colour planes.

The grey-level histogram conditions the network globally through two
mechanisms living in separate blocks: AdaLN-Zero modulation (scale, shift
and a zero-initialized residual gate predicted from the histogram) and
multi-head cross-attention against a small set of learned histogram tokens.
A learnable global token is prepended to the patch sequence; its output is
the image-level representation, the rest are local representations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
from torch import Tensor

ADALN = "adaln"
CROSSATTN = "crossattn"


def default_block_pattern(depth: int) -> tuple[str, ...]:
    return tuple(ADALN if i % 2 == 0 else CROSSATTN for i in range(depth))


@dataclass(frozen=True)
class EncoderConfig:
    patch_size: int = 16
    embed_dim: int = 384
    depth: int = 8
    num_heads: int = 6
    hist_token_count: int = 8
    hist_bins: int = 100
    mlp_ratio: float = 4.0
    block_pattern: tuple[str, ...] = ()

    def __post_init__(self):
        if self.embed_dim % self.num_heads != 0:
            raise ValueError("embed_dim must be divisible by num_heads")
        if not self.block_pattern:
            object.__setattr__(self, "block_pattern", default_block_pattern(self.depth))
        pattern = tuple(self.block_pattern)
        object.__setattr__(self, "block_pattern", pattern)
        if len(pattern) != self.depth:
            raise ValueError("block_pattern length must equal depth")
        if any(b not in (ADALN, CROSSATTN) for b in pattern):
            raise ValueError(f"unknown block kind in pattern {pattern}")
        if ADALN not in pattern or CROSSATTN not in pattern:
            raise ValueError("block_pattern needs at least one block of each kind")


def sincos_pos_embed_2d(embed_dim: int, grid_h: int, grid_w: int) -> Tensor:
    """Fixed 2-D sin/cos positional table, shape (grid_h*grid_w, embed_dim)."""
    if embed_dim % 4 != 0:
        raise ValueError("embed_dim must be divisible by 4 for 2-D sin/cos")

    def axis(dim, positions):
        omega = 1.0 / 10000.0 ** (np.arange(dim // 2, dtype=np.float64) / (dim // 2))
        out = np.outer(positions, omega)
        return np.concatenate([np.sin(out), np.cos(out)], axis=1)

    gy, gx = np.meshgrid(np.arange(grid_h), np.arange(grid_w), indexing="ij")
    emb = np.concatenate(
        [axis(embed_dim // 2, gy.reshape(-1)), axis(embed_dim // 2, gx.reshape(-1))],
        axis=1,
    )
    return torch.from_numpy(emb).float()


class Mlp(nn.Module):
    def __init__(self, dim: int, ratio: float = 4.0):
        super().__init__()
        hidden = int(dim * ratio)
        self.fc1 = nn.Linear(dim, hidden)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x: Tensor) -> Tensor:
        return self.fc2(self.act(self.fc1(x)))


def _modulate(x: Tensor, scale: Tensor, shift: Tensor) -> Tensor:
    return x * (1 + scale.unsqueeze(1)) + shift.unsqueeze(1)


class AdaLNBlock(nn.Module):
    """DiT-style block: both residual branches gated by zero-init gates, so a
    freshly initialized block is exactly the identity map."""

    def __init__(self, dim: int, num_heads: int, mlp_ratio: float = 4.0):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim, elementwise_affine=False, eps=1e-6)
        self.attn = nn.MultiheadAttention(dim, num_heads, batch_first=True)
        self.norm2 = nn.LayerNorm(dim, elementwise_affine=False, eps=1e-6)
        self.mlp = Mlp(dim, mlp_ratio)

    def forward(self, x: Tensor, mod: Tensor) -> Tensor:
        scale1, shift1, gate1, scale2, shift2, gate2 = mod.chunk(6, dim=-1)
        h = _modulate(self.norm1(x), scale1, shift1)
        h, _ = self.attn(h, h, h, need_weights=False)
        x = x + gate1.unsqueeze(1) * h
        h = self.mlp(_modulate(self.norm2(x), scale2, shift2))
        return x + gate2.unsqueeze(1) * h


class CrossAttnBlock(nn.Module):
    """Self-attention, then cross-attention with histogram tokens as
    keys/values, then MLP; pre-norm residuals throughout."""

    def __init__(self, dim: int, num_heads: int, mlp_ratio: float = 4.0):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim, eps=1e-6)
        self.attn = nn.MultiheadAttention(dim, num_heads, batch_first=True)
        self.norm_q = nn.LayerNorm(dim, eps=1e-6)
        self.norm_kv = nn.LayerNorm(dim, eps=1e-6)
        self.cross_attn = nn.MultiheadAttention(dim, num_heads, batch_first=True)
        self.norm2 = nn.LayerNorm(dim, eps=1e-6)
        self.mlp = Mlp(dim, mlp_ratio)

    def forward(self, x: Tensor, context: Tensor) -> Tensor:
        h = self.norm1(x)
        h, _ = self.attn(h, h, h, need_weights=False)
        x = x + h
        kv = self.norm_kv(context)
        h, _ = self.cross_attn(self.norm_q(x), kv, kv, need_weights=False)
        x = x + h
        return x + self.mlp(self.norm2(x))


class HistogramTokenizer(nn.Module):
    """Linear map from the bin-weight vector to a few tokens, each with a
    learned token-index embedding."""

    def __init__(self, num_bins: int, token_count: int, dim: int):
        super().__init__()
        self.token_count = token_count
        self.dim = dim
        self.proj = nn.Linear(num_bins, token_count * dim)
        self.index_embed = nn.Parameter(torch.zeros(token_count, dim))
        nn.init.normal_(self.index_embed, std=0.02)

    def forward(self, weights: Tensor) -> Tensor:
        tokens = self.proj(weights).reshape(-1, self.token_count, self.dim)
        return tokens + self.index_embed


@dataclass
class EncodedRepresentation:
    global_rep: Tensor  # (B, D)
    local_reps: Tensor  # (B, N, D)
    grid_size: tuple[int, int]


class ConditionedEncoder(nn.Module):
    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        d = config.embed_dim
        self.patch_embed = nn.Conv2d(3, d, config.patch_size, stride=config.patch_size)
        self.global_token = nn.Parameter(torch.zeros(1, 1, d))
        nn.init.normal_(self.global_token, std=0.02)
        self.hist_tokenizer = HistogramTokenizer(config.hist_bins, config.hist_token_count, d)
        # Shared histogram embedding feeding per-block modulation heads.
        self.cond_embed = nn.Sequential(nn.Linear(config.hist_bins, d), nn.SiLU())
        self.blocks = nn.ModuleList()
        self.mod_heads = nn.ModuleList()
        for kind in config.block_pattern:
            if kind == ADALN:
                self.blocks.append(AdaLNBlock(d, config.num_heads, config.mlp_ratio))
                head = nn.Linear(d, 6 * d)
                nn.init.zeros_(head.weight)
                nn.init.zeros_(head.bias)
                self.mod_heads.append(head)
            else:
                self.blocks.append(CrossAttnBlock(d, config.num_heads, config.mlp_ratio))
                self.mod_heads.append(nn.Identity())
        self.norm_out = nn.LayerNorm(d, eps=1e-6)
        self._pos_cache: dict[tuple[int, int], Tensor] = {}

    def _pos_embed(self, gh: int, gw: int, ref: Tensor) -> Tensor:
        key = (gh, gw)
        if key not in self._pos_cache:
            self._pos_cache[key] = sincos_pos_embed_2d(self.config.embed_dim, gh, gw)
        return self._pos_cache[key].to(dtype=ref.dtype, device=ref.device)

    def patchify(self, planes: Tensor) -> tuple[Tensor, tuple[int, int]]:
        """(B, 3, H, W) descriptor planes -> (B, N, D) embedded patch tokens
        with positional encoding added; H and W must be patch multiples."""
        if planes.ndim != 4 or planes.shape[1] != 3:
            raise ValueError(f"expected (B, 3, H, W), got {tuple(planes.shape)}")
        p = self.config.patch_size
        h, w = planes.shape[-2:]
        if h % p or w % p:
            raise ValueError(f"image size {(h, w)} not divisible by patch size {p}")
        tokens = self.patch_embed(planes).flatten(2).transpose(1, 2)
        gh, gw = h // p, w // p
        return tokens + self._pos_embed(gh, gw, tokens), (gh, gw)

    def forward(self, planes: Tensor, hist_weights: Tensor) -> EncodedRepresentation:
        if hist_weights.ndim == 1:
            hist_weights = hist_weights.unsqueeze(0)
        tokens, grid = self.patchify(planes)
        b = tokens.shape[0]
        x = torch.cat([self.global_token.to(tokens.dtype).expand(b, -1, -1), tokens], dim=1)
        hist_tokens = self.hist_tokenizer(hist_weights)
        cond = self.cond_embed(hist_weights)
        for kind, block, head in zip(self.config.block_pattern, self.blocks, self.mod_heads):
            if kind == ADALN:
                x = block(x, head(cond))
            else:
                x = block(x, hist_tokens)
        x = self.norm_out(x)
        return EncodedRepresentation(global_rep=x[:, 0], local_reps=x[:, 1:], grid_size=grid)
