"""Shallow reconstruction decoder.

Deliberately much smaller than the encoder: local tokens are projected to a
narrower width, run through a couple of plain transformer blocks with the
projected global representation prepended as context, then mapped back to
pixel patches through a sigmoid so the output lands in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
from torch import Tensor

from .encoder import EncodedRepresentation, EncoderConfig, Mlp, sincos_pos_embed_2d


@dataclass(frozen=True)
class DecoderConfig:
    embed_dim: int = 192
    depth: int = 2
    num_heads: int = 6
    patch_size: int = 16
    mlp_ratio: float = 4.0

    def __post_init__(self):
        if self.embed_dim % self.num_heads != 0:
            raise ValueError("embed_dim must be divisible by num_heads")


class PlainBlock(nn.Module):
    def __init__(self, dim: int, num_heads: int, mlp_ratio: float = 4.0):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim, eps=1e-6)
        self.attn = nn.MultiheadAttention(dim, num_heads, batch_first=True)
        self.norm2 = nn.LayerNorm(dim, eps=1e-6)
        self.mlp = Mlp(dim, mlp_ratio)

    def forward(self, x: Tensor) -> Tensor:
        h = self.norm1(x)
        h, _ = self.attn(h, h, h, need_weights=False)
        x = x + h
        return x + self.mlp(self.norm2(x))


class LightDecoder(nn.Module):
    def __init__(self, config: DecoderConfig, encoder_config: EncoderConfig):
        super().__init__()
        if config.depth >= encoder_config.depth:
            raise ValueError(
                f"decoder depth {config.depth} must be less than encoder depth "
                f"{encoder_config.depth}"
            )
        if config.patch_size != encoder_config.patch_size:
            raise ValueError("decoder patch_size must equal encoder patch_size")
        self.config = config
        d = config.embed_dim
        self.local_proj = nn.Linear(encoder_config.embed_dim, d)
        self.global_proj = nn.Linear(encoder_config.embed_dim, d)
        self.blocks = nn.ModuleList(
            PlainBlock(d, config.num_heads, config.mlp_ratio) for _ in range(config.depth)
        )
        self.norm_out = nn.LayerNorm(d, eps=1e-6)
        self.pixel_head = nn.Linear(d, config.patch_size**2 * 3)
        self._pos_cache: dict[tuple[int, int], Tensor] = {}

    def _pos_embed(self, gh: int, gw: int, ref: Tensor) -> Tensor:
        key = (gh, gw)
        if key not in self._pos_cache:
            self._pos_cache[key] = sincos_pos_embed_2d(self.config.embed_dim, gh, gw)
        return self._pos_cache[key].to(dtype=ref.dtype, device=ref.device)

    def forward(self, rep: EncodedRepresentation) -> Tensor:
        """EncodedRepresentation -> reconstruction (B, H, W, 3) in [0, 1]."""
        gh, gw = rep.grid_size
        if rep.local_reps.shape[1] != gh * gw:
            raise ValueError("local token count inconsistent with grid size")
        x = self.local_proj(rep.local_reps) + self._pos_embed(gh, gw, rep.local_reps)
        ctx = self.global_proj(rep.global_rep).unsqueeze(1)
        x = torch.cat([ctx, x], dim=1)
        for block in self.blocks:
            x = block(x)
        x = self.norm_out(x[:, 1:])
        patches = torch.sigmoid(self.pixel_head(x))
        p = self.config.patch_size
        b = patches.shape[0]
        img = patches.reshape(b, gh, gw, p, p, 3)
        return img.permute(0, 1, 3, 2, 4, 5).reshape(b, gh * p, gw * p, 3)
