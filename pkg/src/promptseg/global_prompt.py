"""Global-to-local prompt encoder: multi-head self-attention over global
image tokens and instance part tokens, then one-directional cross-attention
that pulls global context into the local tokens, looped a configurable
number of times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import torch
from torch import nn

from .geometry import AnnotationFrame, Box
from .local_prompt import PromptEmbedding
from .tokens import (
    ImagePatchConfig,
    PatchPartition,
    TokenGrid,
    crop_resize_batch,
    part_patch_config,
    positional_encoding,
)

__all__ = [
    "AttentionConfig",
    "MultiHeadSelfAttention",
    "global_to_local_attention",
    "GlobalPromptEncoder",
]


@dataclass(frozen=True)
class AttentionConfig:
    """Attention geometry: model width, head count, and how many
    self-attention + global-to-local rounds to run."""

    embed_dim: int = 64
    heads: int = 4
    loops: int = 2

    def __post_init__(self) -> None:
        if self.heads < 1:
            raise ValueError(f"heads must be >= 1, got {self.heads}")
        if self.loops < 1:
            raise ValueError(f"loops must be >= 1, got {self.loops}")
        if self.embed_dim % self.heads != 0:
            raise ValueError(
                f"embed_dim {self.embed_dim} not divisible by heads {self.heads}"
            )

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.heads


class MultiHeadSelfAttention(nn.Module):
    """Standard multi-head self-attention with scaled dot-product per head,
    an output projection, and a residual connection: x + proj(attn(x))."""

    def __init__(self, cfg: AttentionConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.embed_dim
        self.qkv = nn.Linear(d, 3 * d)
        self.proj = nn.Linear(d, d)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """(B, n, d) -> (B, n, d); also accepts unbatched (n, d)."""
        unbatched = x.ndim == 2
        if unbatched:
            x = x.unsqueeze(0)
        b, n, d = x.shape
        if d != self.cfg.embed_dim:
            raise ValueError(f"token dim {d} != embed_dim {self.cfg.embed_dim}")
        h, hd = self.cfg.heads, self.cfg.head_dim
        q, k, v = self.qkv(x).chunk(3, dim=-1)
        q = q.view(b, n, h, hd).transpose(1, 2)
        k = k.view(b, n, h, hd).transpose(1, 2)
        v = v.view(b, n, h, hd).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(hd)
        attn = scores.softmax(dim=-1)
        ctx = (attn @ v).transpose(1, 2).reshape(b, n, d)
        out = x + self.proj(ctx)
        return out.squeeze(0) if unbatched else out


def global_to_local_attention(
    global_tokens: torch.Tensor,
    local_tokens: torch.Tensor,
    d_k: int | None = None,
) -> torch.Tensor:
    """Cross-attention from global tokens into local tokens.

    Scores are local @ global^T / sqrt(d_k) with a row-wise softmax, and the
    output is the weight matrix applied to the global tokens: one output row
    per local token, each a convex combination of global token vectors.
    There are no learned projections and the flow is strictly
    one-directional (global tokens are never updated).

    Accepts (n, d)/(m, d) or batched (B, n, d)/(B, m, d) token stacks.
    """
    if global_tokens.shape[-2] == 0:
        raise ValueError("global token set is empty: no context to attend to")
    if global_tokens.shape[-1] != local_tokens.shape[-1]:
        raise ValueError(
            f"embedding dims differ: global {global_tokens.shape[-1]} vs "
            f"local {local_tokens.shape[-1]}"
        )
    if d_k is None:
        d_k = global_tokens.shape[-1]
    scores = local_tokens @ global_tokens.transpose(-2, -1) / math.sqrt(d_k)
    weights = scores.softmax(dim=-1)
    return weights @ global_tokens


class GlobalPromptEncoder(nn.Module):
    """Whole-image context prompt encoder.

    Global tokens come from a non-overlapping partition of the full image;
    local tokens from an overlapping partition of the unified instance crop.
    Both get 2-D sinusoidal positional encodings. Each round applies
    self-attention (with post-norm) to the global and local stacks and then
    replaces the local stack with its global-to-local cross-attention
    output. The global side never receives information from the local side,
    so its evolution is instance-independent and can be computed once per
    image and shared across instances.
    """

    def __init__(
        self,
        cfg: AttentionConfig,
        roi_size: int = 28,
        global_patch: int = 16,
        in_channels: int = 3,
    ):
        super().__init__()
        self.cfg = cfg
        self.roi_size = roi_size
        global_cfg = ImagePatchConfig(global_patch, global_patch, cfg.embed_dim)
        local_cfg = part_patch_config(roi_size, cfg.embed_dim)
        self.global_partition = PatchPartition(global_cfg, in_channels)
        self.local_partition = PatchPartition(local_cfg, in_channels)
        self.global_attn = nn.ModuleList(
            MultiHeadSelfAttention(cfg) for _ in range(cfg.loops)
        )
        self.local_attn = nn.ModuleList(
            MultiHeadSelfAttention(cfg) for _ in range(cfg.loops)
        )
        self.global_norm = nn.ModuleList(
            nn.LayerNorm(cfg.embed_dim) for _ in range(cfg.loops)
        )
        self.local_norm = nn.ModuleList(
            nn.LayerNorm(cfg.embed_dim) for _ in range(cfg.loops)
        )

    def global_token_stages(self, image: torch.Tensor) -> list[torch.Tensor]:
        """Per-round global token stacks for one (C, H, W) image.

        Stage k holds the global tokens as seen by the cross-attention in
        round k. Depends only on the image, so callers serving many prompts
        against one image should compute this once and reuse it.
        """
        tokens = self.global_partition(image.unsqueeze(0))
        rows, cols = _partition_grid(self.global_partition, image.shape)
        tokens = tokens + positional_encoding(
            (rows, cols), self.cfg.embed_dim, dtype=tokens.dtype
        ).unsqueeze(0)
        stages = []
        for attn, norm in zip(self.global_attn, self.global_norm):
            tokens = norm(attn(tokens))
            stages.append(tokens)
        return stages

    def encode_crops(
        self, crops: torch.Tensor, global_stages: Sequence[torch.Tensor]
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """(B, C, S, S) instance crops -> (tokens (B, n, d), pooled (B, d))."""
        local = self.local_partition(crops)
        side = self.local_partition.cfg.grid_side(self.roi_size)
        local = local + positional_encoding(
            (side, side), self.cfg.embed_dim, dtype=local.dtype
        ).unsqueeze(0)
        for k in range(self.cfg.loops):
            local = self.local_norm[k](self.local_attn[k](local))
            g = global_stages[k].expand(local.shape[0], -1, -1)
            local = global_to_local_attention(g, local, d_k=self.cfg.embed_dim)
        return local, local.mean(dim=1)

    def encode_boxes(
        self,
        image: torch.Tensor,
        regions: Sequence[Box],
        global_stages: Sequence[torch.Tensor] | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        if global_stages is None:
            global_stages = self.global_token_stages(image)
        crops = crop_resize_batch(image, regions, self.roi_size)
        return self.encode_crops(crops, global_stages)

    def forward(self, image: torch.Tensor, region: Box) -> PromptEmbedding:
        tokens, pooled = self.encode_boxes(image, [region])
        side = self.local_partition.cfg.grid_side(self.roi_size)
        frame = AnnotationFrame(float(image.shape[-1]), float(image.shape[-2]))
        grid = TokenGrid(tokens.squeeze(0), (side, side), frame)
        return PromptEmbedding(tokens=grid, pooled=pooled.squeeze(0))


def _partition_grid(
    partition: PatchPartition, image_shape: torch.Size
) -> tuple[int, int]:
    rows = partition.cfg.grid_side(int(image_shape[-2]))
    cols = partition.cfg.grid_side(int(image_shape[-1]))
    return rows, cols
