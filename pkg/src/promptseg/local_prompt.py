"""Local prompt encoder: crop the instance region to a unified size, build
part tokens, run a parallel learnable-spectral branch, and mix both token
streams with an MLP into a per-instance local prompt.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch
from torch import nn

from .geometry import AnnotationFrame, Box
from .tokens import LpmConfig, PatchPartition, TokenGrid, crop_resize_batch

__all__ = ["SpectralEmbedding", "spectral_embed", "PromptEmbedding", "LocalPromptEncoder"]


@dataclass
class PromptEmbedding:
    """Prompt encoder output for one instance: the token sequence and its
    mean-pooled summary vector."""

    tokens: TokenGrid
    pooled: torch.Tensor

    def __post_init__(self) -> None:
        if self.pooled.shape[-1] != self.tokens.tokens.shape[-1]:
            raise ValueError("pooled vector dimension must match token dimension")


class SpectralEmbedding(nn.Module):
    """Learnable additive frequency-domain embedding for a fixed crop shape.

    Real and imaginary planes are separate parameters, both zero-initialized
    so the untouched spectrum round-trips exactly.
    """

    def __init__(self, side: int, channels: int):
        super().__init__()
        self.side = side
        self.channels = channels
        self.real = nn.Parameter(torch.zeros(channels, side, side))
        self.imag = nn.Parameter(torch.zeros(channels, side, side))

    @property
    def values(self) -> torch.Tensor:
        return torch.complex(self.real, self.imag)


def spectral_embed(crop: torch.Tensor, emb: SpectralEmbedding) -> torch.Tensor:
    """Forward FFT over the spatial dims, add the learnable embedding, and
    take the real part of the normalized inverse FFT.

    Accepts (C, S, S) or (B, C, S, S) crops; a zero embedding reproduces
    the input up to floating-point round-off and an embedding supported
    only on the DC bin shifts every pixel by value/(S*S).
    """
    spatial = crop.shape[-2:]
    if spatial != (emb.side, emb.side) or crop.shape[-3] != emb.channels:
        raise ValueError(
            f"crop shape {tuple(crop.shape)} does not match embedding "
            f"({emb.channels}, {emb.side}, {emb.side})"
        )
    spectrum = torch.fft.fft2(crop.to(emb.real.dtype))
    shifted = spectrum + emb.values
    return torch.fft.ifft2(shifted).real


class LocalPromptEncoder(nn.Module):
    """Instance-region prompt encoder.

    The region is crop-resized to a unified square. Branch A partitions the
    crop into overlapping part tokens; branch B passes the crop through the
    spectral embedding first and partitions the result with the same
    projection. The concatenated token sequences run through a two-layer
    per-token MLP to produce local prompt tokens, pooled by mean.
    """

    def __init__(self, cfg: LpmConfig, in_channels: int = 3):
        super().__init__()
        self.cfg = cfg
        self.partition = PatchPartition(cfg.patch, in_channels)
        self.spectral = SpectralEmbedding(cfg.roi_size, in_channels)
        dim = cfg.patch.embed_dim
        self.mlp = nn.Sequential(
            nn.Linear(dim, cfg.mlp_hidden),
            nn.GELU(),
            nn.Linear(cfg.mlp_hidden, dim),
        )

    @property
    def tokens_per_instance(self) -> int:
        side = self.cfg.patch.grid_side(self.cfg.roi_size)
        return 2 * side * side

    def pre_mlp_tokens(self, crops: torch.Tensor) -> torch.Tensor:
        """Concatenated part + spectral token sequences, before mixing."""
        part = self.partition(crops)
        spectral = self.partition(spectral_embed(crops, self.spectral))
        return torch.cat([part, spectral], dim=1)

    def encode_crops(self, crops: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """(B, C, S, S) crops -> (tokens (B, 2*n, D), pooled (B, D))."""
        tokens = self.mlp(self.pre_mlp_tokens(crops))
        return tokens, tokens.mean(dim=1)

    def encode_boxes(
        self, image: torch.Tensor, regions: Sequence[Box]
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Crop each region from a (C, H, W) image and encode the batch."""
        crops = crop_resize_batch(image, regions, self.cfg.roi_size)
        return self.encode_crops(crops)

    def forward(self, image: torch.Tensor, region: Box) -> PromptEmbedding:
        tokens, pooled = self.encode_boxes(image, [region])
        side = self.cfg.patch.grid_side(self.cfg.roi_size)
        frame = AnnotationFrame(float(image.shape[-1]), float(image.shape[-2]))
        grid = TokenGrid(tokens.squeeze(0), (2 * side, side), frame)
        return PromptEmbedding(tokens=grid, pooled=pooled.squeeze(0))
