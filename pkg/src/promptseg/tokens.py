"""Region cropping, patch partition, and positional encodings shared by
both prompt encoders.

Images are channels-first float tensors (C, H, W). Token grids are
(rows * cols, embed_dim) tensors with their 2-D layout kept alongside.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch
import torch.nn.functional as F
from torch import nn

from .geometry import AnnotationFrame, Box

__all__ = [
    "ImagePatchConfig",
    "LpmConfig",
    "TokenGrid",
    "DegenerateRegionError",
    "crop_resize",
    "crop_resize_batch",
    "PatchPartition",
    "positional_encoding",
    "part_patch_config",
]


class DegenerateRegionError(ValueError):
    """Raised when a crop region has zero area after clamping to the image."""


@dataclass(frozen=True)
class ImagePatchConfig:
    """Patch partition geometry. stride < patch_size gives overlapping
    patches; stride == patch_size tiles without overlap."""

    patch_size: int
    stride: int
    embed_dim: int

    def __post_init__(self) -> None:
        if not (1 <= self.stride <= self.patch_size):
            raise ValueError(
                f"need 1 <= stride <= patch_size, got stride={self.stride} "
                f"patch_size={self.patch_size}"
            )
        if self.embed_dim <= 0:
            raise ValueError(f"embed_dim must be positive, got {self.embed_dim}")

    def grid_side(self, input_side: int) -> int:
        if input_side < self.patch_size:
            raise ValueError(
                f"input side {input_side} smaller than patch {self.patch_size}"
            )
        return (input_side - self.patch_size) // self.stride + 1


def part_patch_config(roi_size: int, embed_dim: int) -> ImagePatchConfig:
    """Overlapping patch geometry for instance crops: patch and stride scale
    with the unified crop side so the grid stays 6x6 (36 part tokens) across
    the supported sweep of crop sizes.
    """
    patch = max(2, 2 * round(roi_size / 7))
    patch = min(patch, roi_size)
    stride = max(1, patch // 2)
    return ImagePatchConfig(patch_size=patch, stride=stride, embed_dim=embed_dim)


@dataclass(frozen=True)
class LpmConfig:
    """Local prompt encoder geometry: square crop size, part-token patch
    layout, and the width of the token-mixing MLP hidden layer."""

    roi_size: int = 28
    patch: ImagePatchConfig = None  # type: ignore[assignment]
    mlp_hidden: int = 128

    def __post_init__(self) -> None:
        if self.patch is None:
            object.__setattr__(self, "patch", part_patch_config(self.roi_size, 64))
        if self.roi_size < self.patch.patch_size:
            raise ValueError(
                f"roi_size {self.roi_size} must be >= patch size "
                f"{self.patch.patch_size}"
            )


@dataclass
class TokenGrid:
    """A sequence of embedding vectors with its 2-D layout and the pixel
    frame the grid positions refer to."""

    tokens: torch.Tensor  # (rows * cols, embed_dim)
    grid_shape: tuple[int, int]
    origin_frame: AnnotationFrame

    def __post_init__(self) -> None:
        rows, cols = self.grid_shape
        if self.tokens.ndim != 2 or self.tokens.shape[0] != rows * cols:
            raise ValueError(
                f"tokens shape {tuple(self.tokens.shape)} does not match grid "
                f"{self.grid_shape}"
            )

    def __len__(self) -> int:
        return self.tokens.shape[0]


def _clamp_region(region: Box, width: int, height: int) -> Box:
    x0 = min(max(region.x_min, 0.0), float(width))
    x1 = min(max(region.x_max, 0.0), float(width))
    y0 = min(max(region.y_min, 0.0), float(height))
    y1 = min(max(region.y_max, 0.0), float(height))
    return Box(x0, y0, x1, y1)


def _region_grid(
    region: Box, width: int, height: int, out_size: int, dtype: torch.dtype
) -> torch.Tensor:
    c = _clamp_region(region, width, height)
    if c.width <= 0 or c.height <= 0:
        raise DegenerateRegionError(
            f"region {region.as_tuple()} has zero area inside {width}x{height}"
        )
    # Centers of the first/last covered pixels; a sub-pixel span collapses
    # to constant sampling of that pixel.
    x_lo, x_hi = c.x_min, max(c.x_min, c.x_max - 1.0)
    y_lo, y_hi = c.y_min, max(c.y_min, c.y_max - 1.0)
    xs = torch.linspace(x_lo, x_hi, out_size, dtype=dtype)
    ys = torch.linspace(y_lo, y_hi, out_size, dtype=dtype)
    # Normalize pixel-center coords to [-1, 1] for grid_sample.
    xn = 2.0 * xs / max(width - 1, 1) - 1.0 if width > 1 else torch.zeros_like(xs)
    yn = 2.0 * ys / max(height - 1, 1) - 1.0 if height > 1 else torch.zeros_like(ys)
    gy, gx = torch.meshgrid(yn, xn, indexing="ij")
    return torch.stack([gx, gy], dim=-1)


def crop_resize(image: torch.Tensor, region: Box, out_size: int) -> torch.Tensor:
    """Bilinear resample of a box region to a square (C, S, S) output.

    Sampling is corner-aligned: the first and last sample rows/columns sit
    on the centers of the first and last pixels covered by the clamped
    region, so an integer full-image region with out_size equal to the
    image side is the identity.
    """
    return crop_resize_batch(image, [region], out_size).squeeze(0)


def crop_resize_batch(
    image: torch.Tensor, regions: Sequence[Box], out_size: int
) -> torch.Tensor:
    """Crop-resize many regions of one (C, H, W) image to (B, C, S, S)."""
    if image.ndim != 3:
        raise ValueError(f"expected (C, H, W) image, got shape {tuple(image.shape)}")
    _, h, w = image.shape
    grid = torch.stack(
        [_region_grid(r, w, h, out_size, image.dtype) for r in regions], dim=0
    )
    imgs = image.unsqueeze(0).expand(len(regions), -1, -1, -1)
    return F.grid_sample(
        imgs, grid, mode="bilinear", padding_mode="border", align_corners=True
    )


class PatchPartition(nn.Module):
    """Divide a square input into (possibly overlapping) patches and project
    each linearly to an embedding vector."""

    def __init__(self, cfg: ImagePatchConfig, in_channels: int):
        super().__init__()
        self.cfg = cfg
        self.proj = nn.Conv2d(
            in_channels, cfg.embed_dim, cfg.patch_size, stride=cfg.stride
        )

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        """(B, C, S, S) -> (B, rows*cols, embed_dim)."""
        if image.shape[-1] < self.cfg.patch_size or image.shape[-2] < self.cfg.patch_size:
            raise ValueError(
                f"input {tuple(image.shape[-2:])} smaller than patch "
                f"{self.cfg.patch_size}"
            )
        feat = self.proj(image)  # (B, D, rows, cols)
        return feat.flatten(2).transpose(1, 2)

    def grid_shape(self, input_side: int) -> tuple[int, int]:
        side = self.cfg.grid_side(input_side)
        return (side, side)

    def as_grid(self, image: torch.Tensor, frame: AnnotationFrame) -> TokenGrid:
        """Single-image convenience wrapper returning a TokenGrid."""
        tokens = self.forward(image.unsqueeze(0)).squeeze(0)
        return TokenGrid(tokens, self.grid_shape(image.shape[-1]), frame)


def positional_encoding(
    grid_shape: tuple[int, int], embed_dim: int, dtype: torch.dtype = torch.float32
) -> torch.Tensor:
    """Deterministic 2-D sinusoidal encoding of normalized cell centers.

    The first half of the embedding encodes the row coordinate and the
    second half the column coordinate, each as interleaved sin/cos pairs
    over a geometric frequency ladder. Entries are bounded by 1. Requires
    embed_dim divisible by 4 so both axes get full sin/cos pairs.

    Returns (rows * cols, embed_dim), row-major.
    """
    if embed_dim % 4 != 0:
        raise ValueError(f"embed_dim must be divisible by 4, got {embed_dim}")
    rows, cols = grid_shape
    half = embed_dim // 2
    n_freq = half // 2
    k = torch.arange(n_freq, dtype=dtype)
    omega = 1.0 / torch.pow(torch.tensor(10000.0, dtype=dtype), 2 * k / half)

    def axis_encoding(n: int) -> torch.Tensor:
        pos = torch.arange(n, dtype=dtype)
        if n > 1:
            pos = pos / (n - 1)
        ang = pos[:, None] * omega[None, :]
        enc = torch.zeros(n, half, dtype=dtype)
        enc[:, 0::2] = torch.sin(ang)
        enc[:, 1::2] = torch.cos(ang)
        return enc

    row_enc = axis_encoding(rows)
    col_enc = axis_encoding(cols)
    out = torch.zeros(rows, cols, embed_dim, dtype=dtype)
    out[:, :, :half] = row_enc[:, None, :]
    out[:, :, half:] = col_enc[None, :, :]
    return out.reshape(rows * cols, embed_dim)
