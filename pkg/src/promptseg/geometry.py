"""Axis-aligned boxes, IoU matching, frame rescaling, jitter, and the
proposal area loss.

Boxes use corner (x_min, y_min, x_max, y_max) representation in continuous
pixel coordinates everywhere; (x, y, w, h) inputs are converted at the
boundary. All functions here are pure and safe for concurrent callers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

__all__ = [
    "Box",
    "ProposalSet",
    "AnnotationFrame",
    "AreaLossConfig",
    "InvalidFrameError",
    "box_area",
    "box_iou",
    "rescale_to_frame",
    "match_by_max_iou",
    "parea_loss",
    "PAreaResult",
    "jitter_box",
]


class InvalidFrameError(ValueError):
    """Raised when a coordinate frame has non-positive width or height."""


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with x_max >= x_min and y_max >= y_min."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(np.isfinite(c) for c in coords):
            raise ValueError(f"box coordinates must be finite, got {coords}")
        if self.x_max < self.x_min or self.y_max < self.y_min:
            raise ValueError(f"box must satisfy min <= max, got {coords}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @staticmethod
    def from_xywh(x: float, y: float, w: float, h: float) -> "Box":
        return Box(x, y, x + w, y + h)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class AnnotationFrame:
    """Pixel dimensions of the coordinate frame a box set is expressed in."""

    width: float
    height: float

    def validate(self) -> "AnnotationFrame":
        if not (self.width > 0 and self.height > 0):
            raise InvalidFrameError(
                f"frame must have positive size, got {self.width}x{self.height}"
            )
        return self


@dataclass
class ProposalSet:
    """Ranked candidate boxes with aligned objectness scores in [0, 1]."""

    boxes: list[Box] = field(default_factory=list)
    scores: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(self.boxes) != len(self.scores):
            raise ValueError(
                f"{len(self.boxes)} boxes but {len(self.scores)} scores"
            )

    def __len__(self) -> int:
        return len(self.boxes)


@dataclass(frozen=True)
class AreaLossConfig:
    """Stabilizer for the relative-area denominator; eps must be > 0."""

    eps: float = 1e-7

    def __post_init__(self) -> None:
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")


def box_area(b: Box) -> float:
    """Area of a box in square pixels."""
    return b.width * b.height


def box_iou(a: Box, b: Box) -> float:
    """Intersection-over-union of two boxes; 0 when the union is empty."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = box_area(a) + box_area(b) - inter
    if union <= 0:
        return 0.0
    return inter / union


def rescale_to_frame(
    p: ProposalSet, from_frame: AnnotationFrame, to_frame: AnnotationFrame
) -> ProposalSet:
    """Re-express proposal coordinates in a different frame.

    X coordinates scale by to.width/from.width and y coordinates by
    to.height/from.height; ordering and scores are preserved.
    """
    from_frame.validate()
    to_frame.validate()
    sx = to_frame.width / from_frame.width
    sy = to_frame.height / from_frame.height
    boxes = [
        Box(b.x_min * sx, b.y_min * sy, b.x_max * sx, b.y_max * sy)
        for b in p.boxes
    ]
    return ProposalSet(boxes=boxes, scores=list(p.scores))


def match_by_max_iou(
    p: ProposalSet, gt: Sequence[Box]
) -> list[Optional[int]]:
    """Per-proposal index of the max-IoU ground-truth box.

    Ties break toward the lowest gt index. A proposal with IoU 0 against
    every gt box still maps to its argmax (index 0 on an all-zero row).
    Empty gt yields None for every proposal.
    """
    if not gt:
        return [None] * len(p)
    matches: list[Optional[int]] = []
    for prop in p.boxes:
        best_idx = 0
        best_iou = -1.0
        for j, g in enumerate(gt):
            iou = box_iou(prop, g)
            if iou > best_iou:
                best_iou = iou
                best_idx = j
        matches.append(best_idx)
    return matches


class PAreaResult(NamedTuple):
    """Area-loss value plus diagnostics of degenerate matches."""

    value: float
    no_targets: bool
    zero_iou_matches: int


def parea_loss(
    p: ProposalSet,
    gt: Sequence[Box],
    frames: tuple[AnnotationFrame, AnnotationFrame],
    cfg: AreaLossConfig = AreaLossConfig(),
) -> PAreaResult:
    """Mean squared relative area error between proposals and their
    max-IoU ground-truth boxes.

    Proposals are first rescaled from their own frame (frames[0]) into the
    ground-truth frame (frames[1]), then each proposal is matched to the
    ground-truth box of maximal IoU and penalized by
    (|area_p - area_gt| / (area_gt + eps))^2; the result is the mean over
    all proposals.

    Empty gt returns 0 with no_targets=True (background-only crops occur
    during training and must keep the total objective well-defined).
    Empty proposals return 0.
    """
    prop_frame, gt_frame = frames
    if len(p) == 0:
        return PAreaResult(0.0, not gt, 0)
    if not gt:
        return PAreaResult(0.0, True, 0)
    scaled = rescale_to_frame(p, prop_frame, gt_frame)
    matches = match_by_max_iou(scaled, gt)
    zero_iou = 0
    total = 0.0
    for prop, j in zip(scaled.boxes, matches):
        g = gt[j]
        if box_iou(prop, g) == 0.0:
            zero_iou += 1
        area_p = box_area(prop)
        area_g = box_area(g)
        err = abs(area_p - area_g)
        total += (err / (area_g + cfg.eps)) ** 2
    return PAreaResult(total / len(p), False, zero_iou)


def jitter_box(
    b: Box, amplitude: float, bounds: AnnotationFrame, seed: int
) -> Box:
    """Perturb each coordinate uniformly within +/- amplitude of the
    corresponding side length, clamp to bounds, and re-order so the result
    is a valid box. Deterministic for a given seed.
    """
    if amplitude < 0:
        raise ValueError(f"amplitude must be >= 0, got {amplitude}")
    bounds.validate()
    rng = np.random.default_rng(seed)
    noise = rng.uniform(-1.0, 1.0, size=4)
    w, h = b.width, b.height
    x0 = b.x_min + noise[0] * amplitude * w
    y0 = b.y_min + noise[1] * amplitude * h
    x1 = b.x_max + noise[2] * amplitude * w
    y1 = b.y_max + noise[3] * amplitude * h
    x0, x1 = sorted((x0, x1))
    y0, y1 = sorted((y0, y1))
    x0 = float(np.clip(x0, 0.0, bounds.width))
    x1 = float(np.clip(x1, 0.0, bounds.width))
    y0 = float(np.clip(y0, 0.0, bounds.height))
    y1 = float(np.clip(y1, 0.0, bounds.height))
    return Box(x0, y0, x1, y1)
