"""Tensor-side box coding, matching, and the four-part training objective.

Boxes on this side are (N, 4) tensors in corner (x0, y0, x1, y1) order,
image-frame pixels. The scalar-side reference implementations live in
geometry; the tensor paths here mirror them so gradients can flow, and the
test suite pins the two sides against each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .geometry import Box

__all__ = [
    "LossBundle",
    "PipelinePredictions",
    "PipelineTargets",
    "boxes_to_tensor",
    "tensor_to_boxes",
    "pairwise_iou",
    "encode_deltas",
    "apply_deltas",
    "clip_boxes",
    "stable_nms",
    "proposal_area_loss",
    "rpn_targets",
    "match_prompts",
    "total_loss",
]

# delta growth clamp keeps exp() finite for untrained heads
_MAX_DELTA_LOG = 4.0


def boxes_to_tensor(boxes, dtype=torch.float32) -> torch.Tensor:
    return torch.tensor([b.as_tuple() for b in boxes], dtype=dtype).reshape(-1, 4)


def tensor_to_boxes(t: torch.Tensor) -> list[Box]:
    return [Box(*(float(v) for v in row)) for row in t.detach()]


def pairwise_iou(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """IoU matrix between (N, 4) and (M, 4) corner boxes; 0 on empty union."""
    area_a = (a[:, 2] - a[:, 0]).clamp(min=0) * (a[:, 3] - a[:, 1]).clamp(min=0)
    area_b = (b[:, 2] - b[:, 0]).clamp(min=0) * (b[:, 3] - b[:, 1]).clamp(min=0)
    lt = torch.maximum(a[:, None, :2], b[None, :, :2])
    rb = torch.minimum(a[:, None, 2:], b[None, :, 2:])
    wh = (rb - lt).clamp(min=0)
    inter = wh[..., 0] * wh[..., 1]
    union = area_a[:, None] + area_b[None, :] - inter
    return torch.where(union > 0, inter / union.clamp(min=1e-12), torch.zeros_like(inter))


def encode_deltas(src: torch.Tensor, dst: torch.Tensor) -> torch.Tensor:
    """Regression targets that move src boxes onto dst boxes."""
    sw = (src[:, 2] - src[:, 0]).clamp(min=1e-4)
    sh = (src[:, 3] - src[:, 1]).clamp(min=1e-4)
    scx = src[:, 0] + 0.5 * sw
    scy = src[:, 1] + 0.5 * sh
    dw = (dst[:, 2] - dst[:, 0]).clamp(min=1e-4)
    dh = (dst[:, 3] - dst[:, 1]).clamp(min=1e-4)
    dcx = dst[:, 0] + 0.5 * dw
    dcy = dst[:, 1] + 0.5 * dh
    return torch.stack(
        [
            (dcx - scx) / sw,
            (dcy - scy) / sh,
            torch.log(dw / sw),
            torch.log(dh / sh),
        ],
        dim=1,
    )


def apply_deltas(src: torch.Tensor, deltas: torch.Tensor) -> torch.Tensor:
    """Apply (dx, dy, dw, dh) regression output to source boxes."""
    w = (src[:, 2] - src[:, 0]).clamp(min=1e-4)
    h = (src[:, 3] - src[:, 1]).clamp(min=1e-4)
    cx = src[:, 0] + 0.5 * w + deltas[:, 0] * w
    cy = src[:, 1] + 0.5 * h + deltas[:, 1] * h
    nw = w * torch.exp(deltas[:, 2].clamp(max=_MAX_DELTA_LOG))
    nh = h * torch.exp(deltas[:, 3].clamp(max=_MAX_DELTA_LOG))
    return torch.stack(
        [cx - 0.5 * nw, cy - 0.5 * nh, cx + 0.5 * nw, cy + 0.5 * nh], dim=1
    )


def clip_boxes(boxes: torch.Tensor, width: float, height: float) -> torch.Tensor:
    x0 = boxes[:, 0].clamp(0, width)
    y0 = boxes[:, 1].clamp(0, height)
    x1 = boxes[:, 2].clamp(0, width)
    y1 = boxes[:, 3].clamp(0, height)
    return torch.stack([x0, y0, torch.maximum(x1, x0), torch.maximum(y1, y0)], dim=1)


def stable_nms(boxes: torch.Tensor, scores: torch.Tensor, iou_thresh: float) -> torch.Tensor:
    """Greedy NMS with a fully deterministic order: candidates are visited
    by descending score with index (raster) order breaking ties. Returns
    kept indices in that order."""
    n = boxes.shape[0]
    if n == 0:
        return torch.zeros(0, dtype=torch.long)
    order = sorted(range(n), key=lambda i: (-float(scores[i]), i))
    boxes_d = boxes.detach()
    keep: list[int] = []
    suppressed = torch.zeros(n, dtype=torch.bool)
    for i in order:
        if suppressed[i]:
            continue
        keep.append(i)
        rest = torch.tensor([j for j in order if not suppressed[j] and j != i])
        if rest.numel():
            ious = pairwise_iou(boxes_d[i : i + 1], boxes_d[rest]).squeeze(0)
            suppressed[rest[ious > iou_thresh]] = True
    return torch.tensor(keep, dtype=torch.long)


def proposal_area_loss(
    proposals: torch.Tensor, gt: torch.Tensor, eps: float = 1e-7
) -> torch.Tensor:
    """Differentiable mean squared relative area error against max-IoU
    matched ground-truth boxes (both box sets in the same frame).

    Matching indices carry no gradient; areas do. Mirrors the scalar
    geometry.parea_loss, which the tests hold it to.
    """
    if proposals.numel() == 0 or gt.numel() == 0:
        return proposals.sum() * 0.0
    iou = pairwise_iou(proposals.detach(), gt.detach())
    match = iou.argmax(dim=1)
    matched = gt[match]
    area_p = (proposals[:, 2] - proposals[:, 0]) * (proposals[:, 3] - proposals[:, 1])
    area_g = (matched[:, 2] - matched[:, 0]) * (matched[:, 3] - matched[:, 1])
    rel = (area_p - area_g).abs() / (area_g + eps)
    return (rel**2).mean()


def rpn_targets(
    anchors: torch.Tensor,
    gt: torch.Tensor,
    pos_iou: float = 0.5,
    neg_iou: float = 0.3,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Objectness labels (1 pos, 0 neg, -1 ignore) and delta targets per
    anchor. Every gt box claims its best-overlap anchor even below the
    positive threshold so no target goes unassigned."""
    n = anchors.shape[0]
    labels = torch.full((n,), -1.0, dtype=anchors.dtype)
    deltas = torch.zeros_like(anchors)
    if gt.numel() == 0:
        return torch.zeros(n, dtype=anchors.dtype), deltas
    iou = pairwise_iou(anchors, gt)
    best_iou, best_gt = iou.max(dim=1)
    labels[best_iou < neg_iou] = 0.0
    labels[best_iou >= pos_iou] = 1.0
    # force-assign the top anchor of each gt
    top_anchor = iou.argmax(dim=0)
    labels[top_anchor] = 1.0
    best_gt[top_anchor] = torch.arange(gt.shape[0])
    pos = labels == 1.0
    if pos.any():
        deltas[pos] = encode_deltas(anchors[pos], gt[best_gt[pos]])
    return labels, deltas


def match_prompts(
    prompt_boxes: torch.Tensor,
    gt_boxes: torch.Tensor,
    gt_categories: torch.Tensor,
    background_index: int,
    pos_iou: float = 0.5,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Per-prompt class target (background below the IoU threshold) and the
    index of the matched gt box (-1 for background)."""
    p = prompt_boxes.shape[0]
    classes = torch.full((p,), background_index, dtype=torch.long)
    matched = torch.full((p,), -1, dtype=torch.long)
    if gt_boxes.numel() == 0 or p == 0:
        return classes, matched
    iou = pairwise_iou(prompt_boxes, gt_boxes)
    best_iou, best_gt = iou.max(dim=1)
    pos = best_iou >= pos_iou
    classes[pos] = gt_categories[best_gt[pos]]
    matched[pos] = best_gt[pos]
    return classes, matched


@dataclass
class PipelinePredictions:
    """Raw network outputs entering the objective."""

    rpn_objectness: torch.Tensor  # (A,) logits
    rpn_deltas: torch.Tensor  # (A, 4)
    proposals: torch.Tensor  # (N, 4) selected, differentiable
    class_logits: torch.Tensor  # (P, K+1)
    box_deltas: torch.Tensor  # (P, 4)
    mask_logits: torch.Tensor  # (P, K, S, S)


@dataclass
class PipelineTargets:
    """Matched targets aligned with PipelinePredictions."""

    rpn_labels: torch.Tensor  # (A,) 1/0/-1
    rpn_deltas: torch.Tensor  # (A, 4)
    gt_boxes: torch.Tensor  # (G, 4)
    classes: torch.Tensor  # (P,) long, background = K
    box_deltas: torch.Tensor  # (P, 4), valid on foreground rows
    masks: torch.Tensor  # (P, S, S) float targets, valid on foreground rows


@dataclass
class LossBundle:
    """The four objective components and their exact float sum."""

    l_parea: float
    l_box: float
    l_class: float
    l_mask: float
    l_total: float

    @staticmethod
    def from_components(
        l_parea: float, l_box: float, l_class: float, l_mask: float
    ) -> "LossBundle":
        return LossBundle(
            l_parea, l_box, l_class, l_mask, l_parea + l_box + l_class + l_mask
        )


def total_loss(
    pred: PipelinePredictions,
    targets: PipelineTargets,
    eps: float = 1e-7,
    use_parea: bool = True,
) -> tuple[torch.Tensor, LossBundle]:
    """Sum of the area, box, class, and mask terms with no extra weighting.

    The box term is smooth-L1 over matched deltas of both the proposal and
    refinement stages; the class term is cross-entropy over prompt
    categories plus binary cross-entropy over anchor objectness; the mask
    term is per-pixel binary cross-entropy on the matched category's mask
    plane. Returns the differentiable total plus the float bundle
    (l_total is the exact float sum of the four components).
    """
    zero = pred.class_logits.sum() * 0.0

    if use_parea:
        l_parea = proposal_area_loss(pred.proposals, targets.gt_boxes, eps=eps)
    else:
        l_parea = zero

    valid = targets.rpn_labels >= 0
    if valid.any():
        l_obj = F.binary_cross_entropy_with_logits(
            pred.rpn_objectness[valid], targets.rpn_labels[valid]
        )
    else:
        l_obj = zero
    rpn_pos = targets.rpn_labels == 1.0
    if rpn_pos.any():
        l_rpn_box = F.smooth_l1_loss(
            pred.rpn_deltas[rpn_pos], targets.rpn_deltas[rpn_pos]
        )
    else:
        l_rpn_box = zero

    if pred.class_logits.shape[0] > 0:
        l_cls = F.cross_entropy(pred.class_logits, targets.classes)
    else:
        l_cls = zero
    background = pred.class_logits.shape[-1] - 1
    fg = targets.classes < background
    if fg.any():
        l_head_box = F.smooth_l1_loss(pred.box_deltas[fg], targets.box_deltas[fg])
        fg_masks = pred.mask_logits[fg, targets.classes[fg]]
        l_mask = F.binary_cross_entropy_with_logits(fg_masks, targets.masks[fg])
    else:
        l_head_box = zero
        l_mask = zero

    l_box = l_rpn_box + l_head_box
    l_class = l_obj + l_cls
    total = l_parea + l_box + l_class + l_mask
    bundle = LossBundle.from_components(
        float(l_parea), float(l_box), float(l_class), float(l_mask)
    )
    return total, bundle
