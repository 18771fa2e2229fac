"""Two-stage promptable instance segmentation model.

A stride-2 conv backbone feeds a per-level region proposal head. Each
prompt box (proposal, jittered ground-truth, or manual) is encoded three
ways: RoI-pooled backbone features, a local prompt from the full-resolution
instance crop, and a global-context prompt; the fused block drives the
refinement, classification, and mask heads. Backbone features are computed
once per image and reused for any number of prompts.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .config import PromptSegConfig
from .geometry import AnnotationFrame, Box, ProposalSet, jitter_box
from .global_prompt import AttentionConfig, GlobalPromptEncoder
from .local_prompt import LocalPromptEncoder
from .losses import (
    LossBundle,
    PipelinePredictions,
    PipelineTargets,
    apply_deltas,
    boxes_to_tensor,
    clip_boxes,
    encode_deltas,
    match_prompts,
    rpn_targets,
    stable_nms,
    tensor_to_boxes,
    total_loss,
)
from .synth import Scene
from .tokens import LpmConfig, crop_resize, part_patch_config

__all__ = [
    "InstanceResult",
    "PromptBatch",
    "SessionFeatures",
    "Backbone",
    "PromptSegModel",
    "build_model",
    "train_step",
    "sample_training_prompts",
    "roi_max_pool",
    "paste_mask",
]

PROVENANCES = ("proposal", "gt-jittered", "manual")


@dataclass
class InstanceResult:
    """One decoded instance: refined box, category, calibrated score, and a
    binary mask in box-relative coordinates."""

    box: Box
    category: int
    score: float
    mask: torch.Tensor  # bool (S_m, S_m)
    provenance: str = "proposal"
    below_threshold: bool = False


@dataclass
class PromptBatch:
    """Prompt boxes with their provenance, clamped to the image frame."""

    boxes: list[Box] = field(default_factory=list)
    provenance: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if len(self.boxes) != len(self.provenance):
            raise ValueError("provenance must align with boxes")
        bad = set(self.provenance) - set(PROVENANCES)
        if bad:
            raise ValueError(f"unknown provenance {sorted(bad)}")

    def __len__(self) -> int:
        return len(self.boxes)


@dataclass
class SessionFeatures:
    """Everything cached by encode-once: the normalized (padded) image, the
    backbone pyramid, the pre-evolved global token stages, and the original
    pixel dimensions."""

    image: torch.Tensor
    features: list[torch.Tensor]
    global_stages: list[torch.Tensor] | None
    width: int
    height: int
    fingerprint: str


class Backbone(nn.Module):
    """Stride-2 convolutional stages; stage i halves the spatial size of
    stage i-1. Keeps an invocation counter so callers can assert the
    encode-once contract."""

    def __init__(self, channels: tuple[int, ...], in_channels: int = 3):
        super().__init__()
        self.channels = channels
        stages = []
        prev = in_channels
        for ch in channels:
            stages.append(
                nn.Sequential(
                    nn.Conv2d(prev, ch, 3, stride=2, padding=1),
                    nn.ReLU(inplace=True),
                    nn.Conv2d(ch, ch, 3, padding=1),
                    nn.ReLU(inplace=True),
                )
            )
            prev = ch
        self.stages = nn.ModuleList(stages)
        self.invocations = 0

    def forward(self, image: torch.Tensor) -> list[torch.Tensor]:
        """(B, C, H, W) -> per-stage features; H and W must divide by
        2^stage_count."""
        div = 2 ** len(self.stages)
        h, w = image.shape[-2:]
        if h % div or w % div:
            raise ValueError(f"image sides {h}x{w} must divide by {div}")
        self.invocations += 1
        out = []
        x = image
        for stage in self.stages:
            x = stage(x)
            out.append(x)
        return out


class RegionProposalHead(nn.Module):
    """Dense objectness + box-delta head for one feature level with one
    square anchor per cell."""

    def __init__(self, in_channels: int, hidden: int):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, hidden, 3, padding=1)
        self.objectness = nn.Conv2d(hidden, 1, 1)
        self.deltas = nn.Conv2d(hidden, 4, 1)

    def forward(self, feat: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        x = F.relu(self.conv(feat))
        obj = self.objectness(x).flatten(1)  # (B, cells)
        deltas = self.deltas(x).flatten(2).transpose(1, 2)  # (B, cells, 4)
        return obj, deltas


def _level_anchors(
    rows: int, cols: int, stride: int, side: float, dtype=torch.float32
) -> torch.Tensor:
    ys, xs = torch.meshgrid(
        torch.arange(rows, dtype=dtype), torch.arange(cols, dtype=dtype), indexing="ij"
    )
    cx = (xs + 0.5) * stride
    cy = (ys + 0.5) * stride
    half = side / 2.0
    return torch.stack([cx - half, cy - half, cx + half, cy + half], dim=-1).reshape(-1, 4)


def roi_max_pool(
    feature: torch.Tensor, boxes: torch.Tensor, stride: int, out: int = 7
) -> torch.Tensor:
    """Max-pool a fixed out x out grid over each box's projection onto a
    (C, Hf, Wf) feature map. Boxes are image-frame pixel corners."""
    c, hf, wf = feature.shape
    pooled = []
    for row in boxes.detach():
        x0 = int(torch.div(row[0], stride, rounding_mode="floor").clamp(0, wf - 1))
        y0 = int(torch.div(row[1], stride, rounding_mode="floor").clamp(0, hf - 1))
        x1 = int(torch.ceil(row[2] / stride).clamp(x0 + 1, wf))
        y1 = int(torch.ceil(row[3] / stride).clamp(y0 + 1, hf))
        if row[2] <= row[0] or row[3] <= row[1]:
            raise ValueError(f"degenerate region {row.tolist()} for RoI pooling")
        pooled.append(F.adaptive_max_pool2d(feature[:, y0:y1, x0:x1], out))
    if not pooled:
        return torch.zeros(0, c, out, out, dtype=feature.dtype)
    return torch.stack(pooled, dim=0)


class FusePrompts(nn.Module):
    """Broadcast each pooled prompt vector over the RoI grid, concatenate
    channel-wise with the pooled features, and mix with a 1x1 conv."""

    def __init__(self, roi_channels: int, prompt_dim: int, out_channels: int):
        super().__init__()
        self.roi_channels = roi_channels
        self.prompt_dim = prompt_dim
        self.mix = nn.Conv2d(roi_channels + 2 * prompt_dim, out_channels, 1)

    def concat_features(
        self,
        roi_feat: torch.Tensor,
        local_pooled: torch.Tensor,
        global_pooled: torch.Tensor,
    ) -> torch.Tensor:
        """Pre-mixing concatenation; the first channels are the RoI features
        unchanged."""
        b, _, h, w = roi_feat.shape
        lp = local_pooled[:, :, None, None].expand(b, self.prompt_dim, h, w)
        gp = global_pooled[:, :, None, None].expand(b, self.prompt_dim, h, w)
        return torch.cat([roi_feat, lp, gp], dim=1)

    def forward(self, roi_feat, local_pooled, global_pooled) -> torch.Tensor:
        return self.mix(self.concat_features(roi_feat, local_pooled, global_pooled))


class MaskHead(nn.Module):
    """Upsampling conv stack from the fused RoI grid to per-category mask
    logits."""

    def __init__(self, in_channels: int, categories: int, mask_size: int, hidden: int = 32):
        super().__init__()
        self.mask_size = mask_size
        self.conv1 = nn.Conv2d(in_channels, hidden, 3, padding=1)
        self.conv2 = nn.Conv2d(hidden, hidden, 3, padding=1)
        self.conv3 = nn.Conv2d(hidden, hidden, 3, padding=1)
        self.out = nn.Conv2d(hidden, categories, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = F.relu(self.conv1(x))
        x = F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)
        x = F.relu(self.conv2(x))
        x = F.interpolate(x, scale_factor=2, mode="bilinear", align_corners=False)
        x = F.relu(self.conv3(x))
        logits = self.out(x)
        if logits.shape[-1] != self.mask_size:
            logits = F.interpolate(
                logits, size=(self.mask_size, self.mask_size), mode="bilinear",
                align_corners=False,
            )
        return logits


def sample_training_prompts(
    proposals: ProposalSet,
    gt: list[Box],
    frac_gt: float,
    jitter_amp: float,
    frame: AnnotationFrame,
    seed: int,
) -> PromptBatch:
    """Training prompt batch: every proposal plus a seeded random fraction
    of the ground-truth boxes passed through coordinate jitter. When
    frac_gt > 0 at least one ground-truth prompt is kept so single-instance
    scenes still see a near-true box."""
    if not 0.0 <= frac_gt <= 1.0:
        raise ValueError(f"frac_gt must lie in [0, 1], got {frac_gt}")
    boxes = list(proposals.boxes)
    provenance = ["proposal"] * len(boxes)
    if gt and frac_gt > 0:
        rng = np.random.default_rng(seed)
        k = max(1, int(round(frac_gt * len(gt))))
        chosen = rng.permutation(len(gt))[:k]
        sub_seeds = rng.integers(0, 2**31 - 1, size=len(chosen))
        for idx, sub in zip(chosen, sub_seeds):
            boxes.append(jitter_box(gt[int(idx)], jitter_amp, frame, int(sub)))
            provenance.append("gt-jittered")
    return PromptBatch(boxes=boxes, provenance=provenance)


class PromptSegModel(nn.Module):
    """Backbone + proposal head + prompt encoders + decode heads."""

    def __init__(self, cfg: PromptSegConfig):
        super().__init__()
        self.cfg = cfg
        self.backbone = Backbone(cfg.backbone_channels)
        self.rpn_heads = nn.ModuleList(
            RegionProposalHead(ch, cfg.rpn_hidden) for ch in cfg.backbone_channels
        )
        lpm_cfg = LpmConfig(
            roi_size=cfg.s_ps,
            patch=part_patch_config(cfg.s_ps, cfg.embed_dim),
            mlp_hidden=cfg.mlp_hidden,
        )
        self.local_prompt = LocalPromptEncoder(lpm_cfg)
        self.global_prompt = GlobalPromptEncoder(
            AttentionConfig(cfg.embed_dim, cfg.heads, cfg.loops),
            roi_size=cfg.s_ps,
            global_patch=cfg.global_patch,
        )
        roi_ch = cfg.backbone_channels[cfg.roi_level]
        self.fuse = FusePrompts(roi_ch, cfg.embed_dim, cfg.fused_channels)
        trunk_in = cfg.fused_channels * cfg.roi_size * cfg.roi_size
        self.head_trunk = nn.Linear(trunk_in, cfg.head_hidden)
        self.class_out = nn.Linear(cfg.head_hidden, cfg.num_categories + 1)
        self.box_out = nn.Linear(cfg.head_hidden, 4)
        nn.init.zeros_(self.box_out.weight)
        nn.init.zeros_(self.box_out.bias)
        self.mask_head = MaskHead(cfg.fused_channels, cfg.num_categories, cfg.mask_size)

    # --- image-level encoding --------------------------------------------

    @property
    def pad_multiple(self) -> int:
        return max(2 ** self.cfg.stages, self.cfg.global_patch)

    def prepare_image(self, image: np.ndarray | torch.Tensor) -> torch.Tensor:
        """uint8 (H, W, 3) array or (3, H, W) tensor -> normalized (3, Hp, Wp)
        tensor padded (bottom/right, zeros) to the backbone multiple."""
        if isinstance(image, np.ndarray):
            t = torch.from_numpy(np.ascontiguousarray(image)).permute(2, 0, 1).float()
            t = t / 255.0
        else:
            t = image.float()
        _, h, w = t.shape
        m = self.pad_multiple
        ph = (m - h % m) % m
        pw = (m - w % m) % m
        if ph or pw:
            t = F.pad(t, (0, pw, 0, ph))
        return t

    def encode_image(self, image: np.ndarray | torch.Tensor) -> SessionFeatures:
        """Run the backbone (and the instance-independent global token
        evolution) once; the result serves any number of prompt calls."""
        if isinstance(image, np.ndarray):
            height, width = image.shape[:2]
        else:
            height, width = int(image.shape[-2]), int(image.shape[-1])
        padded = self.prepare_image(image)
        with torch.no_grad():
            features = self.backbone(padded.unsqueeze(0))
            stages = (
                [s for s in self.global_prompt.global_token_stages(padded)]
                if self.cfg.use_gpm
                else None
            )
        digest = hashlib.sha256()
        for f in features:
            digest.update(f.numpy().tobytes())
        return SessionFeatures(
            image=padded,
            features=features,
            global_stages=stages,
            width=width,
            height=height,
            fingerprint=digest.hexdigest(),
        )

    # --- proposals ---------------------------------------------------------

    def _propose(
        self,
        features: list[torch.Tensor],
        image_hw: tuple[int, int],
        top_k: int | None = None,
        nms_iou: float | None = None,
    ):
        """Dense anchors scored and regressed per level, clipped, NMS'd,
        and ranked. Returns (boxes (N,4) differentiable, scores (N,),
        objectness (A,), deltas (A,4), anchors (A,4))."""
        top_k = self.cfg.rpn_top_k if top_k is None else top_k
        nms_iou = self.cfg.rpn_nms_iou if nms_iou is None else nms_iou
        h, w = image_hw
        all_obj, all_deltas, all_anchors = [], [], []
        for level, (feat, head) in enumerate(zip(features, self.rpn_heads)):
            obj, deltas = head(feat)
            stride = 2 ** (level + 1)
            side = self.cfg.anchor_base * stride
            rows, cols = feat.shape[-2:]
            anchors = _level_anchors(rows, cols, stride, side, dtype=feat.dtype)
            all_obj.append(obj.squeeze(0))
            all_deltas.append(deltas.squeeze(0))
            all_anchors.append(anchors)
        objectness = torch.cat(all_obj)
        deltas = torch.cat(all_deltas)
        anchors = torch.cat(all_anchors)
        boxes = clip_boxes(apply_deltas(anchors, deltas), float(w), float(h))
        scores = torch.sigmoid(objectness)
        keep = stable_nms(boxes, scores.detach(), nms_iou)[:top_k]
        return boxes[keep], scores[keep], objectness, deltas, anchors

    def generate_proposals(
        self,
        features: list[torch.Tensor],
        image_hw: tuple[int, int],
        top_k: int | None = None,
        nms_iou: float | None = None,
    ) -> ProposalSet:
        boxes, scores, *_ = self._propose(features, image_hw, top_k, nms_iou)
        return ProposalSet(
            boxes=tensor_to_boxes(boxes), scores=[float(s) for s in scores]
        )

    # --- prompt encoding ----------------------------------------------------

    def _encode_prompts(
        self,
        image: torch.Tensor,
        boxes_t: torch.Tensor,
        features: list[torch.Tensor],
        global_stages: list[torch.Tensor] | None = None,
    ) -> torch.Tensor:
        """RoI features + prompt embeddings -> fused (P, C', R, R) blocks."""
        cfg = self.cfg
        stride = 2 ** (cfg.roi_level + 1)
        roi = roi_max_pool(
            features[cfg.roi_level].squeeze(0), boxes_t, stride, cfg.roi_size
        )
        box_list = tensor_to_boxes(boxes_t)
        n = boxes_t.shape[0]
        if cfg.use_lpm:
            _, local_pooled = self.local_prompt.encode_boxes(image, box_list)
        else:
            local_pooled = torch.zeros(n, cfg.embed_dim, dtype=roi.dtype)
        if cfg.use_gpm:
            if global_stages is None:
                global_stages = self.global_prompt.global_token_stages(image)
            _, global_pooled = self.global_prompt.encode_boxes(
                image, box_list, global_stages
            )
        else:
            global_pooled = torch.zeros(n, cfg.embed_dim, dtype=roi.dtype)
        return self.fuse(roi, local_pooled, global_pooled)

    def _heads(self, fused: torch.Tensor):
        trunk = F.relu(self.head_trunk(fused.flatten(1)))
        return self.class_out(trunk), self.box_out(trunk), self.mask_head(fused)

    # --- decoding -----------------------------------------------------------

    def decode_instances(
        self,
        image: torch.Tensor,
        features: list[torch.Tensor],
        prompts: PromptBatch,
        global_stages: list[torch.Tensor] | None = None,
        image_hw: tuple[int, int] | None = None,
    ) -> list[InstanceResult]:
        """Per prompt box: fuse RoI features with prompt embeddings, then
        refine the box, classify, and emit the chosen category's mask.
        Background-classified boxes are dropped, except manual prompts,
        which are kept with their best foreground category and flagged when
        below the score threshold."""
        if len(prompts) == 0:
            return []
        cfg = self.cfg
        if image_hw is None:
            image_hw = (int(image.shape[-2]), int(image.shape[-1]))
        h, w = image_hw
        boxes_t = boxes_to_tensor(prompts.boxes)
        with torch.no_grad():
            fused = self._encode_prompts(image, boxes_t, features, global_stages)
            class_logits, box_deltas, mask_logits = self._heads(fused)
            probs = class_logits.softmax(dim=-1)
            refined = clip_boxes(apply_deltas(boxes_t, box_deltas), float(w), float(h))
            masks = torch.sigmoid(mask_logits)
        background = cfg.num_categories
        results: list[InstanceResult] = []
        for i, provenance in enumerate(prompts.provenance):
            top_all = int(probs[i].argmax())
            is_manual = provenance == "manual"
            if top_all == background and not is_manual:
                continue
            category = int(probs[i, :background].argmax())
            score = float(probs[i, category])
            below = score < cfg.score_thresh or top_all == background
            results.append(
                InstanceResult(
                    box=Box(*(float(v) for v in refined[i])),
                    category=category,
                    score=score,
                    mask=masks[i, category] >= 0.5,
                    provenance=provenance,
                    below_threshold=below and is_manual,
                )
            )
        return results

    def promptable_segment(
        self, session: SessionFeatures, boxes: list[Box]
    ) -> list[InstanceResult]:
        """Decode the given boxes against cached features; the backbone is
        not re-executed."""
        if not boxes:
            return []
        frame = AnnotationFrame(float(session.width), float(session.height))
        clamped = [_clamp_box(b, frame) for b in boxes]
        batch = PromptBatch(boxes=clamped, provenance=["manual"] * len(clamped))
        return self.decode_instances(
            session.image,
            session.features,
            batch,
            global_stages=session.global_stages,
            image_hw=(session.height, session.width),
        )

    def segment_auto(self, session: SessionFeatures) -> list[InstanceResult]:
        """Automatic path: proposals as prompts, score threshold, and
        per-category NMS."""
        proposals = self.generate_proposals(
            session.features, (session.height, session.width)
        )
        batch = PromptBatch(
            boxes=list(proposals.boxes), provenance=["proposal"] * len(proposals)
        )
        results = self.decode_instances(
            session.image,
            session.features,
            batch,
            global_stages=session.global_stages,
            image_hw=(session.height, session.width),
        )
        results = [r for r in results if r.score >= self.cfg.score_thresh]
        kept: list[InstanceResult] = []
        for cat in range(self.cfg.num_categories):
            group = [r for r in results if r.category == cat]
            if not group:
                continue
            boxes_t = boxes_to_tensor([r.box for r in group])
            scores_t = torch.tensor([r.score for r in group])
            keep = stable_nms(boxes_t, scores_t, self.cfg.nms_thresh)
            kept.extend(group[int(i)] for i in keep)
        kept.sort(key=lambda r: -r.score)
        return kept

    # --- training -----------------------------------------------------------

    def forward_training(
        self, scene: Scene, seed: int
    ) -> tuple[torch.Tensor, LossBundle]:
        """One full training forward pass on a scene: proposals, sampled
        prompts, decode heads, and the four-component objective."""
        cfg = self.cfg
        image = self.prepare_image(scene.image)
        h, w = scene.height, scene.width
        features = self.backbone(image.unsqueeze(0))
        prop_boxes, _, objectness, rpn_deltas, anchors = self._propose(
            features, (h, w)
        )

        gt_boxes = [inst.box for inst in scene.instances]
        gt_boxes_t = boxes_to_tensor(gt_boxes)
        gt_cats_t = torch.tensor(
            [inst.category for inst in scene.instances], dtype=torch.long
        )

        frame = AnnotationFrame(float(w), float(h))
        batch = sample_training_prompts(
            ProposalSet(
                boxes=tensor_to_boxes(prop_boxes),
                scores=[0.0] * prop_boxes.shape[0],
            ),
            gt_boxes,
            cfg.frac_gt,
            cfg.jitter,
            frame,
            seed,
        )
        prompt_t = boxes_to_tensor(batch.boxes)
        fused = self._encode_prompts(image, prompt_t, features)
        class_logits, box_deltas, mask_logits = self._heads(fused)

        classes, matched = match_prompts(
            prompt_t, gt_boxes_t, gt_cats_t, background_index=cfg.num_categories
        )
        p = prompt_t.shape[0]
        box_targets = torch.zeros(p, 4)
        mask_targets = torch.zeros(p, cfg.mask_size, cfg.mask_size)
        fg = classes < cfg.num_categories
        if fg.any():
            box_targets[fg] = encode_deltas(prompt_t[fg], gt_boxes_t[matched[fg]])
            # mask targets live in the frame of the (detached) refined box,
            # the same frame the decoded mask is pasted into
            refined = clip_boxes(
                apply_deltas(prompt_t, box_deltas.detach()), float(w), float(h)
            )
            for i in torch.nonzero(fg).flatten().tolist():
                inst = scene.instances[int(matched[i])]
                target_box = _ensure_min_size(
                    Box(*(float(v) for v in refined[i])), 2.0, frame
                )
                gt_mask = torch.from_numpy(inst.mask.astype(np.float32))[None]
                crop = crop_resize(gt_mask, target_box, cfg.mask_size)
                mask_targets[i] = (crop.squeeze(0) >= 0.5).float()

        rpn_labels, rpn_delta_targets = rpn_targets(anchors, gt_boxes_t)
        preds = PipelinePredictions(
            rpn_objectness=objectness,
            rpn_deltas=rpn_deltas,
            proposals=prop_boxes,
            class_logits=class_logits,
            box_deltas=box_deltas,
            mask_logits=mask_logits,
        )
        targets = PipelineTargets(
            rpn_labels=rpn_labels,
            rpn_deltas=rpn_delta_targets,
            gt_boxes=gt_boxes_t,
            classes=classes,
            box_deltas=box_targets,
            masks=mask_targets,
        )
        return total_loss(preds, targets, eps=cfg.eps, use_parea=cfg.use_parea)


def _clamp_box(b: Box, frame: AnnotationFrame) -> Box:
    x0 = min(max(b.x_min, 0.0), frame.width)
    x1 = min(max(b.x_max, 0.0), frame.width)
    y0 = min(max(b.y_min, 0.0), frame.height)
    y1 = min(max(b.y_max, 0.0), frame.height)
    return Box(x0, y0, x1, y1)


def _ensure_min_size(b: Box, min_side: float, frame: AnnotationFrame) -> Box:
    """Grow degenerate boxes symmetrically to a minimum side, inside the
    frame."""
    x0, y0, x1, y1 = b.as_tuple()
    if x1 - x0 < min_side:
        cx = (x0 + x1) / 2
        x0, x1 = cx - min_side / 2, cx + min_side / 2
    if y1 - y0 < min_side:
        cy = (y0 + y1) / 2
        y0, y1 = cy - min_side / 2, cy + min_side / 2
    return _clamp_box(Box(x0, y0, x1, y1), frame)


def build_model(cfg: PromptSegConfig, seed: int = 0) -> PromptSegModel:
    """Construct a model with seeded, reproducible initialization."""
    torch.manual_seed(seed)
    return PromptSegModel(cfg)


def train_step(
    model: PromptSegModel,
    scene: Scene,
    optimizer: torch.optim.Optimizer,
    seed: int,
) -> LossBundle:
    """One forward/backward/update on a single scene; deterministic for a
    given seed and model state."""
    model.train()
    optimizer.zero_grad()
    total, bundle = model.forward_training(scene, seed)
    total.backward()
    optimizer.step()
    return bundle


def paste_mask(
    mask: torch.Tensor, box: Box, height: int, width: int
) -> np.ndarray:
    """Upsample a box-relative binary mask into an image-frame bool grid."""
    x0 = int(np.floor(box.x_min))
    y0 = int(np.floor(box.y_min))
    x1 = int(np.ceil(box.x_max))
    y1 = int(np.ceil(box.y_max))
    x0, y0 = max(x0, 0), max(y0, 0)
    x1, y1 = min(x1, width), min(y1, height)
    out = np.zeros((height, width), dtype=bool)
    if x1 <= x0 or y1 <= y0:
        return out
    m = mask.float()[None, None]
    resized = F.interpolate(
        m, size=(y1 - y0, x1 - x0), mode="bilinear", align_corners=False
    )
    out[y0:y1, x0:x1] = (resized[0, 0] >= 0.5).numpy()
    return out
