"""Single declarative configuration for the model, training, data, and
service. Every key can be overridden by the matching CLI flag.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

__all__ = ["PromptSegConfig", "load_config"]


@dataclass
class PromptSegConfig:
    """All tunable knobs in one place.

    Model geometry
      image_size:        training image side in pixels (square scenes)
      num_categories:    foreground category count K (background is K)
      backbone_channels: output channels per stride-2 stage; the length
                         sets the stage count M
      embed_dim:         prompt token width (divisible by heads and by 4)
      heads:             attention heads in the self-attention blocks
      loops:             self-attention + global-to-local rounds
      s_ps:              unified square side for instance crops
      mask_size:         side of predicted instance masks
      mlp_hidden:        hidden width of the local-prompt token mixer
      global_patch:      non-overlapping patch side for global tokens
      roi_level:         backbone stage (0-based) used for RoI pooling
      roi_size:          RoI pooling output side
      fused_channels:    channels after prompt fusion
      head_hidden:       hidden width of the box/class head trunk

    Proposals
      rpn_hidden:   channels of the per-level proposal head
      anchor_base:  anchor side at stage i is anchor_base * 2^(i+1)
      rpn_top_k:    proposals kept after NMS
      rpn_nms_iou:  IoU threshold of proposal NMS

    Prompting and objective
      use_lpm / use_gpm / use_parea: component toggles for ablations
      frac_gt:    fraction of ground-truth boxes sampled as training prompts
      jitter:     box jitter amplitude as a fraction of side length
      eps:        stabilizer in the proposal area loss denominator

    Training
      lr, momentum: SGD settings
      steps:        training steps (one scene per step)
      seed:         base RNG seed (mandatory on the train CLI)

    Inference
      score_thresh: minimum score for automatic detections
      nms_thresh:   per-class NMS IoU at inference

    Service
      session_cap:    LRU capacity of cached sessions
      max_image_side: uploads with a longer side are rejected
    """

    image_size: int = 64
    num_categories: int = 3
    backbone_channels: tuple[int, ...] = (16, 32, 64)
    embed_dim: int = 64
    heads: int = 4
    loops: int = 2
    s_ps: int = 28
    mask_size: int = 28
    mlp_hidden: int = 128
    global_patch: int = 16
    roi_level: int = 1
    roi_size: int = 7
    fused_channels: int = 64
    head_hidden: int = 256
    rpn_hidden: int = 32
    anchor_base: float = 4.0
    rpn_top_k: int = 16
    rpn_nms_iou: float = 0.7
    use_lpm: bool = True
    use_gpm: bool = True
    use_parea: bool = True
    frac_gt: float = 0.5
    jitter: float = 0.05
    eps: float = 1e-7
    lr: float = 0.01
    momentum: float = 0.9
    steps: int = 200
    seed: int = 0
    score_thresh: float = 0.05
    nms_thresh: float = 0.5
    session_cap: int = 16
    max_image_side: int = 384

    def __post_init__(self) -> None:
        self.backbone_channels = tuple(self.backbone_channels)
        if len(self.backbone_channels) < 2:
            raise ValueError("need at least two backbone stages")
        if self.embed_dim % self.heads or self.embed_dim % 4:
            raise ValueError("embed_dim must be divisible by heads and by 4")
        if not 0.0 <= self.frac_gt <= 1.0:
            raise ValueError("frac_gt must lie in [0, 1]")
        if not 0 <= self.roi_level < len(self.backbone_channels):
            raise ValueError("roi_level out of range")

    @property
    def stages(self) -> int:
        return len(self.backbone_channels)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @staticmethod
    def from_dict(values: dict) -> "PromptSegConfig":
        known = {f.name for f in dataclasses.fields(PromptSegConfig)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return PromptSegConfig(**values)


def load_config(path: str | Path | None, overrides: dict | None = None) -> PromptSegConfig:
    """Read a YAML config file and apply non-None overrides on top."""
    values: dict = {}
    if path is not None:
        with open(path) as fh:
            loaded = yaml.safe_load(fh) or {}
        if not isinstance(loaded, dict):
            raise ValueError(f"config root must be a mapping, got {type(loaded)}")
        values.update(loaded)
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    return PromptSegConfig.from_dict(values)
