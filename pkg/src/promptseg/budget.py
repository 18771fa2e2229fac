"""Diagnostic calculator for the information budget of a downsampling
feature hierarchy versus an un-downsampled prompt path.

Stage i of the hierarchy scales the input signal by a channel gain
exp(stage_gain * i) and a spatial decay exp(-spatial_decay * s_i^2), where
s_i counts the downsampling steps accumulated by that stage. The prompt
path applies a single gain exp(prompt_gain) with no spatial decay. Purely
numeric; nothing here is learned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["InformationBudgetParams", "BudgetReport", "information_budget"]


@dataclass(frozen=True)
class InformationBudgetParams:
    """Coefficients of the budget model.

    stage_gain:        per-stage channel information gain coefficient
    spatial_decay:     spatial information decay coefficient
    prompt_gain:       prompt-path gain coefficient
    stages:            number of hierarchy stages M
    downsample_counts: s_i per stage; defaults to (1, 2, ..., M), one
                       downsampling per stage
    """

    stage_gain: float = 0.1
    spatial_decay: float = 0.05
    prompt_gain: float = 0.1
    stages: int = 3
    downsample_counts: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        for name in ("stage_gain", "spatial_decay", "prompt_gain"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.stages < 1:
            raise ValueError("stages must be >= 1")
        if self.downsample_counts is not None:
            object.__setattr__(
                self, "downsample_counts", tuple(self.downsample_counts)
            )
            if len(self.downsample_counts) != self.stages:
                raise ValueError(
                    f"need {self.stages} downsample counts, got "
                    f"{len(self.downsample_counts)}"
                )

    def counts(self) -> tuple[int, ...]:
        if self.downsample_counts is not None:
            return self.downsample_counts
        return tuple(range(1, self.stages + 1))


@dataclass
class BudgetReport:
    """Evaluated budget: per-stage values, their sum (what a decoder fed by
    the hierarchy alone sees), and the prompt-path value."""

    stage_values: list[float]
    gain_factors: list[float]
    decay_factors: list[float]
    hierarchy_total: float
    prompt_value: float


def information_budget(p: InformationBudgetParams, signal: float = 1.0) -> BudgetReport:
    """Evaluate the budget model for every stage and the prompt path."""
    gains, decays, values = [], [], []
    for i, s_i in zip(range(1, p.stages + 1), p.counts()):
        gain = math.exp(p.stage_gain * i)
        decay = math.exp(-p.spatial_decay * s_i * s_i)
        gains.append(gain)
        decays.append(decay)
        values.append(gain * decay * signal)
    return BudgetReport(
        stage_values=values,
        gain_factors=gains,
        decay_factors=decays,
        hierarchy_total=sum(values),
        prompt_value=math.exp(p.prompt_gain) * signal,
    )
