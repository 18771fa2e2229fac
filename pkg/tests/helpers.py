"""Shared test helpers: independent oracles kept deliberately naive."""

from __future__ import annotations

import numpy as np
import torch


def bruteforce_area_loss(
    proposals: list[tuple[float, float, float, float]],
    gt_boxes: list[tuple[float, float, float, float]],
    prop_frame: tuple[float, float],
    gt_frame: tuple[float, float],
    eps: float,
) -> float:
    """Plain-loop reimplementation of the proposal area penalty.

    Scales proposals into the gt frame, matches each proposal to the gt box
    of maximal IoU (lowest index wins ties), and averages the squared
    relative area error. Shares no code with the library implementation.
    """
    if not proposals or not gt_boxes:
        return 0.0
    sx = gt_frame[0] / prop_frame[0]
    sy = gt_frame[1] / prop_frame[1]
    total = 0.0
    for (px0, py0, px1, py1) in proposals:
        px0, px1 = px0 * sx, px1 * sx
        py0, py1 = py0 * sy, py1 * sy
        best_iou = -1.0
        best_j = 0
        for j, (gx0, gy0, gx1, gy1) in enumerate(gt_boxes):
            iw = min(px1, gx1) - max(px0, gx0)
            ih = min(py1, gy1) - max(py0, gy0)
            inter = iw * ih if (iw > 0 and ih > 0) else 0.0
            a_p = (px1 - px0) * (py1 - py0)
            a_g = (gx1 - gx0) * (gy1 - gy0)
            union = a_p + a_g - inter
            iou = inter / union if union > 0 else 0.0
            if iou > best_iou:
                best_iou = iou
                best_j = j
        gx0, gy0, gx1, gy1 = gt_boxes[best_j]
        area_p = (px1 - px0) * (py1 - py0)
        area_g = (gx1 - gx0) * (gy1 - gy0)
        total += (abs(area_p - area_g) / (area_g + eps)) ** 2
    return total / len(proposals)


def random_box(rng: np.random.Generator, width: float, height: float):
    x0, x1 = np.sort(rng.uniform(0, width, 2))
    y0, y1 = np.sort(rng.uniform(0, height, 2))
    # keep a minimum side so areas stay well away from underflow
    x1 = min(width, x1 + 1.0)
    y1 = min(height, y1 + 1.0)
    return (float(x0), float(y0), float(x1), float(y1))


def numeric_grads(params: list[torch.nn.Parameter], loss_fn, step: float = 1e-5):
    """Central finite differences of loss_fn() w.r.t. each parameter tensor.

    Perturbs parameter data in place (restoring it afterwards), so loss_fn
    must recompute the forward pass from the live parameters.
    """
    grads = []
    with torch.no_grad():
        for p in params:
            g = torch.zeros_like(p)
            flat, gflat = p.data.view(-1), g.view(-1)
            for i in range(flat.numel()):
                orig = flat[i].item()
                flat[i] = orig + step
                hi = float(loss_fn())
                flat[i] = orig - step
                lo = float(loss_fn())
                flat[i] = orig
                gflat[i] = (hi - lo) / (2 * step)
            grads.append(g)
    return grads


def autograd_grads(params: list[torch.nn.Parameter], loss_fn):
    for p in params:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    return [
        p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
        for p in params
    ]


def max_grad_rel_error(analytic, numeric, floor: float = 1e-4) -> float:
    """Worst elementwise relative error between two gradient lists.

    Entries below the floor in both gradients are effectively compared
    absolutely (at floor * tolerance); softmax shift-invariance makes some
    attention-bias gradients exactly zero, where finite differences only
    return round-off noise.
    """
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = torch.maximum(torch.maximum(a.abs(), n.abs()), torch.full_like(a, floor))
        worst = max(worst, ((a - n).abs() / denom).max().item())
    return worst


def gradcheck_module(module: torch.nn.Module, loss_fn, step: float = 1e-5) -> float:
    """Compare autograd and finite-difference gradients over every parameter
    of a module; returns the worst relative error. Module must be double()."""
    params = [p for p in module.parameters() if p.requires_grad]
    analytic = autograd_grads(params, loss_fn)
    numeric = numeric_grads(params, loss_fn, step=step)
    return max_grad_rel_error(analytic, numeric)
