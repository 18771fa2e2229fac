"""Uncompressed run-length codec for binary masks.

Row-major order; counts alternate runs of zeros and ones, and the first
count is always of zeros (possibly 0). Shared bit-exactly by the on-disk
scene format and the HTTP mask wire format.
"""

from __future__ import annotations

import numpy as np

__all__ = ["rle_encode", "rle_decode", "RleError"]


class RleError(ValueError):
    """Raised when counts do not reconstruct a width x height grid."""


def rle_encode(mask: np.ndarray) -> list[int]:
    """Encode a 2-D binary mask into alternating run counts."""
    flat = np.asarray(mask, dtype=bool).reshape(-1)
    if flat.size == 0:
        return [0]
    changes = np.nonzero(np.diff(flat))[0] + 1
    boundaries = np.concatenate(([0], changes, [flat.size]))
    counts = np.diff(boundaries).tolist()
    if flat[0]:
        counts = [0] + counts
    return [int(c) for c in counts]


def rle_decode(counts: list[int], width: int, height: int) -> np.ndarray:
    """Expand run counts back into a bool (height, width) grid."""
    if any(c < 0 for c in counts):
        raise RleError(f"negative run count in {counts[:8]}...")
    total = sum(counts)
    if total != width * height:
        raise RleError(f"counts sum to {total}, expected {width * height}")
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for c in counts:
        if value:
            flat[pos : pos + c] = True
        pos += c
        value = not value
    return flat.reshape(height, width)
