"""Synthetic scene generation with controlled foreground pixel ratio,
corpus statistics over the three standard ratio bins, and the on-disk
scene format (8-bit PNG plus a JSON sidecar with boxes, categories, and
run-length encoded masks).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import Box
from .rle import rle_decode, rle_encode

__all__ = [
    "CATEGORY_NAMES",
    "RATIO_BINS",
    "Instance",
    "Scene",
    "GeneratorProfile",
    "PROFILES",
    "SceneGenerationError",
    "generate_scene",
    "generate_corpus",
    "foreground_ratio",
    "foreground_ratio_stats",
    "FgRatioStats",
    "save_scene",
    "load_scene",
    "save_corpus",
    "load_corpus",
]

CATEGORY_NAMES = ("blob", "capsule", "slab")

# half-open on the left two bins, closed final bin
RATIO_BINS = ((0.0, 0.1), (0.1, 0.2), (0.2, 1.0))


class SceneGenerationError(RuntimeError):
    """Raised when no feasible composition hits the requested ratio bin."""


@dataclass
class Instance:
    """One annotated object: tight box, full-resolution bitmask, category."""

    box: Box
    mask: np.ndarray  # bool (H, W)
    category: int


@dataclass
class Scene:
    """An image with instance annotations and its generation metadata."""

    image: np.ndarray  # uint8 (H, W, 3)
    instances: list[Instance]
    seed: int = 0
    profile: str = ""

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def width(self) -> int:
        return self.image.shape[1]


@dataclass(frozen=True)
class GeneratorProfile:
    """Target distribution over foreground-ratio bins plus composition
    bounds. Bin weights must sum to 1."""

    name: str
    bin_weights: tuple[float, float, float]
    instance_range: tuple[int, int] = (1, 4)
    shapes: tuple[str, ...] = CATEGORY_NAMES

    def __post_init__(self) -> None:
        if abs(sum(self.bin_weights) - 1.0) > 1e-9:
            raise ValueError(f"bin weights must sum to 1, got {self.bin_weights}")
        lo, hi = self.instance_range
        if not (1 <= lo <= hi):
            raise ValueError(f"bad instance range {self.instance_range}")
        bad = set(self.shapes) - set(CATEGORY_NAMES)
        if bad:
            raise ValueError(f"unknown shapes {sorted(bad)}")


PROFILES: dict[str, GeneratorProfile] = {
    "ssdd-like": GeneratorProfile(
        "ssdd-like", (0.955, 0.045, 0.0), instance_range=(1, 3)
    ),
    "nwpu-like": GeneratorProfile(
        "nwpu-like", (0.841, 0.148, 0.011), instance_range=(1, 4)
    ),
    "coco-like": GeneratorProfile(
        "coco-like", (0.245, 0.201, 0.554), instance_range=(2, 6)
    ),
}


def ratio_bin(ratio: float) -> int:
    if ratio < 0.1:
        return 0
    if ratio < 0.2:
        return 1
    return 2


def foreground_ratio(scene: Scene) -> float:
    """Union-of-masks pixel count over the image area."""
    if not scene.instances:
        return 0.0
    union = np.zeros(scene.image.shape[:2], dtype=bool)
    for inst in scene.instances:
        union |= inst.mask
    return float(union.sum()) / union.size


@dataclass
class FgRatioStats:
    """Histogram over the three ratio bins plus the raw per-scene ratios."""

    counts: tuple[int, int, int]
    ratios: list[float]

    @property
    def fractions(self) -> tuple[float, float, float]:
        n = max(1, len(self.ratios))
        return tuple(c / n for c in self.counts)  # type: ignore[return-value]


def foreground_ratio_stats(scenes) -> FgRatioStats:
    ratios = [foreground_ratio(s) for s in scenes]
    counts = [0, 0, 0]
    for r in ratios:
        counts[ratio_bin(r)] += 1
    return FgRatioStats(counts=tuple(counts), ratios=ratios)


# --- shape rasterization -------------------------------------------------


def _ellipse_mask(size, rng, area):
    yy, xx = np.mgrid[0:size, 0:size]
    aspect = rng.uniform(0.7, 1.4)
    b = np.sqrt(area / (np.pi * aspect))
    a = aspect * b
    a, b = max(a, 1.5), max(b, 1.5)
    cx = rng.uniform(a + 1, size - a - 1) if size > 2 * a + 2 else size / 2
    cy = rng.uniform(b + 1, size - b - 1) if size > 2 * b + 2 else size / 2
    theta = rng.uniform(0, np.pi)
    dx, dy = xx - cx, yy - cy
    u = dx * np.cos(theta) + dy * np.sin(theta)
    v = -dx * np.sin(theta) + dy * np.cos(theta)
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def _capsule_mask(size, rng, area):
    yy, xx = np.mgrid[0:size, 0:size]
    elong = rng.uniform(2.0, 4.0)
    r = np.sqrt(area / (4 * elong + np.pi))
    r = max(r, 1.2)
    half = elong * r
    theta = rng.uniform(0, np.pi)
    ux, uy = np.cos(theta), np.sin(theta)
    reach_x = abs(ux) * half + r + 1
    reach_y = abs(uy) * half + r + 1
    cx = rng.uniform(reach_x, size - reach_x) if size > 2 * reach_x else size / 2
    cy = rng.uniform(reach_y, size - reach_y) if size > 2 * reach_y else size / 2
    dx, dy = xx - cx, yy - cy
    t = np.clip(dx * ux + dy * uy, -half, half)
    dist2 = (dx - t * ux) ** 2 + (dy - t * uy) ** 2
    return dist2 <= r * r


def _slab_mask(size, rng, area):
    # convex quadrilateral around a random center
    radius = np.sqrt(area / 2.2)
    radius = max(radius, 2.0)
    cx = rng.uniform(radius, size - radius) if size > 2 * radius else size / 2
    cy = rng.uniform(radius, size - radius) if size > 2 * radius else size / 2
    angles = np.sort(rng.uniform(0, 2 * np.pi, 4))
    rr = rng.uniform(0.7, 1.3, 4) * radius
    px = cx + rr * np.cos(angles)
    py = cy + rr * np.sin(angles)
    yy, xx = np.mgrid[0:size, 0:size]
    inside = np.ones((size, size), dtype=bool)
    for i in range(4):
        j = (i + 1) % 4
        cross = (px[j] - px[i]) * (yy - py[i]) - (py[j] - py[i]) * (xx - px[i])
        inside &= cross >= 0
    return inside


_SHAPE_FNS = {"blob": _ellipse_mask, "capsule": _capsule_mask, "slab": _slab_mask}

# bin interiors sampled away from the edges so the realized ratio lands in
# the drawn bin after compositing
_BIN_TARGETS = ((0.012, 0.085), (0.11, 0.185), (0.22, 0.40))


def _texture(size, rng, base, variation=0.25):
    coarse = rng.normal(0, 1, (max(2, size // 8), max(2, size // 8), 3))
    img = np.array(
        Image.fromarray(((coarse - coarse.min()) / np.ptp(coarse) * 255).astype(np.uint8))
        .resize((size, size), Image.BILINEAR),
        dtype=np.float64,
    ) / 255.0
    fine = rng.normal(0, 0.04, (size, size, 3))
    out = base + variation * (img - 0.5) + fine
    return np.clip(out, 0, 1)


_CATEGORY_TINT = {
    0: np.array([0.78, 0.62, 0.35]),  # warm bright blobs
    1: np.array([0.18, 0.22, 0.30]),  # dark elongated capsules
    2: np.array([0.45, 0.62, 0.50]),  # mid green slabs
}


def _compose(profile: GeneratorProfile, size: int, rng: np.random.Generator) -> Scene | None:
    u = rng.uniform()
    weights = np.asarray(profile.bin_weights)
    target_bin = int(np.searchsorted(np.cumsum(weights), u, side="right"))
    target_bin = min(target_bin, 2)
    lo, hi = _BIN_TARGETS[target_bin]
    target_ratio = rng.uniform(lo, hi)
    total_px = target_ratio * size * size

    n_lo, n_hi = profile.instance_range
    n = int(rng.integers(n_lo, n_hi + 1))
    # big targets need enough per-instance area; small ones need few shapes
    min_area = 12.0
    max_area = 0.45 * size * size
    n = max(1, min(n, int(total_px / min_area)))

    shares = rng.dirichlet(np.ones(n) * 4.0)
    areas = np.clip(shares * total_px, min_area, max_area)

    background = _texture(size, rng, base=np.array([0.42, 0.45, 0.48]))
    image = background.copy()
    occupied = np.zeros((size, size), dtype=bool)
    instances: list[Instance] = []
    for area in areas:
        shape_name = profile.shapes[int(rng.integers(len(profile.shapes)))]
        category = CATEGORY_NAMES.index(shape_name)
        placed = None
        for _ in range(40):
            mask = _SHAPE_FNS[shape_name](size, rng, float(area))
            if mask.sum() < 9:
                continue
            if (mask & occupied).any():
                continue
            placed = mask
            break
        if placed is None:
            continue
        occupied |= placed
        tint = _CATEGORY_TINT[category]
        fill = _texture(size, rng, base=tint, variation=0.18)
        image[placed] = fill[placed]
        ys, xs = np.nonzero(placed)
        box = Box(float(xs.min()), float(ys.min()), float(xs.max() + 1), float(ys.max() + 1))
        instances.append(Instance(box=box, mask=placed, category=category))

    if not instances:
        return None
    scene = Scene(image=(image * 255).astype(np.uint8), instances=instances)
    if ratio_bin(foreground_ratio(scene)) != target_bin:
        return None
    if not (n_lo <= len(scene.instances) <= n_hi):
        return None
    return scene


def generate_scene(
    profile: GeneratorProfile | str,
    size: int,
    seed: int,
    max_attempts: int = 40,
) -> Scene:
    """Composite textured shapes on structured noise with the total
    foreground ratio drawn from the profile's bin distribution.

    Deterministic per (profile, size, seed). Infeasible draws retry with a
    fresh sub-seed; exhausting the attempt budget raises
    SceneGenerationError.
    """
    if isinstance(profile, str):
        profile = PROFILES[profile]
    for attempt in range(max_attempts):
        rng = np.random.default_rng([seed, attempt, size])
        scene = _compose(profile, size, rng)
        if scene is not None:
            scene.seed = seed
            scene.profile = profile.name
            return scene
    raise SceneGenerationError(
        f"no feasible scene for profile={profile.name} size={size} seed={seed}"
    )


def generate_corpus(
    profile: GeneratorProfile | str, size: int, count: int, base_seed: int = 0
) -> list[Scene]:
    return [generate_scene(profile, size, base_seed + i) for i in range(count)]


# --- on-disk format ------------------------------------------------------


def save_scene(scene: Scene, directory: str | Path, name: str) -> None:
    """Write <name>.png (8-bit RGB) and <name>.json with boxes in corner
    pixel coordinates, category ids, and uncompressed row-major RLE masks
    (first count is of zeros)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    Image.fromarray(scene.image).save(directory / f"{name}.png")
    doc = {
        "width": scene.width,
        "height": scene.height,
        "seed": scene.seed,
        "profile": scene.profile,
        "category_names": list(CATEGORY_NAMES),
        "instances": [
            {
                "box": list(inst.box.as_tuple()),
                "category": inst.category,
                "mask_rle": rle_encode(inst.mask),
            }
            for inst in scene.instances
        ],
    }
    with open(directory / f"{name}.json", "w") as fh:
        json.dump(doc, fh)


def load_scene(directory: str | Path, name: str) -> Scene:
    directory = Path(directory)
    image = np.asarray(Image.open(directory / f"{name}.png").convert("RGB"))
    with open(directory / f"{name}.json") as fh:
        doc = json.load(fh)
    instances = [
        Instance(
            box=Box(*inst["box"]),
            mask=rle_decode(inst["mask_rle"], doc["width"], doc["height"]),
            category=int(inst["category"]),
        )
        for inst in doc["instances"]
    ]
    return Scene(
        image=image,
        instances=instances,
        seed=int(doc.get("seed", 0)),
        profile=doc.get("profile", ""),
    )


def save_corpus(scenes: list[Scene], directory: str | Path) -> None:
    """Write every scene plus a manifest listing names, profile, and seeds."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = []
    for i, scene in enumerate(scenes):
        name = f"scene_{i:05d}"
        save_scene(scene, directory, name)
        names.append(name)
    manifest = {
        "count": len(scenes),
        "profile": scenes[0].profile if scenes else "",
        "size": scenes[0].width if scenes else 0,
        "seeds": [s.seed for s in scenes],
        "scenes": names,
    }
    with open(directory / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)


def load_corpus(directory: str | Path) -> list[Scene]:
    directory = Path(directory)
    with open(directory / "manifest.json") as fh:
        manifest = json.load(fh)
    return [load_scene(directory, name) for name in manifest["scenes"]]
