"""Deterministic synthetic dental-scene generator.

Scenes are built for desk-scale verification of the segmentation stack:
ellipse "teeth" on a pink "gum" background along a U-shaped arc (jaw
views) or two horizontal rows with spacing shrinking toward the image
borders (front view). Each scene carries its ground-truth mask and
keypoints, three pseudo feature stacks (noisy downsampled copies of the
mask at strides 4, 4, 8), and a rendered heatmap bundle at stride 4.

Randomness comes from a single numpy PCG64 generator per scene, seeded
through SeedSequence, so identical configs reproduce byte-identical
scenes on any platform.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import imaging
from .errors import InvalidConfigError
from .keypoints import HeatmapBundle, Keypoint, render_heatmap, save_keypoints_json

JAW_TEETH = (10, 16)
FRONT_TEETH = (18, 24)
STACK_STRIDES = (4, 4, 8)
HEATMAP_STRIDE = 4

GUM_BASE = (196.0, 120.0, 132.0)
TOOTH_BASE = (228.0, 218.0, 182.0)
SPOT_VALUE = 252.0


@dataclass(frozen=True)
class SynthConfig:
    view: str = "lower"
    size: int = 512
    teeth: tuple[int, int] | None = None  # None = per-view default
    tooth_color_jitter: float = 9.0
    gum_color_jitter: float = 6.0
    specular_prob: float = 0.35
    specular_radius: tuple[int, int] = (3, 6)  # px at size 512, scaled with size
    illumination: float = 0.08  # relative brightness swing across the frame
    tooth_shading: float = 0.17  # darkening toward each tooth gum line
    blotches: tuple[int, int] = (3, 6)  # bright gum patches per scene
    noise_std: float = 8.0
    kp_jitter: float = 2.0
    sigma: float | None = None  # None: 4 heatmap cells at size 512, scaled with size
    stack_channels: int = 6
    stack_noise: float = 0.06
    seed: int = 0

    def __post_init__(self) -> None:
        if self.view not in ("lower", "upper", "front"):
            raise InvalidConfigError(f"unknown view {self.view!r}")
        if self.size < 64 or self.size % 8 != 0:
            raise InvalidConfigError("size must be >= 64 and divisible by 8")
        counts = self.tooth_range()
        if counts[0] < 2 or counts[1] < counts[0]:
            raise InvalidConfigError("tooth count range must be >= 2 and ordered")
        if self.sigma is not None and self.sigma <= 0:
            raise InvalidConfigError("sigma must be > 0")
        if self.noise_std < 0 or self.kp_jitter < 0:
            raise InvalidConfigError("noise/jitter must be >= 0")
        if not 0 <= self.specular_prob <= 1:
            raise InvalidConfigError("specular_prob must lie in [0, 1]")
        if not 0 <= self.illumination < 1:
            raise InvalidConfigError("illumination must lie in [0, 1)")
        if not 0 <= self.tooth_shading < 1:
            raise InvalidConfigError("tooth_shading must lie in [0, 1)")

    def tooth_range(self) -> tuple[int, int]:
        if self.teeth is not None:
            return self.teeth
        return FRONT_TEETH if self.view == "front" else JAW_TEETH

    def heatmap_sigma(self) -> float:
        # keep the separation/width ratio constant across scene sizes
        if self.sigma is not None:
            return self.sigma
        return max(1.0, 4.0 * self.size / 512.0)


@dataclass
class SyntheticScene:
    image: np.ndarray
    gt_mask: np.ndarray
    gt_keypoints: list[Keypoint]
    stacks: list[np.ndarray]
    bundle: HeatmapBundle
    tooth_centers: list[tuple[float, float]] = field(default_factory=list)


@dataclass(frozen=True)
class _Tooth:
    cx: float
    cy: float
    ra: float  # semi-axis along the rotated x direction
    rb: float
    angle: float


def _tooth_region(
    tooth: _Tooth, size: int
) -> tuple[slice, slice, np.ndarray, np.ndarray]:
    reach = max(tooth.ra, tooth.rb) + 1.0
    x0 = max(0, min(size, int(tooth.cx - reach)))
    x1 = max(x0, min(size, int(tooth.cx + reach) + 2))
    y0 = max(0, min(size, int(tooth.cy - reach)))
    y1 = max(y0, min(size, int(tooth.cy + reach) + 2))
    ys, xs = np.mgrid[y0:y1, x0:x1]
    dx = xs - tooth.cx
    dy = ys - tooth.cy
    cos_a = math.cos(tooth.angle)
    sin_a = math.sin(tooth.angle)
    u = dx * cos_a + dy * sin_a
    v = -dx * sin_a + dy * cos_a
    inside = (u / tooth.ra) ** 2 + (v / tooth.rb) ** 2 <= 1.0
    return slice(y0, y1), slice(x0, x1), inside, v / tooth.rb


def _jaw_layout(cfg: SynthConfig, rng: np.random.Generator, count: int) -> list[_Tooth]:
    size = cfg.size
    span = math.radians(140.0)
    rx = 0.33 * size
    ry = 0.36 * size
    cx = 0.5 * size
    cy = 0.34 * size if cfg.view == "lower" else 0.66 * size
    sign = 1.0 if cfg.view == "lower" else -1.0

    us = np.linspace(-span / 2, span / 2, count)
    step = float(us[1] - us[0])
    us = us + rng.uniform(-0.07, 0.07, count) * step
    teeth = []
    for u in us:
        x = cx + rx * math.sin(u)
        y = cy + sign * ry * math.cos(u)
        # tangent of the arc at u gives the tooth's along-arc direction
        tx = rx * math.cos(u)
        ty = -sign * ry * math.sin(u)
        angle = math.atan2(ty, tx)
        arc_spacing = step * math.hypot(tx, ty)
        ra = 0.38 * arc_spacing * rng.uniform(0.9, 1.05)
        rb = ra * rng.uniform(1.3, 1.6)
        teeth.append(_Tooth(x, y, ra, rb, angle))
    return teeth


def _front_layout(cfg: SynthConfig, rng: np.random.Generator, count: int) -> list[_Tooth]:
    size = cfg.size
    n_upper = (count + 1) // 2
    rows = ((0.40 * size, n_upper), (0.60 * size, count - n_upper))
    half_width = 0.41 * size
    compression = 0.7  # phase span of the sine law; edges squeeze together
    teeth = []
    for row_y, row_count in rows:
        phases = compression * math.pi * ((np.arange(row_count) + 0.5) / row_count - 0.5)
        xs = 0.5 * size + half_width * np.sin(phases) / math.sin(compression * math.pi / 2)
        gaps = np.diff(xs)
        for i, x in enumerate(xs):
            local = gaps[min(i, len(gaps) - 1)] if len(gaps) else 0.12 * size
            ra = 0.36 * float(local) * rng.uniform(0.92, 1.02)
            rb = ra * rng.uniform(1.35, 1.65)
            y = row_y + rng.uniform(-0.006, 0.006) * size
            teeth.append(_Tooth(float(x), float(y), ra, rb, rng.uniform(-0.08, 0.08)))
    return teeth


def generate_scene(cfg: SynthConfig) -> SyntheticScene:
    """Build one deterministic scene from the config's seed."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))
    size = cfg.size
    lo, hi = cfg.tooth_range()
    count = int(rng.integers(lo, hi + 1))
    teeth = _front_layout(cfg, rng, count) if cfg.view == "front" else _jaw_layout(cfg, rng, count)

    gum = np.array(GUM_BASE) + rng.normal(0.0, cfg.gum_color_jitter, 3)
    image = np.empty((size, size, 3), dtype=np.float64)
    image[:, :] = gum
    gt_mask = np.zeros((size, size), dtype=bool)

    for tooth in teeth:
        ys, xs, inside, radial = _tooth_region(tooth, size)
        color = np.clip(np.array(TOOTH_BASE) + rng.normal(0.0, cfg.tooth_color_jitter, 3), 150.0, 250.0)
        # enamel darkens toward the gum line
        shade = 1.0 - cfg.tooth_shading * (radial[inside] + 1.0) / 2.0
        image[ys, xs][inside] = shade[:, None] * color[None, :]
        gt_mask[ys, xs] |= inside

    # bright gum patches: plausible tissue variation that global
    # thresholding confuses with teeth
    scale = size / 512.0
    for _ in range(int(rng.integers(cfg.blotches[0], cfg.blotches[1] + 1))):
        bx = rng.uniform(0.1, 0.9) * size
        by = rng.uniform(0.1, 0.9) * size
        br = rng.uniform(0.04, 0.10) * size
        lift = rng.uniform(18.0, 42.0)
        ys, xs, inside, _ = _tooth_region(_Tooth(bx, by, br, br * rng.uniform(0.6, 1.0), rng.uniform(0, math.pi)), size)
        patch = inside & ~gt_mask[ys, xs]
        image[ys, xs][patch] += lift

    # smooth directional illumination; teeth at the dark end sink toward
    # gum brightness, which keeps a single global threshold imperfect
    if cfg.illumination > 0:
        direction = rng.uniform(0.0, 2.0 * math.pi)
        axis = np.arange(size) / size - 0.5
        ramp = math.cos(direction) * axis[None, :] + math.sin(direction) * axis[:, None]
        gain = 1.0 + 2.0 * cfg.illumination * ramp
        image *= gain[:, :, None]

    # specular highlights sit on the gum just outside a tooth so they
    # perturb thresholding without touching the ground truth; they stay
    # near sensor saturation regardless of illumination. A separate RNG
    # stream keeps spot-free and spotty scenes identical elsewhere.
    spot_rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((cfg.seed, 0x5907))))
    for tooth in teeth:
        if spot_rng.random() >= cfg.specular_prob:
            continue
        direction = spot_rng.uniform(0.0, 2.0 * math.pi)
        reach = tooth.rb * spot_rng.uniform(1.3, 1.7)
        sx = tooth.cx + reach * math.cos(direction)
        sy = tooth.cy + reach * math.sin(direction)
        radius = max(
            1.0, spot_rng.integers(cfg.specular_radius[0], cfg.specular_radius[1] + 1) * scale
        )
        ys, xs, inside, _ = _tooth_region(_Tooth(sx, sy, radius, radius, 0.0), size)
        spot = inside & ~gt_mask[ys, xs]
        image[ys, xs][spot] = np.clip(SPOT_VALUE + spot_rng.normal(0.0, 1.5, 3), 247.0, 255.0)

    if cfg.noise_std > 0:
        image += rng.normal(0.0, cfg.noise_std, image.shape)
    image_u8 = np.clip(np.rint(image), 0, 255).astype(np.uint8)

    keypoints = []
    for tooth in teeth:
        kx, ky = tooth.cx, tooth.cy
        for _ in range(20):
            jx = tooth.cx + rng.normal(0.0, cfg.kp_jitter)
            jy = tooth.cy + rng.normal(0.0, cfg.kp_jitter)
            if 0 <= jx < size and 0 <= jy < size and gt_mask[int(jy), int(jx)]:
                kx, ky = jx, jy
                break
        keypoints.append(Keypoint(float(kx), float(ky)))

    stacks = []
    mask_f = gt_mask.astype(np.float32)
    for stride in STACK_STRIDES:
        down = mask_f.reshape(size // stride, stride, size // stride, stride).mean(axis=(1, 3))
        gains = rng.uniform(0.6, 1.4, cfg.stack_channels)
        noise = rng.normal(0.0, cfg.stack_noise, (cfg.stack_channels,) + down.shape)
        stack = np.clip(gains[:, None, None] * down[None, :, :] + noise, 0.0, None)
        stacks.append(stack.astype(np.float32))

    bundle = render_heatmap(
        keypoints, size // HEATMAP_STRIDE, size // HEATMAP_STRIDE, HEATMAP_STRIDE, cfg.heatmap_sigma()
    )
    centers = [(t.cx, t.cy) for t in teeth]
    return SyntheticScene(image_u8, gt_mask, keypoints, stacks, bundle, centers)


def scene_seed(base_seed: int, view_index: int, scene_index: int) -> int:
    """Deterministic per-scene seed derived from the dataset seed."""
    seq = np.random.SeedSequence(entropy=(int(base_seed), int(view_index), int(scene_index)))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def generate_dataset(
    cfg: SynthConfig,
    n: int,
    out_dir: str | Path,
    views: tuple[str, ...] | list[str] | None = None,
    jobs: int = 1,
) -> list[tuple[str, str]]:
    """Write n scenes per view plus a manifest; returns (image_id, view) rows.

    Per scene: ``<id>.png``, ``<id>_mask.png``, ``<id>_kps.json``,
    ``<id>_s{0,1,2}.fmap``, ``<id>_heat.fmap``, ``<id>_offx.fmap``,
    ``<id>_offy.fmap``. Scenes may be generated by a thread pool
    (``jobs``); files are always written in manifest order, so re-running
    with the same config produces a byte-identical directory tree.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    views = tuple(views) if views else (cfg.view,)
    tasks = [
        (f"{view}_{i:03d}", view, replace(cfg, view=view, seed=scene_seed(cfg.seed, view_index, i)))
        for view_index, view in enumerate(views)
        for i in range(n)
    ]
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            scenes = list(pool.map(lambda t: generate_scene(t[2]), tasks))
    else:
        scenes = [generate_scene(task_cfg) for _, _, task_cfg in tasks]

    manifest: list[tuple[str, str]] = []
    for (image_id, view, _), scene in zip(tasks, scenes):
        imaging.save_image(scene.image, out / f"{image_id}.png")
        imaging.save_mask(scene.gt_mask, out / f"{image_id}_mask.png")
        save_keypoints_json({image_id: scene.gt_keypoints}, out / f"{image_id}_kps.json")
        for k, stack in enumerate(scene.stacks):
            imaging.write_fmap(stack, out / f"{image_id}_s{k}.fmap")
        imaging.write_fmap(scene.bundle.heatmap[None], out / f"{image_id}_heat.fmap")
        imaging.write_fmap(scene.bundle.offset_x[None], out / f"{image_id}_offx.fmap")
        imaging.write_fmap(scene.bundle.offset_y[None], out / f"{image_id}_offy.fmap")
        manifest.append((image_id, view))
    doc = {"images": [{"image_id": i, "view": v} for i, v in manifest]}
    (out / "manifest.json").write_text(json.dumps(doc, indent=2) + "\n")
    return manifest


def load_scene_files(directory: str | Path, image_id: str) -> dict:
    """Reload one dataset entry (image, mask, keypoints, stacks, bundle)."""
    directory = Path(directory)
    image = imaging.load_image(directory / f"{image_id}.png")
    mask = imaging.load_mask(directory / f"{image_id}_mask.png")
    kps_doc = json.loads((directory / f"{image_id}_kps.json").read_text())
    kps = [Keypoint(float(x), float(y)) for x, y in kps_doc["images"][0]["keypoints"]]
    stacks = [imaging.read_fmap(directory / f"{image_id}_s{k}.fmap") for k in range(3)]
    heat = imaging.load_scalar_map(directory / f"{image_id}_heat.fmap")
    off_x = imaging.load_scalar_map(directory / f"{image_id}_offx.fmap")
    off_y = imaging.load_scalar_map(directory / f"{image_id}_offy.fmap")
    bundle = HeatmapBundle(heat, off_x, off_y, HEATMAP_STRIDE)
    return {"image": image, "mask": mask, "keypoints": kps, "stacks": stacks, "bundle": bundle}
