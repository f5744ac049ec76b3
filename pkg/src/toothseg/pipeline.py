"""End-to-end segmentation methods: the feature-fusion pipeline, the Otsu
and HSV baselines, and keypoint-prompted segmentation.

All pipelines are pure functions of their inputs and configuration and
return a SegmentationResult. An Otsu ConstantInput (or a collapse to zero
foreground) yields an *empty* result rather than an exception, so batch
evaluation over a directory never aborts.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import classical, crf, fusion, imaging, watershed
from .classical import InpaintConfig, StructuringElement
from .crf import CrfParams
from .errors import (
    ConstantInputError,
    InvalidConfigError,
    NoForegroundError,
    NoKeypointsError,
)
from .keypoints import Keypoint, HeatmapBundle, decode_heatmap, render_heatmap
from .watershed import WatershedParams

VIEWS = ("lower", "front", "upper")


@dataclass(frozen=True)
class HsvThresholds:
    """Two (h, s, v) in-range bands whose union forms the HSV mask.

    Hue wraps through 0 degrees when lo > hi; saturation and value are
    plain inclusive intervals. Defaults were tuned once on the seeded
    synthetic suite.
    """

    mask1_lo: tuple[float, float, float] = (5.0, 0.05, 0.60)
    mask1_hi: tuple[float, float, float] = (60.0, 0.30, 1.0)
    mask2_lo: tuple[float, float, float] = (0.0, 0.0, 0.78)
    mask2_hi: tuple[float, float, float] = (359.9, 0.25, 1.0)


@dataclass
class PipelineConfig:
    method: str = "ours"
    inpaint: bool = False
    sigma: float = 4.0
    conf_threshold: float = 0.3
    max_peaks: int = 32
    se: StructuringElement = field(default_factory=StructuringElement)
    crf: CrfParams = field(default_factory=CrfParams)
    ws: WatershedParams = field(default_factory=WatershedParams)
    hsv: HsvThresholds = field(default_factory=HsvThresholds)
    inpaint_cfg: InpaintConfig = field(default_factory=InpaintConfig)

    def __post_init__(self) -> None:
        if self.method not in ("ours", "otsu_baseline", "hsv_baseline"):
            raise InvalidConfigError(f"unknown method {self.method!r}")
        if self.sigma <= 0:
            raise InvalidConfigError("sigma must be > 0")
        if not 0 <= self.conf_threshold <= 1:
            raise InvalidConfigError("conf_threshold must lie in [0, 1]")


@dataclass
class StageArtifacts:
    """Intermediates captured along the run; stages not executed are None."""

    fused: np.ndarray | None = None
    otsu_mask: np.ndarray | None = None
    closed: np.ndarray | None = None
    crf_mask: np.ndarray | None = None
    distance: np.ndarray | None = None
    boosted: np.ndarray | None = None
    markers: np.ndarray | None = None
    labels: np.ndarray | None = None


@dataclass
class SegmentationResult:
    mask: np.ndarray
    labels: np.ndarray | None
    artifacts: StageArtifacts
    empty: bool = False
    label_count: int = 0


def _empty_result(shape: tuple[int, int], artifacts: StageArtifacts) -> SegmentationResult:
    return SegmentationResult(
        mask=np.zeros(shape, dtype=bool),
        labels=None,
        artifacts=artifacts,
        empty=True,
        label_count=0,
    )


def preprocess(img: np.ndarray, cfg: PipelineConfig) -> np.ndarray:
    """Optionally remove specular highlights by inpainting."""
    if not cfg.inpaint:
        return img
    spots = classical.detect_bright_spots(img, cfg.inpaint_cfg)
    return classical.inpaint(img, spots, cfg.inpaint_cfg)


# ---------------------------------------------------------------------------
# methods


def segment_ours(
    img: np.ndarray,
    stacks: list[np.ndarray],
    bundle: HeatmapBundle,
    cfg: PipelineConfig,
) -> SegmentationResult:
    """Fusion -> Otsu -> closing -> CRF -> keypoint-boosted watershed."""
    imaging.ensure_rgb(img)
    h, w = img.shape[:2]
    work = preprocess(img, cfg)
    artifacts = StageArtifacts()

    fused = fusion.fuse(stacks, w, h)
    artifacts.fused = fused
    try:
        rough, _ = classical.otsu_mask(fused)
    except ConstantInputError:
        return _empty_result((h, w), artifacts)
    artifacts.otsu_mask = rough

    closed = classical.morphology(rough, "close", cfg.se)
    artifacts.closed = closed

    refined = crf.refine(work, crf.unary_from_mask(closed, cfg.crf.p_fg), cfg.crf)
    artifacts.crf_mask = refined

    kps = decode_heatmap(bundle, cfg.conf_threshold, cfg.max_peaks)
    dist = classical.distance_transform(refined)
    artifacts.distance = dist
    heat_up = imaging.bilinear_resize(bundle.heatmap, w, h)
    boosted = watershed.boost_topography(dist, heat_up, cfg.ws.alpha)
    artifacts.boosted = boosted

    try:
        markers = watershed.select_markers(boosted, refined, kps, cfg.ws)
    except NoForegroundError:
        return _empty_result((h, w), artifacts)
    artifacts.markers = markers.labels

    labels = watershed.watershed_flood(boosted, markers, refined, cfg.ws.connectivity)
    artifacts.labels = labels
    mask = watershed.labels_to_mask(labels, markers.background_label)
    return SegmentationResult(mask, labels, artifacts, empty=not mask.any(), label_count=markers.count)


def segment_otsu_baseline(img: np.ndarray, cfg: PipelineConfig) -> SegmentationResult:
    """Grayscale Otsu followed by closing and hole filling."""
    imaging.ensure_rgb(img)
    h, w = img.shape[:2]
    work = preprocess(img, cfg)
    artifacts = StageArtifacts()
    gray = imaging.rgb_to_gray(work)
    try:
        rough, _ = classical.otsu_mask(gray)
    except ConstantInputError:
        return _empty_result((h, w), artifacts)
    artifacts.otsu_mask = rough
    closed = classical.morphology(rough, "close", cfg.se)
    artifacts.closed = closed
    mask = classical.fill_holes(closed)
    count = int(classical.connected_components(mask, 8).max())
    return SegmentationResult(mask, None, artifacts, empty=not mask.any(), label_count=count)


def segment_hsv_baseline(img: np.ndarray, cfg: PipelineConfig) -> SegmentationResult:
    """Union of two manually thresholded HSV bands, then closing."""
    imaging.ensure_rgb(img)
    work = preprocess(img, cfg)
    hsv = imaging.rgb_to_hsv(work)
    combined = _hsv_in_range(hsv, cfg.hsv.mask1_lo, cfg.hsv.mask1_hi) | _hsv_in_range(
        hsv, cfg.hsv.mask2_lo, cfg.hsv.mask2_hi
    )
    mask = classical.morphology(combined, "close", cfg.se)
    count = int(classical.connected_components(mask, 8).max())
    return SegmentationResult(mask, None, StageArtifacts(), empty=not mask.any(), label_count=count)


def _hsv_in_range(
    hsv: np.ndarray,
    lo: tuple[float, float, float],
    hi: tuple[float, float, float],
) -> np.ndarray:
    h, s, v = hsv[:, :, 0], hsv[:, :, 1], hsv[:, :, 2]
    if lo[0] <= hi[0]:
        hue_ok = (h >= lo[0]) & (h <= hi[0])
    else:  # wrap through 0 degrees
        hue_ok = (h >= lo[0]) | (h <= hi[0])
    return hue_ok & (s >= lo[1]) & (s <= hi[1]) & (v >= lo[2]) & (v <= hi[2])


def keypoint_prompted_segment(
    img: np.ndarray,
    user_kps: list[Keypoint],
    cfg: PipelineConfig,
) -> SegmentationResult:
    """Watershed segmentation seeded by user-supplied keypoint prompts.

    Foreground comes from the Otsu baseline stages without hole filling;
    the prompt keypoints are rendered into a stride-1 heatmap and drive
    the boosted watershed with expected_count = len(user_kps).

    Raises:
        NoKeypointsError: no prompts were given.
        KeypointOutOfBoundsError: a prompt lies outside the image.
    """
    if not user_kps:
        raise NoKeypointsError("keypoint-prompted segmentation needs at least one keypoint")
    imaging.ensure_rgb(img)
    h, w = img.shape[:2]
    bundle = render_heatmap(user_kps, w, h, stride=1, sigma=cfg.sigma)

    work = preprocess(img, cfg)
    artifacts = StageArtifacts()
    gray = imaging.rgb_to_gray(work)
    try:
        rough, _ = classical.otsu_mask(gray)
    except ConstantInputError:
        return _empty_result((h, w), artifacts)
    artifacts.otsu_mask = rough
    closed = classical.morphology(rough, "close", cfg.se)
    artifacts.closed = closed

    dist = classical.distance_transform(closed)
    artifacts.distance = dist
    boosted = watershed.boost_topography(dist, bundle.heatmap, cfg.ws.alpha)
    artifacts.boosted = boosted
    params = replace(cfg.ws, expected_count=len(user_kps))
    try:
        markers = watershed.select_markers(boosted, closed, user_kps, params)
    except NoForegroundError:
        return _empty_result((h, w), artifacts)
    artifacts.markers = markers.labels
    labels = watershed.watershed_flood(boosted, markers, closed, params.connectivity)
    artifacts.labels = labels
    mask = watershed.labels_to_mask(labels, markers.background_label)
    return SegmentationResult(mask, labels, artifacts, empty=not mask.any(), label_count=markers.count)


# ---------------------------------------------------------------------------
# configuration files (JSON)


def config_to_dict(cfg: PipelineConfig) -> dict:
    return asdict(cfg)


def config_from_dict(doc: dict) -> PipelineConfig:
    """Build a PipelineConfig from a (possibly partial) plain dict.

    Unknown keys raise InvalidConfigError so config typos fail loudly.
    """
    if not isinstance(doc, dict):
        raise InvalidConfigError("pipeline config must be a JSON object")
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(doc) - known
    if unknown:
        raise InvalidConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs: dict = {}
    nested = {
        "se": StructuringElement,
        "crf": CrfParams,
        "ws": WatershedParams,
        "hsv": HsvThresholds,
        "inpaint_cfg": InpaintConfig,
    }
    for key, value in doc.items():
        if key in nested:
            cls = nested[key]
            sub_known = {f.name for f in fields(cls)}
            sub_unknown = set(value) - sub_known
            if sub_unknown:
                raise InvalidConfigError(f"unknown {key} config keys: {sorted(sub_unknown)}")
            if cls is HsvThresholds:
                value = {k: tuple(v) for k, v in value.items()}
            kwargs[key] = cls(**value)
        else:
            kwargs[key] = value
    return PipelineConfig(**kwargs)


def load_pipeline_config(path: str | Path) -> PipelineConfig:
    return config_from_dict(json.loads(Path(path).read_text()))
