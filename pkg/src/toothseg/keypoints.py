"""Keypoint heatmaps, peak decoding, Hungarian matching, and metrics.

Keypoints live in input-image pixel coordinates. A heatmap cell (cx, cy)
covers input pixels [cx*stride, (cx+1)*stride); offset maps store the
sub-cell fraction so decoding recovers continuous coordinates.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .classical import connected_components
from .errors import (
    EmptyMatchingError,
    InvalidConfigError,
    KeypointOutOfBoundsError,
    NonFiniteCostError,
)

DEFAULT_MAX_PEAKS = 32  # a human mouth has at most 32 teeth
DEFAULT_CONF_THRESHOLD = 0.3
DEFAULT_SIGMA = 4.0  # heatmap cells; fixed because size heads are removed


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    score: float = 1.0


@dataclass
class HeatmapBundle:
    """Keypoint heatmap plus offset maps at a fixed output stride."""

    heatmap: np.ndarray
    offset_x: np.ndarray
    offset_y: np.ndarray
    stride: int

    def __post_init__(self) -> None:
        if self.heatmap.shape != self.offset_x.shape or self.heatmap.shape != self.offset_y.shape:
            raise InvalidConfigError("heatmap and offset maps must share dimensions")
        if self.stride < 1:
            raise InvalidConfigError("stride must be >= 1")
        if float(self.heatmap.min()) < 0.0 or float(self.heatmap.max()) > 1.0:
            raise InvalidConfigError("heatmap values must lie in [0, 1]")

    @property
    def input_width(self) -> int:
        return self.heatmap.shape[1] * self.stride

    @property
    def input_height(self) -> int:
        return self.heatmap.shape[0] * self.stride


@dataclass
class MatchResult:
    """Hungarian pairing of predictions to ground truth."""

    pairs: list[tuple[int, int, float]] = field(default_factory=list)
    unmatched_pred: list[int] = field(default_factory=list)
    unmatched_gt: list[int] = field(default_factory=list)

    @property
    def distances(self) -> list[float]:
        return [d for _, _, d in self.pairs]


@dataclass
class ThresholdSweep:
    thresholds: list[int]
    precision: list[float]
    recall: list[float]
    f1: list[float]


# ---------------------------------------------------------------------------
# rendering and decoding


def render_heatmap(
    kps: list[Keypoint],
    heat_w: int,
    heat_h: int,
    stride: int,
    sigma: float = DEFAULT_SIGMA,
) -> HeatmapBundle:
    """Splat a unit Gaussian per keypoint, combined by element-wise max.

    The keypoint's own cell is exactly 1.0 and carries the sub-cell
    offsets; when two keypoints share a cell the later one wins the
    offsets (documented tie-break).
    """
    if sigma <= 0:
        raise InvalidConfigError("sigma must be > 0")
    in_w = heat_w * stride
    in_h = heat_h * stride
    heat = np.zeros((heat_h, heat_w), dtype=np.float64)
    off_x = np.zeros((heat_h, heat_w), dtype=np.float32)
    off_y = np.zeros((heat_h, heat_w), dtype=np.float32)
    vs, us = np.mgrid[0:heat_h, 0:heat_w]
    inv = 1.0 / (2.0 * sigma * sigma)
    for kp in kps:
        if not (0 <= kp.x < in_w and 0 <= kp.y < in_h):
            raise KeypointOutOfBoundsError(
                f"keypoint ({kp.x}, {kp.y}) outside {in_w}x{in_h} input image"
            )
        cx = int(kp.x // stride)
        cy = int(kp.y // stride)
        g = np.exp(-((us - cx) ** 2 + (vs - cy) ** 2) * inv)
        np.maximum(heat, g, out=heat)
        off_x[cy, cx] = kp.x / stride - cx
        off_y[cy, cx] = kp.y / stride - cy
    return HeatmapBundle(heat.astype(np.float32), off_x, off_y, stride)


def decode_heatmap(
    bundle: HeatmapBundle,
    conf_threshold: float = DEFAULT_CONF_THRESHOLD,
    max_peaks: int = DEFAULT_MAX_PEAKS,
) -> list[Keypoint]:
    """Extract offset-refined keypoints from 3x3 local maxima.

    Equal-valued plateaus keep only their first row-major cell; the top
    ``max_peaks`` peaks by value survive, returned by descending score.
    """
    heat = bundle.heatmap
    neighborhood_max = ndimage.maximum_filter(heat, size=3, mode="constant", cval=-np.inf)
    candidates = (heat >= neighborhood_max) & (heat >= conf_threshold)
    if not candidates.any():
        return []
    # adjacent candidates are necessarily equal-valued, so components of
    # the candidate mask are exactly the tied plateaus
    plateaus = connected_components(candidates, connectivity=8)
    count = int(plateaus.max())
    flat = plateaus.ravel()
    first = np.full(count + 1, flat.size, dtype=np.int64)
    np.minimum.at(first, flat, np.arange(flat.size, dtype=np.int64))
    cells = first[1:]
    scores = heat.ravel()[cells]
    order = np.argsort(-scores, kind="stable")[:max_peaks]

    width = heat.shape[1]
    out = []
    for idx in order:
        cell = int(cells[idx])
        cy, cx = divmod(cell, width)
        x = (cx + float(bundle.offset_x[cy, cx])) * bundle.stride
        y = (cy + float(bundle.offset_y[cy, cx])) * bundle.stride
        out.append(Keypoint(x, y, float(scores[idx])))
    return out


# ---------------------------------------------------------------------------
# assignment


def hungarian(cost: np.ndarray) -> list[tuple[int, int]]:
    """Minimum-cost bipartite matching of cardinality min(n, m).

    Rectangular matrices are padded to square internally (constant pad,
    which cannot change the optimal real assignment). Returns (row, col)
    pairs sorted by row.

    Raises:
        NonFiniteCostError: any entry is NaN or infinite.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    n, m = cost.shape
    if n == 0 or m == 0:
        return []
    if not np.isfinite(cost).all():
        raise NonFiniteCostError("cost matrix contains non-finite entries")
    size = max(n, m)
    square = np.zeros((size, size), dtype=np.float64)
    square[:n, :m] = cost
    col_of_row = _solve_square_assignment(square)
    return sorted((r, c) for r, c in enumerate(col_of_row) if r < n and c < m)


def _solve_square_assignment(a: np.ndarray) -> list[int]:
    # O(n^3) potentials + shortest augmenting path, 1-indexed internally.
    n = a.shape[0]
    inf = float("inf")
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    match_row = [0] * (n + 1)  # row matched to each column, 0 = free
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        match_row[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = match_row[j0]
            delta = inf
            j1 = -1
            row = a[i0 - 1]
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - u[i0] - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match_row[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match_row[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match_row[j0] = match_row[j1]
            j0 = j1
    col_of_row = [0] * n
    for j in range(1, n + 1):
        if match_row[j] > 0:
            col_of_row[match_row[j] - 1] = j - 1
    return col_of_row


def match_keypoints(pred: list[Keypoint], gt: list[Keypoint]) -> MatchResult:
    """Pair predictions with ground truth by Euclidean pixel distance."""
    if not pred or not gt:
        return MatchResult([], list(range(len(pred))), list(range(len(gt))))
    cost = np.empty((len(pred), len(gt)), dtype=np.float64)
    for i, p in enumerate(pred):
        for j, g in enumerate(gt):
            cost[i, j] = float(np.hypot(p.x - g.x, p.y - g.y))
    assignment = hungarian(cost)
    pairs = [(i, j, float(cost[i, j])) for i, j in assignment]
    matched_pred = {i for i, _, _ in pairs}
    matched_gt = {j for _, j, _ in pairs}
    return MatchResult(
        pairs,
        [i for i in range(len(pred)) if i not in matched_pred],
        [j for j in range(len(gt)) if j not in matched_gt],
    )


# ---------------------------------------------------------------------------
# metrics


def distance_stats(match: MatchResult) -> tuple[float, float]:
    """Mean and median pair distance in pixels."""
    if not match.pairs:
        raise EmptyMatchingError("no matched pairs to aggregate")
    dists = match.distances
    return float(np.mean(dists)), float(statistics.median(dists))


def threshold_sweep(match: MatchResult, t_max: int) -> ThresholdSweep:
    """Precision/recall/F1 for every integer threshold 0..t_max.

    A pair counts as a true positive only when its distance is strictly
    below the threshold, which forces P=R=0 at t=0.
    """
    if t_max < 0:
        raise ValueError("t_max must be >= 0")
    thresholds = list(range(t_max + 1))
    precision: list[float] = []
    recall: list[float] = []
    f1: list[float] = []
    for t in thresholds:
        tp = sum(1 for d in match.distances if d < t)
        far = len(match.pairs) - tp
        fp = far + len(match.unmatched_pred)
        fn = far + len(match.unmatched_gt)
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        precision.append(p)
        recall.append(r)
        f1.append(f)
    return ThresholdSweep(thresholds, precision, recall, f1)


# ---------------------------------------------------------------------------
# keypoint-list JSON (external interface)


def load_keypoints_json(path: str | Path) -> dict[str, list[Keypoint]]:
    """Read ``{"images":[{"image_id":..., "keypoints":[[x,y],...]}]}``."""
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict) or not isinstance(doc.get("images"), list):
        raise ValueError(f"{path}: expected an object with an 'images' list")
    out: dict[str, list[Keypoint]] = {}
    for entry in doc["images"]:
        image_id = entry["image_id"]
        kps = [Keypoint(float(x), float(y)) for x, y in entry["keypoints"]]
        out[str(image_id)] = kps
    return out


def save_keypoints_json(images: dict[str, list[Keypoint]], path: str | Path) -> None:
    doc = {
        "images": [
            {"image_id": image_id, "keypoints": [[kp.x, kp.y] for kp in kps]}
            for image_id, kps in images.items()
        ]
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
