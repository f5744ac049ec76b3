"""Keypoint-boosted, count-constrained, marker-controlled watershed.

The topography is a distance transform plus a scaled keypoint heatmap, so
tooth peaks dominate artifact peaks. Marker selection keeps the top-K
peak plateaus (K = expected count, else the number of keypoints); the
flood then grows basins by priority queue on inverted height, with tooth
labels restricted to the foreground mask and the background label
claiming everything else.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .classical import connected_components
from .errors import (
    DimensionMismatchError,
    InvalidConfigError,
    NoForegroundError,
    NoMarkersError,
)
from .imaging import ensure_mask, ensure_scalar_map
from .keypoints import Keypoint

_OFFSETS_4 = ((-1, 0), (0, -1), (0, 1), (1, 0))
_OFFSETS_8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


@dataclass(frozen=True)
class WatershedParams:
    """alpha scales the heatmap boost; "auto" uses the distance map's
    global maximum so keypoint-backed peaks strictly dominate."""

    alpha: float | str = "auto"
    peak_fraction: float = 0.2
    expected_count: int | None = None
    connectivity: int = 8

    def __post_init__(self) -> None:
        if isinstance(self.alpha, str):
            if self.alpha != "auto":
                raise InvalidConfigError("alpha must be a number >= 0 or 'auto'")
        elif self.alpha < 0:
            raise InvalidConfigError("alpha must be >= 0")
        if not 0 < self.peak_fraction <= 1:
            raise InvalidConfigError("peak_fraction must lie in (0, 1]")
        if self.expected_count is not None and self.expected_count < 0:
            raise InvalidConfigError("expected_count must be >= 0")
        if self.connectivity not in (4, 8):
            raise InvalidConfigError("connectivity must be 4 or 8")


@dataclass
class Markers:
    """Marker label map: 1..count are peak plateaus in descending height
    order, background_label covers the non-foreground pixels."""

    labels: np.ndarray
    background_label: int
    count: int


def boost_topography(dist: np.ndarray, heat: np.ndarray, alpha: float | str = "auto") -> np.ndarray:
    """dist + alpha_eff * heat; alpha "auto" resolves to max(dist) (1 if flat)."""
    ensure_scalar_map(dist)
    ensure_scalar_map(heat)
    if dist.shape != heat.shape:
        raise DimensionMismatchError(f"distance {dist.shape} vs heatmap {heat.shape}")
    if alpha == "auto":
        alpha_eff = float(dist.max())
        if alpha_eff == 0.0:
            alpha_eff = 1.0
    else:
        alpha_eff = float(alpha)
    return (dist.astype(np.float64) + alpha_eff * heat.astype(np.float64)).astype(np.float32)


def select_markers(
    topo: np.ndarray,
    fg: np.ndarray,
    kps: list[Keypoint],
    params: WatershedParams,
) -> Markers:
    """Pick marker plateaus from foreground peaks of the topography.

    Candidates are foreground 3x3 local maxima at least
    peak_fraction * max(topo) high; connected equal-height candidates
    merge into one plateau; the top K by height become markers.

    Raises:
        NoForegroundError: the foreground mask is empty.
    """
    ensure_scalar_map(topo)
    ensure_mask(fg)
    if topo.shape != fg.shape:
        raise DimensionMismatchError(f"topography {topo.shape} vs foreground {fg.shape}")
    if not fg.any():
        raise NoForegroundError("foreground mask is empty")

    neighborhood_max = ndimage.maximum_filter(topo, size=3, mode="constant", cval=-np.inf)
    cutoff = params.peak_fraction * float(topo.max())
    candidates = fg & (topo >= neighborhood_max) & (topo >= cutoff)

    labels = np.zeros(topo.shape, dtype=np.int32)
    kept = 0
    if candidates.any():
        plateaus = connected_components(candidates, connectivity=8)
        total = int(plateaus.max())
        flat = plateaus.ravel()
        first = np.full(total + 1, flat.size, dtype=np.int64)
        np.minimum.at(first, flat, np.arange(flat.size, dtype=np.int64))
        heights = topo.ravel()[first[1:]]
        # stable sort on -height: ties stay in first-encounter order
        order = np.argsort(-heights, kind="stable")
        if params.expected_count is not None:
            kept = min(params.expected_count, total)
        elif kps:
            kept = min(len(kps), total)
        else:
            kept = total
        remap = np.zeros(total + 1, dtype=np.int32)
        for rank, plateau_index in enumerate(order[:kept]):
            remap[plateau_index + 1] = rank + 1
        labels = remap[plateaus]

    background_label = kept + 1
    labels[~fg] = background_label
    return Markers(labels, background_label, kept)


def watershed_flood(
    topo: np.ndarray,
    markers: Markers | np.ndarray,
    fg: np.ndarray,
    connectivity: int = 8,
    background_label: int | None = None,
) -> np.ndarray:
    """Priority-flood basins from markers over inverted height.

    Pixels are claimed when first reached; the queue pops the highest
    topography first, ties in FIFO push order. Tooth labels only claim
    foreground pixels and the background label only claims background
    pixels, so basins never eat into foreground blobs from outside;
    foreground left unreachable (a blob without any marker) falls to the
    background label at the end.

    Raises:
        NoMarkersError: the marker map has no nonzero entries.
    """
    if isinstance(markers, Markers):
        background_label = markers.background_label
        marker_map = markers.labels
    else:
        marker_map = markers
    ensure_scalar_map(topo)
    ensure_mask(fg)
    if topo.shape != marker_map.shape or topo.shape != fg.shape:
        raise DimensionMismatchError("topography, markers and foreground must share shape")
    if not marker_map.any():
        raise NoMarkersError("marker map is empty")
    if connectivity not in (4, 8):
        raise InvalidConfigError("connectivity must be 4 or 8")
    offsets = _OFFSETS_4 if connectivity == 4 else _OFFSETS_8
    bg_label = -1 if background_label is None else background_label

    h, w = topo.shape
    labels = marker_map.astype(np.int32).ravel().tolist()
    inverted = (-topo.astype(np.float64)).ravel().tolist()
    fg_flat = fg.ravel().tolist()

    unlabeled = marker_map == 0
    if not unlabeled.any():
        return marker_map.astype(np.int32).copy()

    # seed only marker pixels that border an unlabeled pixel
    frontier = np.zeros((h, w), dtype=bool)
    for dy, dx in offsets:
        ys = slice(max(0, -dy), min(h, h - dy))
        xs = slice(max(0, -dx), min(w, w - dx))
        yn = slice(max(0, dy), min(h, h + dy))
        xn = slice(max(0, dx), min(w, w + dx))
        frontier[ys, xs] |= unlabeled[yn, xn]
    frontier &= marker_map != 0

    heap: list[tuple[float, int, int]] = []
    counter = 0
    for p in np.flatnonzero(frontier.ravel()):
        heap.append((inverted[p], counter, int(p)))
        counter += 1
    heapq.heapify(heap)

    push = heapq.heappush
    pop = heapq.heappop
    while heap:
        priority, _, p = pop(heap)
        label = labels[p]
        is_background = label == bg_label
        y, x = divmod(p, w)
        for dy, dx in offsets:
            ny = y + dy
            nx = x + dx
            if ny < 0 or ny >= h or nx < 0 or nx >= w:
                continue
            q = ny * w + nx
            if labels[q] == 0 and (fg_flat[q] != is_background):
                labels[q] = label
                nprio = inverted[q]
                if nprio < priority:
                    nprio = priority
                push(heap, (nprio, counter, q))
                counter += 1
    out = np.asarray(labels, dtype=np.int32).reshape(h, w)
    if background_label is not None:
        out[out == 0] = background_label
    return out


def labels_to_mask(labels: np.ndarray, background_label: int) -> np.ndarray:
    """Foreground = every pixel with a real (non-background) basin label."""
    return (labels != background_label) & (labels != 0)
