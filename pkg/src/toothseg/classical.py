"""Analytical image-processing primitives.

Otsu thresholding, binary morphology, hole filling, connected components,
exact Euclidean distance transform, bright-spot detection, and diffusion
inpainting. Everything operates on the array conventions from ``imaging``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import (
    ConstantInputError,
    InvalidConfigError,
    SpotTouchesFullImageError,
)
from .imaging import ensure_mask, ensure_rgb, same_shape

_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_FULL = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class StructuringElement:
    """Square or disk neighborhood of a given radius (>= 1)."""

    shape: str = "square"
    radius: int = 2

    def __post_init__(self) -> None:
        if self.shape not in ("square", "disk"):
            raise InvalidConfigError(f"unknown structuring element shape {self.shape!r}")
        if self.radius < 1:
            raise InvalidConfigError("structuring element radius must be >= 1")

    def footprint(self) -> np.ndarray:
        r = self.radius
        if self.shape == "square":
            return np.ones((2 * r + 1, 2 * r + 1), dtype=bool)
        dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
        return dy * dy + dx * dx <= r * r


@dataclass(frozen=True)
class InpaintConfig:
    """Parameters for bright-spot detection and diffusion inpainting."""

    method: str = "navier_stokes"
    iterations: int = 300
    dt: float = 0.1
    spot_value_threshold: int = 240
    spot_dilation: int = 2

    def __post_init__(self) -> None:
        if self.method not in ("navier_stokes", "harmonic"):
            raise InvalidConfigError(f"unknown inpaint method {self.method!r}")
        if self.iterations < 1:
            raise InvalidConfigError("inpaint iterations must be >= 1")
        if not self.dt > 0:
            raise InvalidConfigError("inpaint dt must be > 0")
        if not 0 <= self.spot_value_threshold <= 255:
            raise InvalidConfigError("spot_value_threshold must be in 0..255")
        if self.spot_dilation < 0:
            raise InvalidConfigError("spot_dilation must be >= 0")


# ---------------------------------------------------------------------------
# Otsu thresholding


def quantize_256(arr: np.ndarray) -> np.ndarray:
    """Map a [0, 1] float map onto 256 bins; uint8 passes through."""
    if arr.dtype == np.uint8:
        return arr
    return np.clip(np.rint(np.asarray(arr, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def histogram_256(arr: np.ndarray) -> np.ndarray:
    return np.bincount(quantize_256(arr).ravel(), minlength=256)


def otsu_threshold(arr: np.ndarray) -> int:
    """Between-class-variance-maximizing threshold over the 256-bin histogram.

    Comparisons use exact integer arithmetic, so ties are broken by the
    smallest threshold with no floating-point ambiguity. Foreground is
    defined as value > t.

    Raises:
        ConstantInputError: every pixel falls into a single bin.
    """
    return otsu_threshold_from_hist(histogram_256(arr))


def otsu_threshold_from_hist(hist: np.ndarray) -> int:
    if len(hist) != 256:
        raise ValueError("expected a 256-bin histogram")
    counts = [int(c) for c in hist]
    total = sum(counts)
    if total == 0 or max(counts) == total:
        raise ConstantInputError("histogram has a single occupied bin")
    weighted_total = sum(i * c for i, c in enumerate(counts))

    best_t = 0
    best_num = -1  # sigma^2_between == num / den, compared exactly
    best_den = 1
    c0 = 0
    s0 = 0
    for t in range(256):
        c0 += counts[t]
        s0 += t * counts[t]
        c1 = total - c0
        if c0 == 0 or c1 == 0:
            continue
        a = s0 * c1 - (weighted_total - s0) * c0
        num = a * a
        den = c0 * c1
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den
    return best_t


def otsu_mask(arr: np.ndarray) -> tuple[np.ndarray, int]:
    """Threshold with Otsu; returns (foreground mask, threshold)."""
    q = quantize_256(arr)
    t = otsu_threshold_from_hist(np.bincount(q.ravel(), minlength=256))
    return q > t, t


# ---------------------------------------------------------------------------
# binary morphology

# Border convention: dilation treats out-of-bounds as background, erosion
# treats it as foreground, so a mask filling the whole frame survives a
# closing unchanged.


def _shift_reduce(mask: np.ndarray, se: StructuringElement, erode: bool) -> np.ndarray:
    h, w = mask.shape
    r = se.radius
    pad = np.pad(mask, r, constant_values=erode)
    fp = se.footprint()
    out = np.full(mask.shape, erode, dtype=bool)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            if not fp[dy + r, dx + r]:
                continue
            window = pad[r + dy : r + dy + h, r + dx : r + dx + w]
            if erode:
                out &= window
            else:
                out |= window
    return out


def dilate(mask: np.ndarray, se: StructuringElement) -> np.ndarray:
    return _shift_reduce(ensure_mask(mask), se, erode=False)


def erode(mask: np.ndarray, se: StructuringElement) -> np.ndarray:
    return _shift_reduce(ensure_mask(mask), se, erode=True)


def morphology(mask: np.ndarray, op: str, se: StructuringElement) -> np.ndarray:
    """Apply dilate / erode / close (dilate∘erode) / open (erode∘dilate)."""
    if op == "dilate":
        return dilate(mask, se)
    if op == "erode":
        return erode(mask, se)
    if op == "close":
        return erode(dilate(mask, se), se)
    if op == "open":
        return dilate(erode(mask, se), se)
    raise ValueError(f"unknown morphology op {op!r}")


def fill_holes(mask: np.ndarray) -> np.ndarray:
    """Fill background regions not 4-connected to the image border."""
    ensure_mask(mask)
    background, count = ndimage.label(~mask, structure=_CROSS)
    if count == 0:
        return mask.copy()
    border_labels = np.unique(
        np.concatenate(
            [background[0, :], background[-1, :], background[:, 0], background[:, -1]]
        )
    )
    reachable = np.zeros(count + 1, dtype=bool)
    reachable[border_labels] = True
    reachable[0] = True
    return mask | ~reachable[background]


def connected_components(mask: np.ndarray, connectivity: int = 8) -> np.ndarray:
    """Label components 1..K in row-major first-encounter order."""
    ensure_mask(mask)
    structure = _FULL if connectivity == 8 else _CROSS
    labels, count = ndimage.label(mask, structure=structure)
    labels = labels.astype(np.int32)
    if count == 0:
        return labels
    # scipy's label order is an implementation detail; renumber by the
    # flat index of each component's first pixel.
    flat = labels.ravel()
    first = np.full(count + 1, flat.size, dtype=np.int64)
    np.minimum.at(first, flat, np.arange(flat.size, dtype=np.int64))
    order = np.argsort(first[1:], kind="stable")
    remap = np.zeros(count + 1, dtype=np.int32)
    remap[order + 1] = np.arange(1, count + 1, dtype=np.int32)
    return remap[labels]


def distance_transform(mask: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance of each foreground pixel to the nearest
    background pixel; background is 0.

    A mask with no background pixels falls back to distances to the image
    border (one past the edge), keeping values finite and bounded.
    """
    ensure_mask(mask)
    if not mask.any():
        return np.zeros(mask.shape, dtype=np.float32)
    if mask.all():
        h, w = mask.shape
        dx = np.minimum(np.arange(w) + 1, w - np.arange(w))
        dy = np.minimum(np.arange(h) + 1, h - np.arange(h))
        return np.minimum(dx[None, :], dy[:, None]).astype(np.float32)
    return ndimage.distance_transform_edt(mask).astype(np.float32)


# ---------------------------------------------------------------------------
# bright spots and inpainting


def detect_bright_spots(img: np.ndarray, cfg: InpaintConfig) -> np.ndarray:
    """Pixels whose darkest channel reaches the threshold, dilated."""
    ensure_rgb(img)
    spots = img.min(axis=2) >= cfg.spot_value_threshold
    if cfg.spot_dilation > 0 and spots.any():
        spots = dilate(spots, StructuringElement("square", cfg.spot_dilation))
    return spots


def inpaint(img: np.ndarray, spots: np.ndarray, cfg: InpaintConfig) -> np.ndarray:
    """Refill spot pixels from the surrounding image, per channel.

    harmonic: red-black Gauss-Seidel relaxation of Laplace's equation with
    the spot boundary as Dirichlet data. navier_stokes: explicit transport
    of image smoothness (the Laplacian) along isophotes plus edge-weighted
    diffusion, stepped ``cfg.iterations`` times with step ``cfg.dt``.

    Pixels outside the spot mask are returned bit-exactly unchanged.

    Raises:
        SpotTouchesFullImageError: the mask covers every pixel.
    """
    ensure_rgb(img)
    ensure_mask(spots)
    same_shape(img, spots)
    if not spots.any():
        return img.copy()
    if spots.all():
        raise SpotTouchesFullImageError("spot mask covers the whole image")

    out = img.copy()
    ring = dilate(spots, StructuringElement("square", 1)) & ~spots
    for ch in range(3):
        channel = img[:, :, ch].astype(np.float64)
        seed = float(channel[ring].mean())
        channel[spots] = seed
        if cfg.method == "harmonic":
            filled = _harmonic_fill(channel, spots, cfg.iterations)
        else:
            filled = _navier_stokes_fill(channel, spots, cfg.iterations, cfg.dt)
        out[:, :, ch][spots] = np.clip(np.rint(filled[spots]), 0, 255).astype(np.uint8)
    return out


def _neighbor_sum(u: np.ndarray) -> np.ndarray:
    p = np.pad(u, 1, mode="edge")
    return p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:]


def _harmonic_fill(u: np.ndarray, spots: np.ndarray, iterations: int) -> np.ndarray:
    parity = (np.add.outer(np.arange(u.shape[0]), np.arange(u.shape[1])) % 2) == 0
    red = spots & parity
    black = spots & ~parity
    for _ in range(iterations):
        u[red] = _neighbor_sum(u)[red] / 4.0
        u[black] = _neighbor_sum(u)[black] / 4.0
    return u


def _navier_stokes_fill(u: np.ndarray, spots: np.ndarray, iterations: int, dt: float) -> np.ndarray:
    eps = 1e-8
    edge_k = 10.0  # gradient scale of the edge-stopping diffusion weight
    for _ in range(iterations):
        p = np.pad(u, 1, mode="edge")
        lap = p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4.0 * u
        dix = 0.5 * (p[1:-1, 2:] - p[1:-1, :-2])
        diy = 0.5 * (p[2:, 1:-1] - p[:-2, 1:-1])
        lp = np.pad(lap, 1, mode="edge")
        dlx = 0.5 * (lp[1:-1, 2:] - lp[1:-1, :-2])
        dly = 0.5 * (lp[2:, 1:-1] - lp[:-2, 1:-1])
        gnorm = np.sqrt(dix * dix + diy * diy)
        transport = (dlx * -diy + dly * dix) / (gnorm + eps)
        weight = 1.0 / (1.0 + (gnorm / edge_k) ** 2)
        u[spots] += dt * (transport[spots] + weight[spots] * lap[spots])
        np.clip(u, 0.0, 255.0, out=u)
    return u
