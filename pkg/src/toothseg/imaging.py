"""Core raster types, color conversion, resampling, and bit-exact file I/O.

Array conventions used throughout the toolkit (all row-major, y first):

- ``ImageRGB``:   ``uint8`` array of shape (H, W, 3)
- ``GrayImage``:  ``uint8`` array of shape (H, W)
- ``ScalarMap``:  ``float32`` array of shape (H, W), all values finite
- ``BinaryMask``: ``bool`` array of shape (H, W), True = foreground
- ``LabelMap``:   ``int32`` array of shape (H, W), 0 = background

Supported file formats: 8-bit PNG (via Pillow), binary PPM (P6) and PGM
(P5), and the FMAP tensor container for float data::

    b"FMAP" | version 0x01 | u32le C | u32le H | u32le W | C*H*W float32le

FMAP payload order is channel-major, then row-major within a channel.
Saving and re-loading a mask or an FMAP file is bit-exact.
"""

from __future__ import annotations

import io
import struct
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import CorruptFileError, DimensionMismatchError, UnsupportedFormatError

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
FMAP_MAGIC = b"FMAP"
FMAP_VERSION = 1

# ITU-R BT.601 luma weights; the source material never specifies a
# conversion, so the ubiquitous default is used.
_GRAY_WEIGHTS = (0.299, 0.587, 0.114)


# ---------------------------------------------------------------------------
# validation helpers


def ensure_rgb(img: np.ndarray) -> np.ndarray:
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError(f"expected uint8 (H, W, 3) image, got {img.dtype} {img.shape}")
    return img


def ensure_mask(mask: np.ndarray) -> np.ndarray:
    if mask.ndim != 2 or mask.dtype != np.bool_:
        raise ValueError(f"expected bool (H, W) mask, got {mask.dtype} {mask.shape}")
    return mask


def ensure_scalar_map(m: np.ndarray) -> np.ndarray:
    if m.ndim != 2 or not np.issubdtype(m.dtype, np.floating):
        raise ValueError(f"expected float (H, W) map, got {m.dtype} {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError("scalar map contains NaN or infinity")
    return m


def same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[:2] != b.shape[:2]:
        raise DimensionMismatchError(f"shape mismatch: {a.shape[:2]} vs {b.shape[:2]}")


# ---------------------------------------------------------------------------
# PNG / PNM loading


def load_image(path: str | Path) -> np.ndarray:
    """Load an 8-bit PNG or binary PPM/PGM file as an RGB image.

    RGBA alpha is discarded; grayscale is replicated to three channels.

    Raises:
        FileNotFoundError: the path does not exist.
        UnsupportedFormatError: not a PNG/P6/P5 file, or not 8-bit.
        CorruptFileError: recognized format with a truncated payload.
    """
    data = Path(path).read_bytes()
    if data[:8] == _PNG_MAGIC:
        return _decode_png(data)
    if data[:2] in (b"P6", b"P5"):
        return _decode_pnm(data)
    raise UnsupportedFormatError(f"{path}: not a PNG or binary PPM/PGM file")


def _decode_png(data: bytes) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as im:
            mode = im.mode
            if mode not in ("RGB", "RGBA", "L", "LA"):
                raise UnsupportedFormatError(f"unsupported PNG mode {mode!r} (8-bit RGB/RGBA/gray only)")
            im.load()
            arr = np.asarray(im)
    except UnidentifiedImageError as exc:
        raise UnsupportedFormatError(str(exc)) from exc
    except (OSError, SyntaxError) as exc:
        raise CorruptFileError(f"corrupt PNG: {exc}") from exc
    if arr.ndim == 2:
        return np.repeat(arr[:, :, None], 3, axis=2).astype(np.uint8)
    if arr.shape[2] == 2:  # LA: keep luminance, drop alpha
        return np.repeat(arr[:, :, :1], 3, axis=2).astype(np.uint8)
    return np.ascontiguousarray(arr[:, :, :3]).astype(np.uint8)


def _decode_pnm(data: bytes) -> np.ndarray:
    magic = data[:2]
    channels = 3 if magic == b"P6" else 1
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        if pos >= len(data):
            raise CorruptFileError("truncated PNM header")
        c = data[pos : pos + 1]
        if c == b"#":
            pos = data.find(b"\n", pos)
            if pos < 0:
                raise CorruptFileError("truncated PNM comment")
            continue
        if c.isspace():
            pos += 1
            continue
        end = pos
        while end < len(data) and not data[end : end + 1].isspace():
            end += 1
        token = data[pos:end]
        if not token.isdigit():
            raise CorruptFileError(f"bad PNM header token {token!r}")
        fields.append(int(token))
        pos = end
    width, height, maxval = fields
    if maxval != 255:
        raise UnsupportedFormatError(f"only 8-bit PNM supported (maxval {maxval})")
    if width < 1 or height < 1:
        raise CorruptFileError("PNM dimensions must be >= 1")
    pos += 1  # single whitespace byte after maxval
    payload = data[pos : pos + width * height * channels]
    if len(payload) < width * height * channels:
        raise CorruptFileError("truncated PNM payload")
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    if channels == 1:
        arr = np.repeat(arr, 3, axis=2)
    return arr.copy()


# ---------------------------------------------------------------------------
# saving


def save_image(img: np.ndarray, path: str | Path) -> None:
    """Save an RGB image as PNG, or binary PPM when the suffix is .ppm."""
    ensure_rgb(img)
    path = Path(path)
    if path.suffix.lower() == ".ppm":
        header = b"P6\n%d %d\n255\n" % (img.shape[1], img.shape[0])
        path.write_bytes(header + img.tobytes())
    else:
        Image.fromarray(img, mode="RGB").save(path, format="PNG")


def save_mask(mask: np.ndarray, path: str | Path) -> None:
    """Save a binary mask as 8-bit gray PNG (foreground 255, background 0).

    A .pgm suffix selects binary PGM instead. load_mask(save_mask(m)) == m.
    """
    ensure_mask(mask)
    path = Path(path)
    gray = np.where(mask, np.uint8(255), np.uint8(0))
    if path.suffix.lower() == ".pgm":
        header = b"P5\n%d %d\n255\n" % (mask.shape[1], mask.shape[0])
        path.write_bytes(header + gray.tobytes())
    else:
        Image.fromarray(gray, mode="L").save(path, format="PNG")


def load_mask(path: str | Path) -> np.ndarray:
    """Load a mask saved by save_mask; values > 127 are foreground."""
    img = load_image(path)
    return img[:, :, 0] > 127


def save_scalar_map(m: np.ndarray, path: str | Path) -> None:
    """Save a scalar map: FMAP (bit-exact) for .fmap, else 8-bit gray PNG.

    The PNG path min-max quantizes to 0..255 and is for visualization only.
    """
    ensure_scalar_map(m)
    path = Path(path)
    if path.suffix.lower() == ".fmap":
        write_fmap(m[None, :, :], path)
        return
    q = np.rint(minmax_normalize(m) * 255.0).astype(np.uint8)
    Image.fromarray(q, mode="L").save(path, format="PNG")


def load_scalar_map(path: str | Path) -> np.ndarray:
    """Load a single-channel FMAP file as a (H, W) float32 map."""
    stack = read_fmap(path)
    if stack.shape[0] != 1:
        raise UnsupportedFormatError(f"{path}: expected 1 channel, found {stack.shape[0]}")
    return stack[0]


def write_fmap(stack: np.ndarray, path: str | Path) -> None:
    """Write a (C, H, W) float tensor to the FMAP container."""
    arr = np.ascontiguousarray(stack, dtype="<f4")
    if arr.ndim != 3:
        raise ValueError(f"FMAP expects a (C, H, W) tensor, got shape {arr.shape}")
    c, h, w = arr.shape
    header = FMAP_MAGIC + bytes([FMAP_VERSION]) + struct.pack("<III", c, h, w)
    Path(path).write_bytes(header + arr.tobytes())


def read_fmap(path: str | Path) -> np.ndarray:
    """Read an FMAP file into a (C, H, W) float32 tensor."""
    data = Path(path).read_bytes()
    if data[:4] != FMAP_MAGIC:
        raise UnsupportedFormatError(f"{path}: missing FMAP magic")
    if len(data) < 17:
        raise CorruptFileError(f"{path}: truncated FMAP header")
    if data[4] != FMAP_VERSION:
        raise UnsupportedFormatError(f"{path}: unsupported FMAP version {data[4]}")
    c, h, w = struct.unpack("<III", data[5:17])
    expected = 17 + 4 * c * h * w
    if len(data) < expected:
        raise CorruptFileError(f"{path}: FMAP payload truncated ({len(data)} < {expected} bytes)")
    flat = np.frombuffer(data[17:expected], dtype="<f4")
    arr = flat.reshape(c, h, w).astype(np.float32)
    if not np.isfinite(arr).all():
        raise CorruptFileError(f"{path}: FMAP payload contains non-finite values")
    return arr


# ---------------------------------------------------------------------------
# color conversion


def rgb_to_gray(img: np.ndarray) -> np.ndarray:
    """BT.601 grayscale: round(0.299 R + 0.587 G + 0.114 B), clamped."""
    ensure_rgb(img)
    r, g, b = (img[:, :, i].astype(np.float64) for i in range(3))
    gray = _GRAY_WEIGHTS[0] * r + _GRAY_WEIGHTS[1] * g + _GRAY_WEIGHTS[2] * b
    return np.clip(np.rint(gray), 0, 255).astype(np.uint8)


def rgb_to_hsv(img: np.ndarray) -> np.ndarray:
    """Hexcone HSV as a float32 (H, W, 3) array.

    h in degrees [0, 360); s and v in [0, 1]. Achromatic pixels report h=0.
    """
    ensure_rgb(img)
    rgb = img.astype(np.float32) / 255.0
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    v = rgb.max(axis=2)
    c = v - rgb.min(axis=2)
    s = np.where(v > 0, c / np.maximum(v, 1e-12), 0.0)

    with np.errstate(invalid="ignore", divide="ignore"):
        cs = np.where(c > 0, c, 1.0)
        h_r = np.mod((g - b) / cs, 6.0)
        h_g = (b - r) / cs + 2.0
        h_b = (r - g) / cs + 4.0
    h = np.where(v == r, h_r, np.where(v == g, h_g, h_b))
    h = np.where(c > 0, h * 60.0, 0.0)
    h = np.mod(h, 360.0)
    return np.stack([h, s, v], axis=2).astype(np.float32)


# ---------------------------------------------------------------------------
# resampling and normalization


def _bilinear_axes(src: int, dst: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # half-pixel-center sampling; edge samples clamp (replicate border)
    coords = (np.arange(dst, dtype=np.float64) + 0.5) * (src / dst) - 0.5
    i0 = np.floor(coords)
    frac = coords - i0
    lo = np.clip(i0, 0, src - 1).astype(np.intp)
    hi = np.clip(i0 + 1, 0, src - 1).astype(np.intp)
    return lo, hi, frac


def bilinear_resize(arr: np.ndarray, new_w: int, new_h: int) -> np.ndarray:
    """Bilinear resampling with half-pixel centers.

    Accepts a float scalar map (H, W) or a uint8 RGB image (H, W, 3) and
    returns the same kind. Resizing to the identical size is the identity;
    output values never leave the input's [min, max] range.
    """
    if new_w < 1 or new_h < 1:
        raise ValueError("target size must be >= 1")
    h, w = arr.shape[:2]
    if (w, h) == (new_w, new_h):
        return arr.copy()
    x0, x1, fx = _bilinear_axes(w, new_w)
    y0, y1, fy = _bilinear_axes(h, new_h)
    data = arr.astype(np.float64)
    if data.ndim == 3:
        fx = fx[:, None]
        wy = fy[:, None, None]
    else:
        wy = fy[:, None]
    top = data[y0][:, x0] * (1 - fx) + data[y0][:, x1] * fx
    bot = data[y1][:, x0] * (1 - fx) + data[y1][:, x1] * fx
    out = top * (1 - wy) + bot * wy
    if arr.dtype == np.uint8:
        return np.clip(np.rint(out), 0, 255).astype(np.uint8)
    return out.astype(np.float32)


def nearest_resize(arr: np.ndarray, new_w: int, new_h: int) -> np.ndarray:
    """Nearest-neighbor resampling (half-pixel centers), any dtype."""
    h, w = arr.shape[:2]
    xs = np.clip(np.floor((np.arange(new_w) + 0.5) * (w / new_w)), 0, w - 1).astype(np.intp)
    ys = np.clip(np.floor((np.arange(new_h) + 0.5) * (h / new_h)), 0, h - 1).astype(np.intp)
    return arr[ys][:, xs].copy()


def minmax_normalize(m: np.ndarray) -> np.ndarray:
    """Rescale to [0, 1]; a constant map maps to all zeros by convention."""
    m = np.asarray(m, dtype=np.float32)
    lo = float(m.min())
    hi = float(m.max())
    if hi == lo:
        return np.zeros_like(m, dtype=np.float32)
    return ((m - lo) / (hi - lo)).astype(np.float32)
