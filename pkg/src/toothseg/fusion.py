"""Fuse multi-layer backbone feature maps into one teeth-salience map.

A feature stack is a (C, H, W) float array standing in for one backbone
layer's activations. Fusion averages each stack over channels, upsamples
the means onto the largest stack's grid, sums them, min-max normalizes,
and finally upsamples to the requested output resolution.
"""

from __future__ import annotations

import numpy as np

from .errors import EmptyStackListError
from .imaging import bilinear_resize, minmax_normalize


def ensure_stack(stack: np.ndarray) -> np.ndarray:
    if stack.ndim != 3 or stack.shape[0] < 1:
        raise ValueError(f"expected a (C, H, W) stack, got shape {stack.shape}")
    if not np.isfinite(stack).all():
        raise ValueError("feature stack contains non-finite values")
    return stack


def channel_mean(stack: np.ndarray) -> np.ndarray:
    """Per-pixel arithmetic mean over channels."""
    ensure_stack(stack)
    return stack.mean(axis=0, dtype=np.float64).astype(np.float32)


def fuse(stacks: list[np.ndarray], target_w: int, target_h: int) -> np.ndarray:
    """Combine feature stacks into a single [0, 1] salience map.

    Raises:
        EmptyStackListError: no stacks were given.
        ValueError: the target is smaller than some stack's grid.
    """
    if not stacks:
        raise EmptyStackListError("fuse requires at least one feature stack")
    means = [channel_mean(s) for s in stacks]
    ref_h = max(m.shape[0] for m in means)
    ref_w = max(m.shape[1] for m in means)
    if target_w < ref_w or target_h < ref_h:
        raise ValueError(
            f"target {target_w}x{target_h} smaller than largest stack {ref_w}x{ref_h}"
        )
    total = np.zeros((ref_h, ref_w), dtype=np.float64)
    for m in means:
        if m.shape != (ref_h, ref_w):
            m = bilinear_resize(m, ref_w, ref_h)
        total += m
    normalized = minmax_normalize(total)
    return bilinear_resize(normalized, target_w, target_h)
