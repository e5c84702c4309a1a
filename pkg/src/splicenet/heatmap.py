"""Patch-score heatmaps.

Colormap: 256 entries, index i -> t = i/255, RGB = (clip(3t), clip(3t-1),
clip(3t-2)) scaled to 0..255 (black -> red -> yellow -> white). Every
channel is non-decreasing in t, so brightness increases monotonically.
"""
from __future__ import annotations

import numpy as np
from PIL import Image

from .errors import ArgumentError


def colormap() -> np.ndarray:
    t = np.arange(256) / 255.0
    rgb = np.stack([np.clip(3 * t, 0, 1), np.clip(3 * t - 1, 0, 1), np.clip(3 * t - 2, 0, 1)], axis=1)
    return np.round(rgb * 255).astype(np.uint8)


def score_field(shape, patches, scores) -> np.ndarray:
    """Per-pixel mean score of the covering patches, min-max normalised.

    A flat field (all covering means equal) maps to 0.5.
    """
    if len(patches) == 0 or len(patches) != len(scores):
        raise ArgumentError("need one score per patch and at least one patch")
    h, w = shape
    acc = np.zeros((h, w))
    cnt = np.zeros((h, w))
    for p, s in zip(patches, scores):
        acc[p.y0:p.y0 + p.size, p.x0:p.x0 + p.size] += s
        cnt[p.y0:p.y0 + p.size, p.x0:p.x0 + p.size] += 1
    field = np.divide(acc, cnt, out=np.zeros_like(acc), where=cnt > 0)
    lo, hi = field.min(), field.max()
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        return np.full((h, w), 0.5)
    return (field - lo) / (hi - lo)


def emit_heatmap(shape, patches, scores, path) -> np.ndarray:
    """Render :func:`score_field` through :func:`colormap` and save it as PNG."""
    field = score_field(shape, patches, scores)
    idx = np.clip(np.round(field * 255), 0, 255).astype(np.uint8)
    rgb = colormap()[idx]
    Image.fromarray(rgb).save(path, format="PNG")
    return rgb
