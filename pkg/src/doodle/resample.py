"""Spatial resampling: area-weighted box downsampling and bilinear upscaling."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .tensor import DTYPE, require_chw


def _box_matrix(target: int, source: int) -> np.ndarray:
    """(target, source) row-stochastic matrix of box-filter overlap weights."""
    a = np.zeros((target, source), dtype=np.float64)
    step = source / target
    for i in range(target):
        lo, hi = i * step, (i + 1) * step
        j0, j1 = int(np.floor(lo)), min(int(np.ceil(hi)), source)
        for j in range(j0, j1):
            overlap = min(hi, j + 1) - max(lo, j)
            if overlap > 0:
                a[i, j] = overlap / step
    return a


def box_downsample(t: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Average each target cell over the source cells it covers.

    Constant inputs stay exactly constant; requires target dims <= source dims.
    """
    require_chw(t, "box_downsample input")
    c, h, w = t.shape
    if target_h > h or target_w > w:
        raise ValidationError(
            f"cannot box-downsample {h}x{w} to larger {target_h}x{target_w}"
        )
    if target_h < 1 or target_w < 1:
        raise ValidationError("target size must be at least 1x1")
    if (target_h, target_w) == (h, w):
        return t.astype(DTYPE, copy=True)
    ah = _box_matrix(target_h, h)
    aw = _box_matrix(target_w, w)
    tmp = np.tensordot(ah, t.astype(np.float64), axes=([1], [1]))  # (th, C, W)
    out = np.tensordot(tmp, aw, axes=([2], [1]))  # (th, C, tw)
    return np.ascontiguousarray(out.transpose(1, 0, 2)).astype(DTYPE)


def bilinear_upscale(t: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Align-corners bilinear interpolation; corners map exactly to corners."""
    require_chw(t, "bilinear input")
    c, h, w = t.shape
    if target_h < h or target_w < w:
        raise ValidationError(
            f"bilinear_upscale targets {target_h}x{target_w} below source {h}x{w}"
        )
    sy = np.linspace(0.0, h - 1.0, target_h) if target_h > 1 else np.zeros(1)
    sx = np.linspace(0.0, w - 1.0, target_w) if target_w > 1 else np.zeros(1)
    y0 = np.clip(np.floor(sy).astype(np.int64), 0, h - 1)
    x0 = np.clip(np.floor(sx).astype(np.int64), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (sy - y0)[None, :, None]
    fx = (sx - x0)[None, None, :]
    src = t.astype(np.float64)
    tl = src[:, y0][:, :, x0]
    tr = src[:, y0][:, :, x1]
    bl = src[:, y1][:, :, x0]
    br = src[:, y1][:, :, x1]
    top = tl * (1 - fx) + tr * fx
    bot = bl * (1 - fx) + br * fx
    return (top * (1 - fy) + bot * fy).astype(DTYPE)
