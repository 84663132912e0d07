"""Semantic channel augmentation.

A semantic map is an (M, H, W) float32 array of annotation channels aligned
to a photo or painting, typically ingested from an RGB file with values in
[0..255].  Maps are static: they are downsampled to each tap's resolution,
scaled by the semantic weight, and concatenated onto the activations, and
never change during optimization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMapError, ShapeError, ValidationError
from .resample import box_downsample
from .tensor import DTYPE, require_chw

#: maximum allowed relative aspect-ratio mismatch between a map and its image
ASPECT_TOLERANCE = 0.02


@dataclass(frozen=True)
class AugmentedFeatures:
    """Activations with semantic channels appended: (N+M, h, w) float32."""

    data: np.ndarray
    n_activation: int
    n_semantic: int
    gamma: float

    def __post_init__(self):
        require_chw(self.data, "augmented features")
        if self.data.shape[0] != self.n_activation + self.n_semantic:
            raise ShapeError(
                f"{self.data.shape[0]} channels != "
                f"{self.n_activation} activation + {self.n_semantic} semantic"
            )

    @property
    def activation(self) -> np.ndarray:
        return self.data[: self.n_activation]

    @property
    def semantic(self) -> np.ndarray:
        return self.data[self.n_activation :]

    @property
    def spatial(self) -> tuple[int, int]:
        return self.data.shape[1], self.data.shape[2]


def check_aspect(map_shape: tuple[int, int], image_shape: tuple[int, int]) -> None:
    """Reject maps whose aspect ratio strays more than 2% from the image's."""
    mh, mw = map_shape
    ih, iw = image_shape
    if abs((mw / mh) / (iw / ih) - 1.0) > ASPECT_TOLERANCE:
        raise ValidationError(
            f"map aspect {mw}x{mh} differs from image aspect {iw}x{ih} by more than "
            f"{ASPECT_TOLERANCE:.0%}"
        )


def downsample_map(sem_map: np.ndarray, target_h: int, target_w: int) -> np.ndarray:
    """Box-filter a semantic map down to a tap's resolution.

    Upsampling is not supported: author a bigger map instead.
    """
    require_chw(sem_map, "semantic map")
    if target_h > sem_map.shape[1] or target_w > sem_map.shape[2]:
        raise ValidationError(
            f"map {sem_map.shape[1]}x{sem_map.shape[2]} is smaller than the "
            f"{target_h}x{target_w} tap; maps are never upsampled"
        )
    return box_downsample(sem_map, target_h, target_w)


def concat_semantic(x: np.ndarray, m_down: np.ndarray | None, gamma: float) -> AugmentedFeatures:
    """Append gamma-scaled semantic channels to an activation tensor.

    With m_down None (no annotations) the result simply wraps x with zero
    semantic channels, which is the unannotated degenerate case.
    """
    require_chw(x, "activations")
    if gamma < 0:
        raise ValidationError(f"semantic weight must be >= 0, got {gamma}")
    if m_down is None or m_down.shape[0] == 0:
        return AugmentedFeatures(
            np.ascontiguousarray(x, dtype=DTYPE), x.shape[0], 0, float(gamma)
        )
    require_chw(m_down, "downsampled map")
    if m_down.shape[1:] != x.shape[1:]:
        raise ShapeError(
            f"map {m_down.shape[1:]} does not match activations {x.shape[1:]}"
        )
    scaled = DTYPE(gamma) * m_down.astype(DTYPE)
    data = np.concatenate([x.astype(DTYPE), scaled], axis=0)
    return AugmentedFeatures(data, x.shape[0], m_down.shape[0], float(gamma))


def auto_gamma(x: np.ndarray, m_down: np.ndarray) -> float:
    """Semantic weight that equalizes mean |activation| and mean |map| magnitude."""
    mx = float(np.mean(np.abs(x), dtype=np.float64))
    mm = float(np.mean(np.abs(m_down), dtype=np.float64))
    if mm == 0.0:
        raise DegenerateMapError("semantic map is all zero; cannot calibrate weight")
    if mx == 0.0:
        raise ValidationError("activations are all zero; cannot calibrate map weight")
    return mx / mm
