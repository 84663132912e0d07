"""Dense tensor arithmetic for the feature extractor.

A "tensor" throughout this package is a C-contiguous numpy array of shape
(channels, height, width) with dtype float32.  This module provides the
forward and backward passes for the three layer kinds the extractor is
built from: 3x3 same-padded convolution, rectification, and 2x2 average
pooling.  All functions are pure; inputs are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError, ValidationError

DTYPE = np.float32


def as_tensor(data, channels: int | None = None) -> np.ndarray:
    """Coerce array-like data to a (C, H, W) float32 tensor.

    2-D input is promoted to a single channel.  Raises ShapeError for
    other ranks and ValidationError for non-finite values.
    """
    t = np.ascontiguousarray(data, dtype=DTYPE)
    if t.ndim == 2:
        t = t[None, :, :]
    if t.ndim != 3:
        raise ShapeError(f"expected 2-D or 3-D data, got shape {t.shape}")
    if channels is not None and t.shape[0] != channels:
        raise ShapeError(f"expected {channels} channels, got {t.shape[0]}")
    if t.shape[0] < 1 or t.shape[1] < 1 or t.shape[2] < 1:
        raise ShapeError(f"degenerate tensor shape {t.shape}")
    if not np.isfinite(t).all():
        raise ValidationError("tensor contains NaN or Inf")
    return t


def require_chw(t: np.ndarray, name: str = "tensor") -> None:
    if t.ndim != 3:
        raise ShapeError(f"{name} must be (C, H, W), got shape {t.shape}")


@dataclass(frozen=True)
class ConvLayer:
    """Frozen weights for one 3x3 convolution: (out, in, 3, 3) + per-out bias."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(self.weights, dtype=DTYPE)
        b = np.ascontiguousarray(self.bias, dtype=DTYPE)
        if w.ndim != 4 or w.shape[2:] != (3, 3):
            raise ShapeError(f"conv weights must be (out, in, 3, 3), got {w.shape}")
        if b.shape != (w.shape[0],):
            raise ShapeError(f"bias must be ({w.shape[0]},), got {b.shape}")
        if not (np.isfinite(w).all() and np.isfinite(b).all()):
            raise ValidationError("conv weights contain NaN or Inf")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]


#: layer kind tags used in LayerSpec and in the weight file (0, 1, 2)
KIND_CONV = "conv"
KIND_RELU = "relu"
KIND_POOL = "pool"


@dataclass(frozen=True)
class LayerSpec:
    """One network layer: a kind tag, a name, and weights for conv layers."""

    kind: str
    name: str
    conv: ConvLayer | None = field(default=None)

    def __post_init__(self):
        if self.kind not in (KIND_CONV, KIND_RELU, KIND_POOL):
            raise ValidationError(f"unknown layer kind {self.kind!r}")
        if (self.kind == KIND_CONV) != (self.conv is not None):
            raise ValidationError("conv layers carry weights; others must not")


def conv3x3_forward(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Same-padded 3x3 convolution; output keeps the input's H and W."""
    require_chw(x, "conv input")
    cin, h, w = x.shape
    if cin != layer.in_channels:
        raise ShapeError(
            f"conv expects {layer.in_channels} input channels, got {cin}"
        )
    padded = np.zeros((cin, h + 2, w + 2), dtype=DTYPE)
    padded[:, 1 : h + 1, 1 : w + 1] = x
    out = np.empty((layer.out_channels, h, w), dtype=DTYPE)
    out[:] = layer.bias[:, None, None]
    for dy in range(3):
        for dx in range(3):
            # (out, in) x (in, H, W) -> (out, H, W), one tap of the kernel
            out += np.tensordot(
                layer.weights[:, :, dy, dx], padded[:, dy : dy + h, dx : dx + w], axes=1
            )
    return out


def conv3x3_backward(grad_out: np.ndarray, x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Adjoint of conv3x3_forward with respect to the input (weights frozen)."""
    require_chw(grad_out, "conv grad_out")
    require_chw(x, "conv input")
    cin, h, w = x.shape
    if cin != layer.in_channels:
        raise ShapeError(
            f"conv expects {layer.in_channels} input channels, got {cin}"
        )
    if grad_out.shape != (layer.out_channels, h, w):
        raise ShapeError(
            f"grad_out shape {grad_out.shape} does not match forward output "
            f"{(layer.out_channels, h, w)}"
        )
    gpad = np.zeros((cin, h + 2, w + 2), dtype=DTYPE)
    for dy in range(3):
        for dx in range(3):
            gpad[:, dy : dy + h, dx : dx + w] += np.tensordot(
                layer.weights[:, :, dy, dx], grad_out, axes=([0], [0])
            )
    return np.ascontiguousarray(gpad[:, 1 : h + 1, 1 : w + 1])


def relu_forward(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, DTYPE(0))


def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Gradient passes where the forward input was strictly positive."""
    if grad_out.shape != x.shape:
        raise ShapeError(f"grad_out {grad_out.shape} vs input {x.shape}")
    return np.where(x > 0, grad_out, DTYPE(0))


def avgpool2x2_forward(x: np.ndarray) -> np.ndarray:
    """2x2 mean pooling; odd sizes are implicitly zero-padded to even first."""
    require_chw(x, "pool input")
    c, h, w = x.shape
    he, we = h + (h & 1), w + (w & 1)
    if (he, we) != (h, w):
        padded = np.zeros((c, he, we), dtype=DTYPE)
        padded[:, :h, :w] = x
    else:
        padded = x
    return padded.reshape(c, he // 2, 2, we // 2, 2).mean(axis=(2, 4), dtype=DTYPE)


def avgpool2x2_backward(grad_out: np.ndarray, input_shape: tuple[int, int, int]) -> np.ndarray:
    """Adjoint of avgpool2x2_forward: each cell receives grad/4 of its window."""
    require_chw(grad_out, "pool grad_out")
    c, h, w = input_shape
    if grad_out.shape != (c, (h + 1) // 2, (w + 1) // 2):
        raise ShapeError(
            f"grad_out shape {grad_out.shape} does not match pooled "
            f"{(c, (h + 1) // 2, (w + 1) // 2)}"
        )
    g = np.repeat(np.repeat(grad_out, 2, axis=1), 2, axis=2) * DTYPE(0.25)
    return np.ascontiguousarray(g[:, :h, :w])


def layer_forward(x: np.ndarray, layer: LayerSpec) -> np.ndarray:
    if layer.kind == KIND_CONV:
        return conv3x3_forward(x, layer.conv)
    if layer.kind == KIND_RELU:
        return relu_forward(x)
    return avgpool2x2_forward(x)


def layer_backward(grad_out: np.ndarray, x: np.ndarray, layer: LayerSpec) -> np.ndarray:
    if layer.kind == KIND_CONV:
        return conv3x3_backward(grad_out, x, layer.conv)
    if layer.kind == KIND_RELU:
        return relu_backward(grad_out, x)
    return avgpool2x2_backward(grad_out, x.shape)
