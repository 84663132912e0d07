"""Layered feature extractor: weight-file IO, forward taps, image backprop.

The network is an ordered list of conv/relu/pool layers with a set of "taps",
layer indices whose activations are exposed to the rest of the pipeline.
Weights are frozen; the only gradient ever needed is with respect to the
input image.

Weight file layout (all integers little-endian):

    magic "DFW1"
    u32 layer count
    per layer:  u8 kind (0=conv, 1=relu, 2=pool)
                conv only: u32 out_ch, u32 in_ch,
                           out*in*9 f32 weights, out f32 biases
    u32 tap count
    per tap:    u32 layer index
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, ValidationError, WeightFormatError, WeightTruncationError
from .tensor import (
    DTYPE,
    KIND_CONV,
    KIND_POOL,
    KIND_RELU,
    ConvLayer,
    LayerSpec,
    as_tensor,
    layer_backward,
    layer_forward,
)

MAGIC = b"DFW1"
_KIND_CODES = {KIND_CONV: 0, KIND_RELU: 1, KIND_POOL: 2}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}

#: seed for the generated default fixture weights
DEFAULT_WEIGHT_SEED = 901

#: minimum image side accepted by extract()
MIN_IMAGE_SIDE = 16


@dataclass(frozen=True)
class FeatureExtractor:
    """Immutable network description: layers plus exposed tap indices."""

    layers: tuple[LayerSpec, ...]
    tap_indices: tuple[int, ...]

    def __post_init__(self):
        self._validate()

    @property
    def tap_names(self) -> tuple[str, ...]:
        """Tap layer names in network order (shallow to deep)."""
        return tuple(self.layers[i].name for i in self.tap_indices)

    def tap_index(self, name: str) -> int:
        for i in self.tap_indices:
            if self.layers[i].name == name:
                return i
        raise ValidationError(f"unknown tap {name!r}; taps are {list(self.tap_names)}")

    def _validate(self):
        if not self.layers:
            raise ValidationError("network has no layers")
        channels = 3
        first_conv = True
        for i, layer in enumerate(self.layers):
            if layer.kind == KIND_CONV:
                if first_conv and layer.conv.in_channels != 3:
                    raise ValidationError(
                        f"first conv must accept 3 channels, got {layer.conv.in_channels}"
                    )
                if layer.conv.in_channels != channels:
                    raise ValidationError(
                        f"layer {i} ({layer.name}) expects {layer.conv.in_channels} "
                        f"channels but receives {channels}"
                    )
                channels = layer.conv.out_channels
                first_conv = False
        for t in self.tap_indices:
            if not 0 <= t < len(self.layers):
                raise ValidationError(f"tap index {t} out of range")
        if len(set(self.tap_indices)) != len(self.tap_indices):
            raise ValidationError("duplicate tap indices")

    def channels_at(self, index: int) -> int:
        """Channel count of the activation produced by layer `index`."""
        channels = 3
        for layer in self.layers[: index + 1]:
            if layer.kind == KIND_CONV:
                channels = layer.conv.out_channels
        return channels

    def pools_before(self, index: int) -> int:
        return sum(1 for l in self.layers[: index + 1] if l.kind == KIND_POOL)


def _derive_names(kinds: list[str]) -> list[str]:
    """VGG-style block naming: conv2_1 is the first conv after the first pool."""
    names, used = [], set()
    block, conv_i = 1, 0
    for kind in kinds:
        if kind == KIND_CONV:
            conv_i += 1
            base = f"conv{block}_{conv_i}"
        elif kind == KIND_RELU:
            base = f"relu{block}_{max(conv_i, 1)}"
        else:
            base = f"pool{block}"
            block += 1
            conv_i = 0
        name, n = base, 1
        while name in used:
            n += 1
            name = f"{base}.{n}"
        used.add(name)
        names.append(name)
    return names


def save_weights(net: FeatureExtractor) -> bytes:
    """Serialize a network to the binary weight-file format."""
    parts = [MAGIC, struct.pack("<I", len(net.layers))]
    for layer in net.layers:
        parts.append(struct.pack("<B", _KIND_CODES[layer.kind]))
        if layer.kind == KIND_CONV:
            conv = layer.conv
            parts.append(struct.pack("<II", conv.out_channels, conv.in_channels))
            parts.append(np.ascontiguousarray(conv.weights, dtype="<f4").tobytes())
            parts.append(np.ascontiguousarray(conv.bias, dtype="<f4").tobytes())
    parts.append(struct.pack("<I", len(net.tap_indices)))
    for t in net.tap_indices:
        parts.append(struct.pack("<I", t))
    return b"".join(parts)


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.blob):
            raise WeightTruncationError(
                f"file truncated reading {what}: need {n} bytes at offset {self.pos}, "
                f"have {len(self.blob) - self.pos}"
            )
        chunk = self.blob[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]

    def u8(self, what: str) -> int:
        return self.take(1, what)[0]


def load_weights(blob: bytes) -> FeatureExtractor:
    """Parse and validate a weight file; same bytes always give the same net."""
    r = _Reader(blob)
    if r.take(4, "magic") != MAGIC:
        raise WeightFormatError(f"bad magic; expected {MAGIC!r}")
    n_layers = r.u32("layer count")
    if n_layers == 0 or n_layers > 10_000:
        raise WeightFormatError(f"implausible layer count {n_layers}")
    kinds: list[str] = []
    convs: list[ConvLayer | None] = []
    for i in range(n_layers):
        code = r.u8(f"kind of layer {i}")
        if code not in _KIND_NAMES:
            raise WeightFormatError(f"layer {i}: unknown kind code {code}")
        kind = _KIND_NAMES[code]
        kinds.append(kind)
        if kind != KIND_CONV:
            convs.append(None)
            continue
        out_ch = r.u32(f"layer {i} out_channels")
        in_ch = r.u32(f"layer {i} in_channels")
        if not (1 <= out_ch <= 65_536 and 1 <= in_ch <= 65_536):
            raise WeightFormatError(f"layer {i}: implausible channels {out_ch}x{in_ch}")
        wbytes = r.take(out_ch * in_ch * 9 * 4, f"layer {i} weights")
        bbytes = r.take(out_ch * 4, f"layer {i} biases")
        w = np.frombuffer(wbytes, dtype="<f4").reshape(out_ch, in_ch, 3, 3)
        b = np.frombuffer(bbytes, dtype="<f4")
        convs.append(ConvLayer(w.copy(), b.copy()))
    n_taps = r.u32("tap count")
    taps = tuple(r.u32(f"tap {j}") for j in range(n_taps))
    names = _derive_names(kinds)
    layers = tuple(
        LayerSpec(kind, name, conv) for kind, name, conv in zip(kinds, names, convs)
    )
    return FeatureExtractor(layers, taps)


def _forward(image: np.ndarray, net: FeatureExtractor, keep_inputs: bool):
    """Run layers up to the deepest tap; optionally keep per-layer inputs."""
    last = max(net.tap_indices)
    inputs = [] if keep_inputs else None
    taps: dict[str, np.ndarray] = {}
    x = image
    for i in range(last + 1):
        if keep_inputs:
            inputs.append(x)
        x = layer_forward(x, net.layers[i])
        if i in net.tap_indices:
            taps[net.layers[i].name] = x
    return taps, inputs


def extract(image: np.ndarray, net: FeatureExtractor) -> dict[str, np.ndarray]:
    """Forward pass collecting one activation tensor per tap name."""
    image = as_tensor(image, channels=3)
    if image.shape[1] < MIN_IMAGE_SIDE or image.shape[2] < MIN_IMAGE_SIDE:
        raise ValidationError(
            f"image {image.shape[1]}x{image.shape[2]} is below the "
            f"{MIN_IMAGE_SIDE}px minimum side"
        )
    taps, _ = _forward(image, net, keep_inputs=False)
    return taps


def backprop_to_image(
    tap_grads: dict[str, np.ndarray], image: np.ndarray, net: FeatureExtractor
) -> np.ndarray:
    """Gradient of sum_t <tap_grads[t], tap_t(image)> with respect to the image.

    Taps missing from tap_grads contribute zero.  Exact adjoint of extract.
    """
    image = as_tensor(image, channels=3)
    taps, inputs = _forward(image, net, keep_inputs=True)
    for name, g in tap_grads.items():
        if name not in taps:
            raise ValidationError(f"unknown tap {name!r}")
        if g.shape != taps[name].shape:
            raise ShapeError(
                f"tap grad {name!r} has shape {g.shape}, activation is {taps[name].shape}"
            )
    last = max(net.tap_indices)
    grad = np.zeros_like(taps[net.layers[last].name])
    for i in range(last, -1, -1):
        layer = net.layers[i]
        if i in net.tap_indices and layer.name in tap_grads:
            grad = grad + tap_grads[layer.name].astype(DTYPE)
        grad = layer_backward(grad, inputs[i], layer)
    return grad


def _orthogonal_conv(rng: np.random.Generator, out_ch: int, in_ch: int, gain: float) -> ConvLayer:
    """Conv layer whose flattened kernel rows are orthonormal, scaled by gain."""
    d = in_ch * 9
    a = rng.standard_normal((d, out_ch))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))  # fix QR sign ambiguity
    w = (gain * q.T).reshape(out_ch, in_ch, 3, 3).astype(DTYPE)
    b = (0.05 * rng.standard_normal(out_ch)).astype(DTYPE)
    return ConvLayer(w, b)


def default_extractor(seed: int = DEFAULT_WEIGHT_SEED) -> FeatureExtractor:
    """Desk-scale fixture network with seeded orthogonal-ish random weights.

    conv(3>16) relu conv(16>16) relu pool conv(16>32) relu pool conv(32>32)
    relu, with taps at the two post-pool relus (half and quarter resolution).
    The first conv folds the raw [0..255] pixel range down so activation RMS
    lands near 1 on natural images.
    """
    rng = np.random.default_rng(seed)
    plan = [
        (KIND_CONV, (16, 3, np.sqrt(2.0) / 96.0)),
        (KIND_RELU, None),
        (KIND_CONV, (16, 16, np.sqrt(2.0))),
        (KIND_RELU, None),
        (KIND_POOL, None),
        (KIND_CONV, (32, 16, np.sqrt(2.0))),
        (KIND_RELU, None),
        (KIND_POOL, None),
        (KIND_CONV, (32, 32, np.sqrt(2.0))),
        (KIND_RELU, None),
    ]
    kinds = [kind for kind, _ in plan]
    names = _derive_names(kinds)
    layers = []
    for (kind, params), name in zip(plan, names):
        conv = _orthogonal_conv(rng, *params[:2], params[2]) if params else None
        layers.append(LayerSpec(kind, name, conv))
    return FeatureExtractor(tuple(layers), (6, 9))
