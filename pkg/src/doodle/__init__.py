"""Patch-based style transfer steered by painted annotation maps.

The pipeline: a small convolutional extractor turns images into
activation tensors at named taps; user-painted annotation channels are
scaled and concatenated onto those activations; synthesis then minimizes
a content term plus a patch nearest-neighbour style term with L-BFGS,
coarse to fine.
"""

from .errors import (
    ConfigError,
    DegenerateMapError,
    DoodleError,
    ImageIOError,
    NonFiniteLossError,
    ShapeError,
    ValidationError,
    WeightFormatError,
    WeightTruncationError,
)
from .extractor import (
    FeatureExtractor,
    backprop_to_image,
    default_extractor,
    extract,
    load_weights,
    save_weights,
)
from .images import decode_png, encode_png, load_image, load_map, save_png
from .lbfgs import MinimizeResult, lbfgs_minimize
from .optimize import (
    LossReport,
    RenderConfig,
    RenderContext,
    RenderEvent,
    build_context,
    content_loss_and_grad,
    render,
    total_loss_and_grad,
)
from .patches import (
    NNAssignment,
    PatchGrid,
    extract_patches,
    nearest_neighbors,
    style_loss_and_grad,
)
from .semantic import (
    AugmentedFeatures,
    auto_gamma,
    check_aspect,
    concat_semantic,
    downsample_map,
)

__all__ = [
    "AugmentedFeatures",
    "ConfigError",
    "DegenerateMapError",
    "DoodleError",
    "FeatureExtractor",
    "ImageIOError",
    "LossReport",
    "MinimizeResult",
    "NNAssignment",
    "NonFiniteLossError",
    "PatchGrid",
    "RenderConfig",
    "RenderContext",
    "RenderEvent",
    "ShapeError",
    "ValidationError",
    "WeightFormatError",
    "WeightTruncationError",
    "auto_gamma",
    "backprop_to_image",
    "build_context",
    "check_aspect",
    "concat_semantic",
    "content_loss_and_grad",
    "decode_png",
    "default_extractor",
    "downsample_map",
    "encode_png",
    "extract",
    "extract_patches",
    "lbfgs_minimize",
    "load_image",
    "load_map",
    "load_weights",
    "nearest_neighbors",
    "render",
    "save_png",
    "save_weights",
    "style_loss_and_grad",
    "total_loss_and_grad",
]
