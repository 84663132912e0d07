"""Objective assembly and the coarse-to-fine render loop.

The total objective is a weighted sum of a content reconstruction term and
per-tap patch style terms.  A render runs that objective under L-BFGS at a
sequence of increasing resolutions, re-matching style patches once per
outer iteration and seeding each level with the upscaled result of the
previous one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigError, DegenerateMapError, ShapeError, ValidationError
from .extractor import MIN_IMAGE_SIDE, FeatureExtractor, backprop_to_image, extract
from .lbfgs import lbfgs_minimize
from .patches import NNAssignment, PatchGrid, extract_patches, nearest_neighbors, style_loss_and_grad
from .resample import bilinear_upscale, box_downsample
from .semantic import check_aspect, concat_semantic, downsample_map
from .tensor import DTYPE, require_chw

# Half-width of the seeded uniform noise around the content mean, in pixel
# units, used to initialise the coarsest level.
INIT_NOISE_SPREAD = 25.0

# Smallest side the default schedule will render at.
MIN_LEVEL_SIDE = 32


@dataclass(frozen=True)
class RenderConfig:
    """User-facing knobs for a render.

    ``semantic_weight`` of None means: calibrate automatically so the
    scaled semantic channels match the activation magnitudes.  A
    ``resolutions`` of None picks a three-level quarter/half/full schedule
    derived from the content image.  ``tap_names`` / ``content_layer`` of
    None default to all network taps and the deepest tap respectively.
    """

    content_weight: float = 10.0
    style_weight: float = 100.0
    semantic_weight: float | None = None
    patch_size: int = 3
    tap_names: tuple[str, ...] | None = None
    content_layer: str | None = None
    resolutions: tuple[tuple[int, int], ...] | None = None
    iterations: int = 100
    seed: int = 0
    lbfgs_memory: int = 8

    def __post_init__(self) -> None:
        if self.content_weight < 0 or self.style_weight < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.semantic_weight is not None and self.semantic_weight < 0:
            raise ConfigError("semantic weight must be non-negative")
        if self.patch_size < 1 or self.patch_size % 2 == 0:
            raise ConfigError(f"patch size must be odd and positive, got {self.patch_size}")
        if self.iterations < 1:
            raise ConfigError("need at least one iteration per level")
        if self.lbfgs_memory < 1:
            raise ConfigError("optimizer memory must be positive")
        if self.resolutions is not None:
            if not self.resolutions:
                raise ConfigError("resolution schedule is empty")
            prev = None
            for h, w in self.resolutions:
                if h < 1 or w < 1:
                    raise ConfigError(f"bad resolution {h}x{w}")
                if prev is not None:
                    ph, pw = prev
                    if h < ph or w < pw or (h, w) == (ph, pw):
                        raise ConfigError("resolutions must be increasing")
                prev = (h, w)


@dataclass(frozen=True)
class LossReport:
    """One objective evaluation broken into its terms.

    ``style`` maps tap name to the raw (unweighted) patch energy; ``total``
    applies the configured weights.
    """

    total: float
    content: float
    style: dict[str, float]
    iteration: int

    def check(self, content_weight: float, style_weight: float) -> None:
        expect = content_weight * self.content + style_weight * sum(self.style.values())
        if abs(self.total - expect) > 1e-5 * max(1.0, abs(expect)):
            raise ValidationError(
                f"loss bookkeeping broken: total {self.total} vs terms {expect}"
            )


@dataclass(frozen=True)
class RenderContext:
    """Everything fixed at one resolution level.

    Style patch grids and content activations are precomputed; only the
    synthesized image changes during optimization.  ``content_maps`` holds
    the per-tap downsampled semantic channels concatenated onto the
    current image's activations each evaluation (empty when unannotated).
    """

    net: FeatureExtractor
    config: RenderConfig
    tap_names: tuple[str, ...]
    content_layer: str
    content_taps: dict[str, np.ndarray]
    content_maps: dict[str, np.ndarray | None]
    style_grids: dict[str, PatchGrid]
    semantic_weight: float


@dataclass(frozen=True)
class RenderEvent:
    """Progress snapshot handed to the render callback.

    ``phase`` is "step" after each accepted optimizer step and "level" when
    a resolution level finishes.  ``frozen_before``/``frozen_after``
    bracket the accepted step under the iteration's fixed patch
    assignment.  Returning False from the callback cancels the render at
    the next iteration boundary.
    """

    phase: str
    level: int
    level_count: int
    iteration: int
    iteration_count: int
    report: LossReport
    frozen_before: float
    frozen_after: float
    image: np.ndarray


RenderCallback = Callable[[RenderEvent], bool | None]


def content_loss_and_grad(
    taps: dict[str, np.ndarray],
    content_taps: dict[str, np.ndarray],
    content_layer: str,
) -> tuple[float, np.ndarray]:
    """Half squared distance to the content activations at one tap."""
    if content_layer not in taps or content_layer not in content_taps:
        raise ConfigError(f"content layer {content_layer!r} is not an extracted tap")
    x = taps[content_layer]
    ref = content_taps[content_layer]
    if x.shape != ref.shape:
        raise ShapeError(f"content tap shapes differ: {x.shape} vs {ref.shape}")
    diff = x - ref
    energy = 0.5 * float(np.einsum("ijk,ijk->", diff, diff, dtype=np.float64))
    return energy, diff


def _joint_auto_gamma(
    activations: list[np.ndarray], maps: list[np.ndarray]
) -> float:
    """Semantic weight equalizing mean |activation| and mean |gamma * map|
    over all taps of both images at once."""
    act_sum = sum(float(np.sum(np.abs(a), dtype=np.float64)) for a in activations)
    act_n = sum(a.size for a in activations)
    map_sum = sum(float(np.sum(np.abs(m), dtype=np.float64)) for m in maps)
    map_n = sum(m.size for m in maps)
    if map_sum == 0.0:
        raise DegenerateMapError("semantic map is all zeros; cannot calibrate weight")
    if act_sum == 0.0:
        raise ValidationError("activations are all zeros; cannot calibrate weight")
    return (act_sum / act_n) / (map_sum / map_n)


def build_context(
    content_image: np.ndarray,
    content_map: np.ndarray | None,
    style_image: np.ndarray,
    style_map: np.ndarray | None,
    net: FeatureExtractor,
    config: RenderConfig,
) -> RenderContext:
    """Precompute the fixed inputs of one resolution level.

    Semantic maps are downsampled straight to each tap's resolution.  A
    resolved semantic weight of exactly zero drops the semantic channels
    entirely, which is equivalent (the channels would be all zero on both
    sides) and keeps the unannotated path identical bit for bit.
    """
    tap_names = config.tap_names if config.tap_names is not None else net.tap_names
    if not tap_names:
        raise ConfigError("no tap layers configured")
    for name in tap_names:
        net.tap_index(name)
    content_layer = config.content_layer or tap_names[-1]
    if content_layer not in tap_names:
        raise ConfigError(f"content layer {content_layer!r} not among taps {list(tap_names)}")

    content_taps = extract(content_image, net)
    style_taps = extract(style_image, net)

    content_down: dict[str, np.ndarray | None] = {}
    style_down: dict[str, np.ndarray | None] = {}
    if content_map is not None and style_map is not None:
        for name in tap_names:
            ch, cw = content_taps[name].shape[1:]
            sh, sw = style_taps[name].shape[1:]
            content_down[name] = downsample_map(content_map, ch, cw)
            style_down[name] = downsample_map(style_map, sh, sw)
        if config.semantic_weight is not None:
            gamma = float(config.semantic_weight)
        else:
            gamma = _joint_auto_gamma(
                [content_taps[n] for n in tap_names] + [style_taps[n] for n in tap_names],
                [content_down[n] for n in tap_names] + [style_down[n] for n in tap_names],
            )
        if gamma == 0.0:
            content_down = {name: None for name in tap_names}
            style_down = {name: None for name in tap_names}
    else:
        gamma = 0.0
        content_down = {name: None for name in tap_names}
        style_down = {name: None for name in tap_names}

    style_grids = {
        name: extract_patches(
            concat_semantic(style_taps[name], style_down[name], gamma),
            config.patch_size,
        )
        for name in tap_names
    }
    return RenderContext(
        net=net,
        config=config,
        tap_names=tuple(tap_names),
        content_layer=content_layer,
        content_taps={name: content_taps[name] for name in tap_names},
        content_maps=content_down,
        style_grids=style_grids,
        semantic_weight=gamma,
    )


def total_loss_and_grad(
    image: np.ndarray,
    context: RenderContext,
    assignments: dict[str, NNAssignment] | None = None,
    iteration: int = 0,
) -> tuple[LossReport, np.ndarray]:
    """Full objective and its gradient with respect to the image.

    With ``assignments`` given, patch matches are frozen (line searches and
    gradient checks); otherwise each tap is re-matched at this image.
    """
    require_chw(image, "image")
    cfg = context.config
    taps = extract(image, context.net)
    tap_grads: dict[str, np.ndarray] = {}
    style_terms: dict[str, float] = {}
    for name in context.tap_names:
        aug = concat_semantic(taps[name], context.content_maps[name], context.semantic_weight)
        grid = extract_patches(aug, cfg.patch_size)
        if assignments is not None:
            if name not in assignments:
                raise ConfigError(f"frozen assignment missing tap {name!r}")
            nn = assignments[name]
        else:
            nn = nearest_neighbors(grid, context.style_grids[name])
        energy, grad = style_loss_and_grad(
            aug, context.style_grids[name], nn, cfg.patch_size, current_grid=grid
        )
        style_terms[name] = energy
        if cfg.style_weight != 0.0:
            tap_grads[name] = DTYPE(cfg.style_weight) * grad

    content_energy, content_grad = content_loss_and_grad(
        taps, context.content_taps, context.content_layer
    )
    if cfg.content_weight != 0.0:
        weighted = DTYPE(cfg.content_weight) * content_grad
        if context.content_layer in tap_grads:
            tap_grads[context.content_layer] = tap_grads[context.content_layer] + weighted
        else:
            tap_grads[context.content_layer] = weighted

    image_grad = backprop_to_image(tap_grads, image, context.net)
    total = cfg.content_weight * content_energy + cfg.style_weight * sum(style_terms.values())
    report = LossReport(
        total=total, content=content_energy, style=style_terms, iteration=iteration
    )
    return report, image_grad


def match_all_taps(
    image: np.ndarray, context: RenderContext
) -> dict[str, NNAssignment]:
    """Fresh nearest-neighbour assignment for every tap at this image."""
    taps = extract(image, context.net)
    out = {}
    for name in context.tap_names:
        aug = concat_semantic(taps[name], context.content_maps[name], context.semantic_weight)
        grid = extract_patches(aug, context.config.patch_size)
        out[name] = nearest_neighbors(grid, context.style_grids[name])
    return out


def initial_noise(content_level: np.ndarray, seed: int) -> np.ndarray:
    """Seeded uniform noise around the content mean, +-25 pixel units."""
    rng = np.random.default_rng(seed)
    mean = float(np.mean(content_level, dtype=np.float64))
    return rng.uniform(
        mean - INIT_NOISE_SPREAD, mean + INIT_NOISE_SPREAD, size=content_level.shape
    ).astype(DTYPE)


def default_schedule(height: int, width: int) -> tuple[tuple[int, int], ...]:
    """Quarter, half, full target size, floored at 32 px per side."""
    levels: list[tuple[int, int]] = []
    for divisor in (4, 2, 1):
        h = min(height, max(MIN_LEVEL_SIDE, math.ceil(height / divisor)))
        w = min(width, max(MIN_LEVEL_SIDE, math.ceil(width / divisor)))
        if not levels or levels[-1] != (h, w):
            levels.append((h, w))
    return tuple(levels)


def schedule_from_sizes(
    sizes: list[int], height: int, width: int
) -> tuple[tuple[int, int], ...]:
    """Turn increasing max-side pixel sizes into (h, w) levels for an image
    of the given aspect ratio."""
    if not sizes:
        raise ValidationError("resolution list is empty")
    if any(int(s) != s or s < 1 for s in sizes) or list(sizes) != sorted(set(sizes)):
        raise ValidationError("resolutions must be positive and strictly increasing")
    longest = max(height, width)
    levels: list[tuple[int, int]] = []
    for size in sizes:
        h = max(1, round(height * size / longest))
        w = max(1, round(width * size / longest))
        if not levels or levels[-1] != (h, w):
            levels.append((h, w))
    return tuple(levels)


def _level_size(orig_h: int, orig_w: int, level_h: int, level_w: int,
                target_h: int, target_w: int) -> tuple[int, int]:
    """Scale a companion image to the same relative size as the level."""
    h = min(orig_h, max(MIN_IMAGE_SIDE, round(orig_h * level_h / target_h)))
    w = min(orig_w, max(MIN_IMAGE_SIDE, round(orig_w * level_w / target_w)))
    return h, w


def render(
    content_image: np.ndarray,
    content_map: np.ndarray | None,
    style_image: np.ndarray,
    style_map: np.ndarray | None,
    net: FeatureExtractor,
    config: RenderConfig,
    callback: RenderCallback | None = None,
) -> np.ndarray:
    """Synthesize an image in the content layout with the style's patches.

    Runs the configured resolution schedule coarse to fine.  The coarsest
    level starts from seeded uniform noise around the content mean; later
    levels start from the bilinear upscale of the previous result.  Output
    is clamped to [0, 255] only at the very end so intermediate gradients
    are undistorted.
    """
    require_chw(content_image, "content image")
    require_chw(style_image, "style image")
    if (content_map is None) != (style_map is None):
        raise ValidationError(
            "semantic maps must be provided for both images (matching channel count) or neither"
        )
    if content_map is not None and style_map is not None:
        require_chw(content_map, "content map")
        require_chw(style_map, "style map")
        if content_map.shape[0] != style_map.shape[0]:
            raise ValidationError(
                f"semantic maps must share the same channel count: "
                f"{content_map.shape[0]} vs {style_map.shape[0]}"
            )
        check_aspect(content_map.shape[1:], content_image.shape[1:])
        check_aspect(style_map.shape[1:], style_image.shape[1:])

    target_h, target_w = content_image.shape[1:]
    schedule = (
        config.resolutions
        if config.resolutions is not None
        else default_schedule(target_h, target_w)
    )
    if schedule[-1][0] > target_h or schedule[-1][1] > target_w:
        raise ConfigError(
            f"finest level {schedule[-1]} exceeds content size {(target_h, target_w)}"
        )

    current: np.ndarray | None = None
    for level, (lh, lw) in enumerate(schedule):
        content_l = box_downsample(content_image, lh, lw)
        sh, sw = _level_size(
            style_image.shape[1], style_image.shape[2], lh, lw, target_h, target_w
        )
        style_l = box_downsample(style_image, sh, sw)
        context = build_context(content_l, content_map, style_l, style_map, net, config)

        if current is None:
            current = initial_noise(content_l, config.seed)
        else:
            current = bilinear_upscale(current, lh, lw)

        state: dict = {"nn": None, "refresh": True, "report": None, "image": current}

        def objective(x: np.ndarray) -> tuple[float, np.ndarray]:
            x32 = np.ascontiguousarray(x, dtype=DTYPE)
            if state["refresh"]:
                state["nn"] = match_all_taps(x32, context)
                state["refresh"] = False
            report, grad = total_loss_and_grad(
                x32, context, assignments=state["nn"], iteration=state.get("k", 0)
            )
            report.check(config.content_weight, config.style_weight)
            state["report"] = report
            state["image"] = x32
            return report.total, grad.astype(np.float64)

        def on_iteration(k: int, x: np.ndarray) -> bool | None:
            if state.get("cancel"):
                return False
            state["refresh"] = True
            state["k"] = k
            return None

        def on_step(k: int, before: float, after: float) -> None:
            if callback is None:
                return
            event = RenderEvent(
                phase="step",
                level=level,
                level_count=len(schedule),
                iteration=k,
                iteration_count=config.iterations,
                report=state["report"],
                frozen_before=before,
                frozen_after=after,
                image=state["image"],
            )
            if callback(event) is False:
                state["cancel"] = True

        result = lbfgs_minimize(
            objective,
            current,
            iterations=config.iterations,
            memory=config.lbfgs_memory,
            tol=0.0,
            on_iteration=on_iteration,
            on_step=on_step,
        )
        current = np.ascontiguousarray(result.x, dtype=DTYPE)
        if callback is not None:
            event = RenderEvent(
                phase="level",
                level=level,
                level_count=len(schedule),
                iteration=result.iterations,
                iteration_count=config.iterations,
                report=state["report"],
                frozen_before=result.loss,
                frozen_after=result.loss,
                image=current,
            )
            if callback(event) is False:
                state["cancel"] = True
        # A cancelled level still yields its partial image; callers that
        # requested cancellation decide what to do with it.
        if result.stop_reason == "cancelled" or state.get("cancel"):
            break

    assert current is not None
    return np.clip(current, 0.0, 255.0).astype(DTYPE)
