"""Objective assembly, configuration, and the multi-resolution render loop."""

import numpy as np
import pytest

from doodle.errors import ConfigError, ValidationError
from doodle.extractor import default_extractor, extract
from doodle.optimize import (
    RenderConfig,
    build_context,
    content_loss_and_grad,
    default_schedule,
    initial_noise,
    match_all_taps,
    render,
    total_loss_and_grad,
)
from doodle.semantic import downsample_map

NET = default_extractor()


def photo(seed: int, h: int, w: int) -> np.ndarray:
    """Textured test image with smooth large-scale structure."""
    rng = np.random.default_rng(seed)
    yy, xx = np.meshgrid(np.linspace(0, 1, h), np.linspace(0, 1, w), indexing="ij")
    base = np.stack(
        [
            120 + 90 * np.sin(4 * xx + 2 * yy),
            128 + 80 * yy,
            110 + 70 * np.cos(5 * xx),
        ]
    )
    noise = rng.normal(0, 12, size=(3, h, w))
    return np.clip(base + noise, 0, 255).astype(np.float32)


def half_map(h: int, w: int, channels: int = 1) -> np.ndarray:
    m = np.zeros((channels, h, w), dtype=np.float32)
    m[:, :, w // 2 :] = 255.0
    return m


# ---------------------------------------------------------------------------
# configuration


def test_default_config_values():
    cfg = RenderConfig()
    assert cfg.content_weight == 10.0
    assert cfg.style_weight == 100.0
    assert cfg.semantic_weight is None
    assert cfg.patch_size == 3
    assert cfg.iterations == 100
    assert cfg.lbfgs_memory == 8
    assert cfg.seed == 0


@pytest.mark.parametrize(
    "kwargs",
    [
        {"content_weight": -1.0},
        {"style_weight": -0.5},
        {"semantic_weight": -2.0},
        {"patch_size": 2},
        {"patch_size": 0},
        {"iterations": 0},
        {"lbfgs_memory": 0},
        {"resolutions": ()},
        {"resolutions": ((64, 64), (32, 32))},
        {"resolutions": ((32, 32), (32, 32))},
    ],
)
def test_config_rejects_bad_values(kwargs):
    with pytest.raises(ConfigError):
        RenderConfig(**kwargs)


def test_schedule_quarters_halves_full():
    assert default_schedule(128, 96) == ((32, 32), (64, 48), (128, 96))
    assert default_schedule(64, 64) == ((32, 32), (64, 64))
    assert default_schedule(24, 24) == ((24, 24),)


# ---------------------------------------------------------------------------
# content term


def test_content_loss_zero_at_reference():
    taps = extract(photo(0, 24, 24), NET)
    e, g = content_loss_and_grad(taps, taps, NET.tap_names[-1])
    assert e == 0.0
    np.testing.assert_array_equal(g, np.zeros_like(g))


def test_content_loss_against_zero_reference():
    taps = extract(photo(1, 24, 24), NET)
    layer = NET.tap_names[-1]
    zeros = {layer: np.zeros_like(taps[layer])}
    e, g = content_loss_and_grad(taps, zeros, layer)
    x = taps[layer].astype(np.float64)
    assert e == pytest.approx(0.5 * float(np.sum(x * x)), rel=1e-6)
    np.testing.assert_array_equal(g, taps[layer])


def test_content_loss_finite_differences():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(4, 6, 6)).astype(np.float32)
    ref = rng.normal(size=(4, 6, 6)).astype(np.float32)

    def e_of(v):
        return content_loss_and_grad({"t": v}, {"t": ref}, "t")[0]

    _, g = content_loss_and_grad({"t": x}, {"t": ref}, "t")
    d = (g / np.linalg.norm(g.astype(np.float64))).astype(np.float32)
    eps = 1e-3
    fd = (e_of(x + eps * d) - e_of(x - eps * d)) / (2 * eps)
    analytic = float(np.sum(g.astype(np.float64) * d))
    assert abs(fd - analytic) / abs(analytic) < 1e-3


def test_content_loss_missing_tap():
    with pytest.raises(ConfigError):
        content_loss_and_grad({}, {}, "relu3_1")


# ---------------------------------------------------------------------------
# context construction


def test_auto_semantic_weight_equalizes_magnitudes():
    content = photo(3, 32, 32)
    style = photo(4, 32, 32)
    cm = half_map(32, 32)
    sm = half_map(32, 32)
    ctx = build_context(content, cm, style, sm, NET, RenderConfig())
    gamma = ctx.semantic_weight
    assert gamma > 0.0
    act_sum = act_n = map_sum = map_n = 0.0
    for name in ctx.tap_names:
        for img, m in ((content, cm), (style, sm)):
            tap = extract(img, NET)[name]
            down = downsample_map(m, tap.shape[1], tap.shape[2])
            act_sum += float(np.sum(np.abs(tap), dtype=np.float64))
            act_n += tap.size
            map_sum += float(np.sum(np.abs(gamma * down), dtype=np.float64))
            map_n += down.size
    ratio = (map_sum / map_n) / (act_sum / act_n)
    assert abs(ratio - 1.0) < 1e-5


def test_explicit_semantic_weight_respected():
    ctx = build_context(
        photo(5, 24, 24), half_map(24, 24), photo(6, 24, 24), half_map(24, 24),
        NET, RenderConfig(semantic_weight=50.0),
    )
    assert ctx.semantic_weight == 50.0
    tap = ctx.tap_names[0]
    assert ctx.style_grids[tap].channels == NET.channels_at(NET.tap_index(tap)) + 1


def test_zero_semantic_weight_drops_channels():
    ctx = build_context(
        photo(7, 24, 24), half_map(24, 24), photo(8, 24, 24), half_map(24, 24),
        NET, RenderConfig(semantic_weight=0.0),
    )
    bare = build_context(photo(7, 24, 24), None, photo(8, 24, 24), None, NET, RenderConfig())
    for tap in ctx.tap_names:
        assert ctx.content_maps[tap] is None
        assert ctx.style_grids[tap].channels == bare.style_grids[tap].channels
        np.testing.assert_array_equal(
            ctx.style_grids[tap].patches, bare.style_grids[tap].patches
        )


def test_unknown_tap_rejected():
    with pytest.raises(ValidationError):
        build_context(
            photo(9, 24, 24), None, photo(10, 24, 24), None,
            NET, RenderConfig(tap_names=("nope",)),
        )


# ---------------------------------------------------------------------------
# total objective


def test_zero_style_weight_at_content_is_zero():
    content = photo(11, 24, 24)
    ctx = build_context(content, None, photo(12, 24, 24), None, NET,
                        RenderConfig(style_weight=0.0))
    report, grad = total_loss_and_grad(content, ctx)
    assert report.total == 0.0
    assert report.content == 0.0
    np.testing.assert_array_equal(grad, np.zeros_like(grad))


def test_style_only_matches_unannotated_baseline():
    content = photo(13, 24, 24)
    style = photo(14, 24, 24)
    cfg = RenderConfig(content_weight=0.0, semantic_weight=0.0)
    with_maps = build_context(content, half_map(24, 24), style, half_map(24, 24), NET, cfg)
    no_maps = build_context(content, None, style, None, NET,
                            RenderConfig(content_weight=0.0))
    img = photo(15, 24, 24)
    r1, g1 = total_loss_and_grad(img, with_maps)
    r2, g2 = total_loss_and_grad(img, no_maps)
    assert r1.total == r2.total
    np.testing.assert_array_equal(g1, g2)


def test_loss_report_bookkeeping():
    content = photo(16, 24, 24)
    ctx = build_context(content, None, photo(17, 24, 24), None, NET, RenderConfig())
    report, _ = total_loss_and_grad(photo(18, 24, 24), ctx)
    expect = 10.0 * report.content + 100.0 * sum(report.style.values())
    assert report.total == pytest.approx(expect, rel=1e-12)
    report.check(10.0, 100.0)


def test_doubling_style_weight_doubles_style_contribution():
    content = photo(19, 24, 24)
    style = photo(20, 24, 24)
    img = photo(21, 24, 24)
    r1, _ = total_loss_and_grad(
        img, build_context(content, None, style, None, NET, RenderConfig(style_weight=100.0))
    )
    r2, _ = total_loss_and_grad(
        img, build_context(content, None, style, None, NET, RenderConfig(style_weight=200.0))
    )
    assert r2.total - 10.0 * r2.content == 2.0 * (r1.total - 10.0 * r1.content)
    assert r1.style == r2.style


def test_full_objective_finite_differences_frozen_assignment():
    content = photo(22, 24, 24)
    style = photo(23, 24, 24)
    cfg = RenderConfig(semantic_weight=50.0)
    ctx = build_context(content, half_map(24, 24), style, half_map(24, 24), NET, cfg)
    img = photo(24, 24, 24)
    frozen = match_all_taps(img, ctx)
    _, grad = total_loss_and_grad(img, ctx, assignments=frozen)
    d = (grad / np.linalg.norm(grad.astype(np.float64))).astype(np.float32)
    eps = 0.05
    e_plus, _ = total_loss_and_grad(img + eps * d, ctx, assignments=frozen)
    e_minus, _ = total_loss_and_grad(img - eps * d, ctx, assignments=frozen)
    fd = (e_plus.total - e_minus.total) / (2 * eps)
    analytic = float(np.sum(grad.astype(np.float64) * d.astype(np.float64)))
    assert abs(fd - analytic) / abs(analytic) < 1e-3


# ---------------------------------------------------------------------------
# render loop


def test_initial_noise_bounds_and_determinism():
    content = photo(25, 32, 32)
    a = initial_noise(content, 7)
    b = initial_noise(content, 7)
    c = initial_noise(content, 8)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    mean = float(np.mean(content, dtype=np.float64))
    assert a.min() >= mean - 25.0 and a.max() <= mean + 25.0
    assert a.shape == content.shape


def test_frozen_steps_never_increase_objective():
    events = []
    render(
        photo(26, 24, 24), None, photo(27, 24, 24), None, NET,
        RenderConfig(iterations=8, resolutions=((24, 24),), seed=3),
        callback=lambda e: events.append(e) or True,
    )
    steps = [e for e in events if e.phase == "step"]
    assert steps, "no optimizer steps recorded"
    for e in steps:
        assert e.frozen_after <= e.frozen_before + 1e-9 * abs(e.frozen_before)


def test_render_deterministic_for_fixed_seed():
    args = (photo(28, 32, 32), None, photo(29, 32, 32), None, NET)
    cfg = RenderConfig(iterations=3, resolutions=((16, 16), (32, 32)), seed=11)
    one = render(*args, cfg)
    two = render(*args, cfg)
    np.testing.assert_array_equal(one, two)
    assert one.shape == (3, 32, 32)
    assert one.min() >= 0.0 and one.max() <= 255.0


def test_zero_semantic_weight_render_equals_unannotated_render():
    content = photo(30, 32, 32)
    style = photo(31, 32, 32)
    cfg = dict(iterations=3, resolutions=((16, 16), (32, 32)), seed=5)
    with_maps = render(
        content, half_map(32, 32), style, half_map(32, 32), NET,
        RenderConfig(semantic_weight=0.0, **cfg),
    )
    without = render(content, None, style, None, NET, RenderConfig(**cfg))
    np.testing.assert_array_equal(with_maps, without)


def test_self_transfer_improves_both_terms():
    content = photo(32, 32, 32)
    cm = half_map(32, 32)
    cfg = RenderConfig(iterations=10, resolutions=((32, 32),), seed=2)
    ctx = build_context(content, cm, content, cm, NET, cfg)
    init_report, _ = total_loss_and_grad(initial_noise(content, cfg.seed), ctx)
    events = []
    render(content, cm, content, cm, NET, cfg, callback=lambda e: events.append(e) or True)
    final = [e for e in events if e.phase == "step"][-1].report
    assert sum(final.style.values()) <= sum(init_report.style.values())
    assert final.content < init_report.content


def test_levels_hand_off_by_upscaling():
    events = []
    out = render(
        photo(33, 32, 32), None, photo(34, 32, 32), None, NET,
        RenderConfig(iterations=2, resolutions=((16, 16), (24, 24), (32, 32)), seed=1),
        callback=lambda e: events.append(e) or True,
    )
    levels = [e for e in events if e.phase == "level"]
    assert [e.level for e in levels] == [0, 1, 2]
    assert levels[0].image.shape == (3, 16, 16)
    assert levels[1].image.shape == (3, 24, 24)
    assert out.shape == (3, 32, 32)


def test_callback_cancels_render():
    events = []

    def cb(e):
        events.append(e)
        return len(events) < 3

    render(
        photo(35, 32, 32), None, photo(36, 32, 32), None, NET,
        RenderConfig(iterations=50, resolutions=((16, 16), (32, 32)), seed=9),
        callback=cb,
    )
    step_count = sum(1 for e in events if e.phase == "step")
    assert step_count < 100  # far fewer evaluations than two full levels


def test_unpaired_maps_rejected():
    with pytest.raises(ValidationError, match="matching channel count|neither"):
        render(
            photo(37, 24, 24), half_map(24, 24), photo(38, 24, 24), None,
            NET, RenderConfig(iterations=1, resolutions=((24, 24),)),
        )


def test_map_channel_mismatch_rejected():
    with pytest.raises(ValidationError, match="channel count"):
        render(
            photo(39, 24, 24), half_map(24, 24, 1), photo(40, 24, 24),
            half_map(24, 24, 3), NET,
            RenderConfig(iterations=1, resolutions=((24, 24),)),
        )


def test_map_aspect_mismatch_rejected():
    bad = half_map(24, 48)
    with pytest.raises(ValidationError):
        render(
            photo(41, 24, 24), bad, photo(42, 24, 24), half_map(24, 24),
            NET, RenderConfig(iterations=1, resolutions=((24, 24),)),
        )


def test_schedule_beyond_content_size_rejected():
    with pytest.raises(ConfigError):
        render(
            photo(43, 24, 24), None, photo(44, 24, 24), None,
            NET, RenderConfig(iterations=1, resolutions=((48, 48),)),
        )
