"""Command-line front door.

``doodle render`` runs one synthesis to a PNG file, or starts the HTTP
job service with ``--serve``.  Exit codes: 0 success, 2 bad usage or
invalid inputs, 1 runtime failure.  The DOODLE_THREADS environment
variable caps worker threads used by the matcher.
"""

from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path

from .errors import (
    DoodleError,
    ShapeError,
    ValidationError,
    WeightFormatError,
)
from .extractor import default_extractor, load_weights
from .images import load_image, load_map, save_png
from .optimize import RenderConfig, RenderEvent, render, schedule_from_sizes

_DEFAULTS = RenderConfig()
DEFAULT_PORT = 8707


def _gamma_arg(text: str) -> str:
    if text == "auto":
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'auto' or a number, got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError("semantic weight must be non-negative")
    return text


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="doodle",
        description="Patch-based style transfer guided by painted annotation maps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser(
        "render",
        help="synthesize an image (or start the HTTP service with --serve)",
        description=(
            "Renders the content image in the style of the style image. "
            "Optional annotation maps steer which style regions may be "
            "used where; both maps must be given together and share the "
            "same channel count."
        ),
    )
    r.add_argument("--content", help="content image (PNG)")
    r.add_argument("--style", help="style image (PNG)")
    r.add_argument("--content-map", help="annotation map painted over the content")
    r.add_argument("--style-map", help="annotation map painted over the style")
    r.add_argument("--out", help="output PNG path")
    r.add_argument(
        "--alpha", type=float, default=_DEFAULTS.content_weight,
        help=f"content weight (default {_DEFAULTS.content_weight:g})",
    )
    r.add_argument(
        "--beta", type=float, default=_DEFAULTS.style_weight,
        help=f"style weight (default {_DEFAULTS.style_weight:g})",
    )
    r.add_argument(
        "--gamma", type=_gamma_arg, default="auto",
        help="semantic weight, or 'auto' to equalize magnitudes (default auto)",
    )
    r.add_argument(
        "--patch-size", type=int, default=_DEFAULTS.patch_size,
        help=f"style patch size, odd (default {_DEFAULTS.patch_size})",
    )
    r.add_argument(
        "--resolutions",
        help="comma-separated increasing max-side sizes, e.g. 64,128,256 "
        "(default: quarter/half/full of the content size)",
    )
    r.add_argument(
        "--iters", type=int, default=_DEFAULTS.iterations,
        help=f"optimizer iterations per resolution (default {_DEFAULTS.iterations})",
    )
    r.add_argument("--seed", type=int, help="RNG seed (default: random, echoed)")
    r.add_argument("--weights", help="extractor weight file (default: built-in)")
    r.add_argument(
        "--serve", action="store_true",
        help="start the HTTP render service instead of rendering",
    )
    r.add_argument(
        "--port", type=int, default=DEFAULT_PORT,
        help=f"service port for --serve (default {DEFAULT_PORT})",
    )
    return parser


def _parse_schedule(text: str, height: int, width: int) -> tuple[tuple[int, int], ...]:
    try:
        sizes = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ValidationError(f"bad --resolutions value {text!r}; expected e.g. 64,128,256")
    return schedule_from_sizes(sizes, height, width)


def _print_step(event: RenderEvent) -> bool:
    if event.phase == "step":
        styles = " ".join(
            f"E_style[{name}]={value:.6g}" for name, value in event.report.style.items()
        )
        print(
            f"level {event.level + 1}/{event.level_count} "
            f"iter {event.iteration + 1}/{event.iteration_count} "
            f"E={event.report.total:.6g} E_content={event.report.content:.6g} {styles}",
            file=sys.stderr,
        )
    return True


def _cmd_render(args: argparse.Namespace) -> int:
    if args.serve:
        from .service import serve

        serve(port=args.port, weights=args.weights)
        return 0

    missing = [
        flag
        for flag, value in (
            ("--content", args.content), ("--style", args.style), ("--out", args.out)
        )
        if not value
    ]
    if missing:
        print(f"error: missing required {', '.join(missing)}", file=sys.stderr)
        return 2
    if (args.content_map is None) != (args.style_map is None):
        print(
            "error: --content-map and --style-map must be given together so "
            "both maps carry a matching channel count (M)",
            file=sys.stderr,
        )
        return 2

    try:
        net = (
            load_weights(Path(args.weights).read_bytes())
            if args.weights
            else default_extractor()
        )
        content = load_image(args.content)
        style = load_image(args.style)
        content_map = load_map(args.content_map) if args.content_map else None
        style_map = load_map(args.style_map) if args.style_map else None
        seed = args.seed if args.seed is not None else random.getrandbits(32)
        config = RenderConfig(
            content_weight=args.alpha,
            style_weight=args.beta,
            semantic_weight=None if args.gamma == "auto" else float(args.gamma),
            patch_size=args.patch_size,
            resolutions=(
                _parse_schedule(args.resolutions, content.shape[1], content.shape[2])
                if args.resolutions
                else None
            ),
            iterations=args.iters,
            seed=seed,
        )
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValidationError, ShapeError, WeightFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DoodleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    schedule = config.resolutions or "auto"
    print(
        f"render: alpha={config.content_weight:g} beta={config.style_weight:g} "
        f"gamma={args.gamma} patch_size={config.patch_size} "
        f"resolutions={schedule} iters={config.iterations} seed={seed}",
        file=sys.stderr,
    )
    try:
        out = render(content, content_map, style, style_map, net, config, callback=_print_step)
        save_png(out, args.out)
    except (ValidationError, ShapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DoodleError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def run_cli(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse prints usage itself
        return int(exc.code or 0)
    if args.command == "render":
        return _cmd_render(args)
    parser.print_usage(sys.stderr)
    return 2


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
