"""Command-line front end.

Exit codes: 0 ok, 2 unreadable input, 3 image too small, 4 feature file
format/version mismatch, 5 bad flags.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from . import io
from .matcher import match
from .parallel import num_threads
from .pipeline import StageTimings, extract
from .scale_space import MIN_IMAGE_SIDE, ScaleSpaceOptions

EXIT_OK = 0
EXIT_DECODE = 2
EXIT_DIMENSIONS = 3
EXIT_FORMAT = 4
EXIT_FLAGS = 5

EXTREMA_FLAG = {"exact": "exact_sigma", "approx": "approx_3x3"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FLAGS, f"{self.prog}: error: {message}\n")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {text}")
    return v


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--octaves", type=_positive_int, default=4)
    p.add_argument("--sublevels", type=_positive_int, default=4)
    p.add_argument("--sigma0", type=float, default=1.6)
    p.add_argument("--diffusivity", choices=("g1", "g2"), default="g2")
    p.add_argument("--threshold", type=float, default=1e-3)
    p.add_argument("--edge-ratio", type=float, default=10.0)
    p.add_argument("--extrema", choices=tuple(EXTREMA_FLAG), default="exact")
    p.add_argument("--threads", type=_positive_int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kaze", description="KAZE feature detection, description and matching")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("detect", help="extract keypoints and descriptors into a feature file")
    p.add_argument("input")
    p.add_argument("--output", "-o", required=True)
    _add_pipeline_flags(p)

    p = sub.add_parser("match", help="match two feature files")
    p.add_argument("features_a")
    p.add_argument("features_b")
    p.add_argument("--ratio", type=float, default=0.8)

    p = sub.add_parser("bench", help="report median per-stage timings")
    p.add_argument("input")
    p.add_argument("--repeats", type=_positive_int, default=3)
    _add_pipeline_flags(p)

    p = sub.add_parser("draw", help="render keypoints over the input image")
    p.add_argument("input")
    p.add_argument("features")
    p.add_argument("--output", "-o", required=True)
    return parser


def _options(args) -> ScaleSpaceOptions:
    try:
        return ScaleSpaceOptions(
            num_octaves=args.octaves,
            num_sublevels=args.sublevels,
            base_sigma=args.sigma0,
            diffusivity=args.diffusivity,
            detector_threshold=args.threshold,
            edge_ratio=args.edge_ratio,
            extrema_window=EXTREMA_FLAG[args.extrema],
        )
    except ValueError as exc:
        raise CliError(EXIT_FLAGS, str(exc)) from exc


def _load_image(path) -> np.ndarray:
    try:
        pixels = io.load_pixels(path)
    except io.ImageDecodeError as exc:
        raise CliError(EXIT_DECODE, str(exc)) from exc
    if min(pixels.shape[:2]) < MIN_IMAGE_SIDE:
        h, w = pixels.shape[:2]
        raise CliError(EXIT_DIMENSIONS, f"{path}: {w}x{h} is below the {MIN_IMAGE_SIDE} px minimum")
    return pixels


def _load_features(path):
    try:
        return io.read_features(path)
    except OSError as exc:
        raise CliError(EXIT_DECODE, f"cannot read {path}: {exc}") from exc
    except io.FeatureFormatError as exc:
        raise CliError(EXIT_FORMAT, f"{path}: {exc}") from exc


def cmd_detect(args) -> int:
    opts = _options(args)
    gray = io.to_gray(_load_image(args.input))
    with num_threads(args.threads):
        feats = extract(gray, opts)
    io.write_features(args.output, feats.keypoints, feats.descriptors)
    print(f"keypoints={len(feats.keypoints)}", file=sys.stderr)
    return EXIT_OK


def cmd_match(args) -> int:
    if not 0 < args.ratio <= 1:
        raise CliError(EXIT_FLAGS, f"--ratio must lie in (0, 1], got {args.ratio}")
    _, da = _load_features(args.features_a)
    _, db = _load_features(args.features_b)
    matches = match(da, db, args.ratio)
    lines = [f"{m.index_a} {m.index_b} {m.distance:.9g}" for m in matches]
    lines.append(f"matches={len(matches)}")
    print("\n".join(lines))
    return EXIT_OK


def run_bench(gray: np.ndarray, opts: ScaleSpaceOptions, repeats: int, threads: int) -> StageTimings:
    with num_threads(threads):
        runs = [extract(gray, opts).timings for _ in range(repeats)]
    return StageTimings.median(runs)


def cmd_bench(args) -> int:
    opts = _options(args)
    gray = io.to_gray(_load_image(args.input))
    print("\n".join(run_bench(gray, opts, args.repeats, args.threads).as_lines()))
    return EXIT_OK


def draw_keypoints(pixels: np.ndarray, kps) -> Image.Image:
    """Circle of radius sigma plus an orientation tick per keypoint."""
    im = Image.fromarray(pixels)
    colour = 255 if im.mode == "L" else (255, 0, 0)
    pen = ImageDraw.Draw(im)
    for k in kps:
        r = k.sigma
        pen.ellipse([k.x - r, k.y - r, k.x + r, k.y + r], outline=colour)
        pen.line([k.x, k.y, k.x + r * math.cos(k.angle), k.y + r * math.sin(k.angle)], fill=colour)
    return im


def cmd_draw(args) -> int:
    pixels = _load_image(args.input)
    kps, _ = _load_features(args.features)
    draw_keypoints(pixels, kps).save(args.output, format="PNG")
    return EXIT_OK


COMMANDS = {"detect": cmd_detect, "match": cmd_match, "bench": cmd_bench, "draw": cmd_draw}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"kaze: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
