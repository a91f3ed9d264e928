"""Image decoding and the versioned text feature-file format.

Feature file layout::

    KAZEFEAT 1 <count>
    x y sigma response octave sublevel angle      (count lines)
    d0 d1 ... d63                                 (count lines)

Floats are written with 9 significant digits so a read/write cycle
reproduces the file byte for byte.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image

from .descriptor import DESCRIPTOR_SIZE
from .detector import KeyPoint

MAGIC = "KAZEFEAT"
VERSION = 1
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


class ImageDecodeError(Exception):
    pass


class FeatureFormatError(Exception):
    pass


def to_gray(pixels: np.ndarray) -> np.ndarray:
    """8-bit gray or RGB(A) pixels to float32 luminance in [0, 1]."""
    arr = np.asarray(pixels)
    if arr.ndim == 3:
        arr = arr[..., :3].astype(np.float64) @ LUMA_WEIGHTS
    return (arr.astype(np.float64) / 255.0).astype(np.float32)


def load_pixels(path) -> np.ndarray:
    """Decode a PGM/PNG into a uint8 array, either (H, W) or (H, W, 3)."""
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode not in ("L", "RGB"):
                im = im.convert("RGB")
            return np.array(im, dtype=np.uint8)
    except (OSError, SyntaxError, ValueError) as exc:
        raise ImageDecodeError(f"cannot decode {path}: {exc}") from exc


def load_gray(path) -> np.ndarray:
    return to_gray(load_pixels(path))


def _fmt(v: float) -> str:
    return format(float(v), ".9g")


def format_features(kps: list[KeyPoint], descs: np.ndarray) -> str:
    descs = np.asarray(descs, dtype=np.float32).reshape(-1, DESCRIPTOR_SIZE)
    if len(kps) != descs.shape[0]:
        raise ValueError(f"{len(kps)} keypoints but {descs.shape[0]} descriptors")
    lines = [f"{MAGIC} {VERSION} {len(kps)}"]
    for k in kps:
        lines.append(
            " ".join(
                [_fmt(k.x), _fmt(k.y), _fmt(k.sigma), _fmt(k.response), str(k.octave), str(k.sublevel), _fmt(k.angle)]
            )
        )
    for row in descs:
        lines.append(" ".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_features(path, kps: list[KeyPoint], descs: np.ndarray) -> None:
    Path(path).write_text(format_features(kps, descs))


def parse_features(text: str) -> tuple[list[KeyPoint], np.ndarray]:
    lines = text.splitlines()
    if not lines:
        raise FeatureFormatError("empty feature file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != MAGIC:
        raise FeatureFormatError(f"not a feature file (header {lines[0]!r})")
    if head[1] != str(VERSION):
        raise FeatureFormatError(f"unsupported feature file version {head[1]}, expected {VERSION}")
    try:
        n = int(head[2])
    except ValueError:
        raise FeatureFormatError(f"bad keypoint count {head[2]!r}") from None
    if n < 0 or len(lines) != 1 + 2 * n:
        raise FeatureFormatError(f"expected {1 + 2 * n} lines, found {len(lines)}")

    kps = []
    try:
        for line in lines[1 : 1 + n]:
            x, y, sigma, resp, octave, sub, angle = line.split()
            kps.append(KeyPoint(float(x), float(y), float(sigma), float(resp), -1, int(octave), int(sub), float(angle)))
        descs = np.array([[np.float32(v) for v in line.split()] for line in lines[1 + n :]], dtype=np.float32)
    except ValueError as exc:
        raise FeatureFormatError(f"malformed feature record: {exc}") from exc
    descs = descs.reshape(n, -1) if n else np.zeros((0, DESCRIPTOR_SIZE), dtype=np.float32)
    if descs.shape[1] != DESCRIPTOR_SIZE:
        raise FeatureFormatError(f"descriptor length {descs.shape[1]}, expected {DESCRIPTOR_SIZE}")
    return kps, descs


def read_features(path) -> tuple[list[KeyPoint], np.ndarray]:
    return parse_features(Path(path).read_text())
