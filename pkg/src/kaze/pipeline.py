"""End-to-end extraction with per-stage wall-clock timing."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, fields

import numpy as np

from .descriptor import compute_descriptors
from .detector import KeyPoint, detect
from .image import as_image
from .parallel import get_num_threads
from .scale_space import ScaleSpaceOptions, build_scale_space


@dataclass
class StageTimings:
    scale_space_ms: float
    detection_ms: float
    description_ms: float
    total_ms: float
    image_width: int
    image_height: int
    keypoint_count: int
    thread_count: int

    def as_lines(self) -> list[str]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            out.append(f"{f.name}={v:.3f}" if isinstance(v, float) else f"{f.name}={v}")
        return out

    @staticmethod
    def median(runs: list["StageTimings"]) -> "StageTimings":
        first = runs[0]
        return StageTimings(
            statistics.median(r.scale_space_ms for r in runs),
            statistics.median(r.detection_ms for r in runs),
            statistics.median(r.description_ms for r in runs),
            statistics.median(r.total_ms for r in runs),
            first.image_width,
            first.image_height,
            first.keypoint_count,
            first.thread_count,
        )


@dataclass
class Features:
    keypoints: list[KeyPoint]
    descriptors: np.ndarray
    valid: np.ndarray
    timings: StageTimings


def extract(img, opts: ScaleSpaceOptions = ScaleSpaceOptions()) -> Features:
    """Scale space, detection and description of a grayscale image in [0, 1]."""
    img = as_image(img)
    t0 = time.perf_counter()
    levels = build_scale_space(img, opts)
    t1 = time.perf_counter()
    kps = detect(levels, opts)
    t2 = time.perf_counter()
    descs, valid = compute_descriptors(levels, kps)
    t3 = time.perf_counter()
    h, w = img.shape
    timings = StageTimings(
        (t1 - t0) * 1e3,
        (t2 - t1) * 1e3,
        (t3 - t2) * 1e3,
        (t3 - t0) * 1e3,
        w,
        h,
        len(kps),
        get_num_threads(),
    )
    return Features(kps, descs, valid, timings)
