"""Hessian-determinant keypoint detection over the nonlinear scale space."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .image import scharr_derivative
from .parallel import run_banded
from .scale_space import EvolutionLevel, ScaleSpaceOptions

SINGULAR_DET = 1e-12


@dataclass
class KeyPoint:
    x: float
    y: float
    sigma: float
    response: float
    level: int
    octave: int
    sublevel: int
    angle: float = 0.0


def derivative_step(sigma: float, shape: tuple[int, int]) -> int:
    """Integer Scharr dilation used for the derivatives of a level."""
    step = int(math.floor(sigma + 0.5))
    return max(1, min(step, min(shape) // 4))


def comparison_window(sigma: float, mode: str) -> int:
    """Side of the square searched in the neighbouring levels."""
    if mode == "approx_3x3":
        return 3
    side = max(3, int(math.floor(sigma + 0.5)))
    return side if side % 2 else side + 1


@nb.njit(nogil=True, cache=True)
def _det_rows(lxx, lyy, lxy, out, norm, y0, y1):
    w = lxx.shape[1]
    for y in range(y0, y1):
        for x in range(w):
            a = float(lxx[y, x])
            b = float(lyy[y, x])
            c = float(lxy[y, x])
            out[y, x] = norm * (a * b - c * c)


def hessian_response(level: EvolutionLevel, sigma_norm: int) -> np.ndarray:
    """Fill the level's derivative images and scale-normalized determinant."""
    step = int(sigma_norm)
    if step < 1:
        raise ValueError(f"derivative step must be >= 1, got {sigma_norm}")
    L = level.Lt
    level.Lx = scharr_derivative(L, 1, 0, step)
    level.Ly = scharr_derivative(L, 0, 1, step)
    level.Lxx = scharr_derivative(level.Lx, 1, 0, step)
    level.Lyy = scharr_derivative(level.Ly, 0, 1, step)
    level.Lxy = scharr_derivative(level.Lx, 0, 1, step)
    det = np.empty(L.shape, dtype=np.float32)
    run_banded(_det_rows, L.shape[0], level.Lxx, level.Lyy, level.Lxy, det, float(step) ** 4)
    level.Ldet = det
    level.deriv_step = step
    return det


@nb.njit(nogil=True, cache=True)
def _extrema_rows(prev, cur, nxt, threshold, half, mask, y0, y1):
    h, w = cur.shape
    for y in range(max(y0, 1), min(y1, h - 1)):
        for x in range(1, w - 1):
            v = cur[y, x]
            if not v > threshold:
                continue
            is_max = True
            for dy in range(-1, 2):
                for dx in range(-1, 2):
                    if (dy != 0 or dx != 0) and not v > cur[y + dy, x + dx]:
                        is_max = False
            if not is_max:
                continue
            ya, yb = max(0, y - half), min(h - 1, y + half)
            xa, xb = max(0, x - half), min(w - 1, x + half)
            for yy in range(ya, yb + 1):
                if not is_max:
                    break
                for xx in range(xa, xb + 1):
                    if not (v > prev[yy, xx] and v > nxt[yy, xx]):
                        is_max = False
                        break
            if is_max:
                mask[y, x] = 1


def find_extrema(levels: list[EvolutionLevel], opts: ScaleSpaceOptions = ScaleSpaceOptions()) -> list[KeyPoint]:
    """Integer-position scale-space maxima of the determinant response.

    The first and last levels only serve as comparison neighbours.
    """
    if len(levels) < 3:
        raise ValueError(f"need at least 3 evolution levels, got {len(levels)}")
    found = []
    for i in range(1, len(levels) - 1):
        lv = levels[i]
        side = comparison_window(lv.sigma, opts.extrema_window)
        mask = np.zeros(lv.Ldet.shape, dtype=np.uint8)
        run_banded(
            _extrema_rows,
            mask.shape[0],
            levels[i - 1].Ldet,
            lv.Ldet,
            levels[i + 1].Ldet,
            float(opts.detector_threshold),
            side // 2,
            mask,
        )
        for y, x in zip(*np.nonzero(mask)):
            found.append(
                KeyPoint(float(x), float(y), lv.sigma, float(lv.Ldet[y, x]), lv.index, lv.octave, lv.sublevel)
            )
    return found


def response_hessian(response: np.ndarray, x: int, y: int) -> tuple[float, float, float, float, float]:
    """Central-difference gradient and Hessian of a response map at ``(x, y)``.

    Returns ``(gx, gy, dxx, dyy, dxy)``.
    """
    p = response[y - 1 : y + 2, x - 1 : x + 2].astype(np.float64)
    gx = 0.5 * (p[1, 2] - p[1, 0])
    gy = 0.5 * (p[2, 1] - p[0, 1])
    dxx = p[1, 2] + p[1, 0] - 2.0 * p[1, 1]
    dyy = p[2, 1] + p[0, 1] - 2.0 * p[1, 1]
    dxy = 0.25 * (p[2, 2] - p[2, 0] - p[0, 2] + p[0, 0])
    return gx, gy, dxx, dyy, dxy


def passes_edge_test(dxx: float, dyy: float, dxy: float, r: float) -> bool:
    det = dxx * dyy - dxy * dxy
    if det <= 0:
        return False
    trace = dxx + dyy
    return trace * trace / det < (r + 1.0) ** 2 / r


def reject_edges(level: EvolutionLevel, p: tuple[int, int], r: float = 10.0) -> bool:
    """True when the candidate at ``p = (x, y)`` is blob-like and should be kept."""
    _, _, dxx, dyy, dxy = response_hessian(level.Ldet, int(p[0]), int(p[1]))
    return passes_edge_test(dxx, dyy, dxy, r)


def quadratic_offset(patch: np.ndarray) -> tuple[float, float] | None:
    """Peak offset of the quadratic through a 3x3 patch, or None when unusable."""
    gx, gy, dxx, dyy, dxy = response_hessian(np.asarray(patch), 1, 1)
    det = dxx * dyy - dxy * dxy
    if abs(det) < SINGULAR_DET:
        return None
    ox = -(dyy * gx - dxy * gy) / det
    oy = -(dxx * gy - dxy * gx) / det
    if abs(ox) > 1.0 or abs(oy) > 1.0:
        return None
    return ox, oy


def refine_subpixel(response: np.ndarray, p: tuple[int, int]) -> tuple[float, float] | None:
    x, y = int(p[0]), int(p[1])
    off = quadratic_offset(response[y - 1 : y + 2, x - 1 : x + 2])
    if off is None:
        return None
    return x + off[0], y + off[1]


def compute_responses(levels: list[EvolutionLevel]) -> None:
    for lv in levels:
        hessian_response(lv, derivative_step(lv.sigma, lv.Lt.shape))


def detect(levels: list[EvolutionLevel], opts: ScaleSpaceOptions = ScaleSpaceOptions()) -> list[KeyPoint]:
    """Responses, extrema, edge rejection and sub-pixel fit, strongest first."""
    compute_responses(levels)
    if len(levels) < 3:
        return []
    kept = []
    for kp in find_extrema(levels, opts):
        lv = levels[kp.level]
        p = (int(kp.x), int(kp.y))
        if not reject_edges(lv, p, opts.edge_ratio):
            continue
        refined = refine_subpixel(lv.Ldet, p)
        if refined is None:
            continue
        kp.x, kp.y = refined
        kept.append(kp)
    kept.sort(key=lambda k: (-k.response, k.level, k.y, k.x))
    return kept
