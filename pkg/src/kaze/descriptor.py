"""Dominant orientation and 64-dimensional M-SURF descriptors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .detector import KeyPoint, derivative_step, hessian_response
from .parallel import bands, get_num_threads, run_tasks
from .scale_space import EvolutionLevel

DESCRIPTOR_SIZE = 64
ORIENTATION_RADIUS = 6
ORIENTATION_WINDOWS = 42
ORIENTATION_SIGMA = 2.5
SEGMENT_HALF_WIDTH = math.pi / 6.0
PATTERN_SAMPLES = 24
SUBREGION_SAMPLES = 9
SUBREGION_STRIDE = 5
SAMPLE_SIGMA = 2.5
MASK_SIGMA = 1.5
TWO_PI = 2.0 * math.pi
KEYPOINTS_PER_TASK = 64


@dataclass
class Descriptor:
    values: np.ndarray
    keypoint_ref: int
    degenerate: bool = False


@nb.njit(inline="always")
def _read(img, fx, fy):
    h, w = img.shape
    x = int(math.floor(fx + 0.5))
    y = int(math.floor(fy + 0.5))
    x = min(max(x, 0), w - 1)
    y = min(max(y, 0), h - 1)
    return float(img[y, x])


@nb.njit(nogil=True, cache=True)
def _orientation(lx, ly, x, y, sigma):
    r = ORIENTATION_RADIUS
    n_max = (2 * r + 1) * (2 * r + 1)
    gx = np.empty(n_max)
    gy = np.empty(n_max)
    ang = np.empty(n_max)
    n = 0
    inv = 1.0 / (2.0 * ORIENTATION_SIGMA * ORIENTATION_SIGMA)
    for v in range(-r, r + 1):
        for u in range(-r, r + 1):
            d2 = u * u + v * v
            if d2 > r * r:
                continue
            wgt = math.exp(-d2 * inv)
            px = x + sigma * u
            py = y + sigma * v
            a = wgt * _read(lx, px, py)
            b = wgt * _read(ly, px, py)
            if a == 0.0 and b == 0.0:
                continue
            gx[n] = a
            gy[n] = b
            t = math.atan2(b, a)
            ang[n] = t + TWO_PI if t < 0.0 else t
            n += 1
    if n == 0:
        return 0.0, False
    best = -1.0
    bx = 0.0
    by = 0.0
    for k in range(ORIENTATION_WINDOWS):
        centre = k * TWO_PI / ORIENTATION_WINDOWS
        sx = 0.0
        sy = 0.0
        for m in range(n):
            d = (ang[m] - centre + math.pi) % TWO_PI - math.pi
            if abs(d) <= SEGMENT_HALF_WIDTH:
                sx += gx[m]
                sy += gy[m]
        mag = sx * sx + sy * sy
        if mag > best:
            best = mag
            bx = sx
            by = sy
    t = math.atan2(by, bx)
    if t < 0.0:
        t += TWO_PI
    if t >= TWO_PI:
        t -= TWO_PI
    return t, True


@nb.njit(nogil=True, cache=True)
def _msurf(lx, ly, x, y, sigma, angle, out):
    co = math.cos(angle)
    si = math.sin(angle)
    half = 0.5 * (PATTERN_SAMPLES - 1)
    inv1 = 1.0 / (2.0 * SAMPLE_SIGMA * SAMPLE_SIGMA)
    inv2 = 1.0 / (2.0 * MASK_SIGMA * MASK_SIGMA)
    sub_centre = 0.5 * (SUBREGION_SAMPLES - 1)
    for i in range(4):
        for j in range(4):
            v0 = i * SUBREGION_STRIDE - half
            u0 = j * SUBREGION_STRIDE - half
            cv = v0 + sub_centre
            cu = u0 + sub_centre
            dx = 0.0
            dy = 0.0
            mdx = 0.0
            mdy = 0.0
            for a in range(SUBREGION_SAMPLES):
                v = v0 + a
                for b in range(SUBREGION_SAMPLES):
                    u = u0 + b
                    px = x + sigma * (u * co - v * si)
                    py = y + sigma * (u * si + v * co)
                    gx = _read(lx, px, py)
                    gy = _read(ly, px, py)
                    wgt = math.exp(-((u - cu) ** 2 + (v - cv) ** 2) * inv1)
                    rx = wgt * (gx * co + gy * si)
                    ry = wgt * (-gx * si + gy * co)
                    dx += rx
                    dy += ry
                    mdx += abs(rx)
                    mdy += abs(ry)
            w2 = math.exp(-((i - 1.5) ** 2 + (j - 1.5) ** 2) * inv2)
            base = 4 * (4 * i + j)
            out[base] = w2 * dx
            out[base + 1] = w2 * dy
            out[base + 2] = w2 * mdx
            out[base + 3] = w2 * mdy
    norm = 0.0
    for k in range(out.shape[0]):
        norm += out[k] * out[k]
    norm = math.sqrt(norm)
    if norm == 0.0:
        return False
    for k in range(out.shape[0]):
        out[k] /= norm
    return True


@nb.njit(nogil=True, cache=True)
def _describe_batch(lx, ly, idx, xs, ys, sigmas, angles, descs, ok, with_orientation):
    buf = np.empty(DESCRIPTOR_SIZE)
    for m in range(idx.shape[0]):
        k = idx[m]
        good = True
        if with_orientation:
            a, good = _orientation(lx, ly, xs[k], ys[k], sigmas[k])
            angles[k] = a
        if good:
            good = _msurf(lx, ly, xs[k], ys[k], sigmas[k], angles[k], buf)
        if good:
            for c in range(DESCRIPTOR_SIZE):
                descs[k, c] = buf[c]
        else:
            descs[k, :] = 0.0
        ok[k] = good


def _ensure_derivatives(level: EvolutionLevel) -> None:
    if level.Lx is None or level.Ly is None:
        hessian_response(level, derivative_step(level.sigma, level.Lt.shape))


def dominant_orientation(level: EvolutionLevel, kp: KeyPoint) -> tuple[float, bool]:
    """Angle in [0, 2pi) of the strongest pi/3 gradient segment.

    The second value is False when every sample in the disc is zero; the
    angle is then 0.0 and the descriptor must be treated as degenerate.
    """
    _ensure_derivatives(level)
    return _orientation(level.Lx, level.Ly, float(kp.x), float(kp.y), float(kp.sigma))


def msurf_descriptor(level: EvolutionLevel, kp: KeyPoint) -> Descriptor:
    """M-SURF vector at ``kp`` using ``kp.angle`` as the reference direction."""
    _ensure_derivatives(level)
    buf = np.empty(DESCRIPTOR_SIZE)
    good = _msurf(level.Lx, level.Ly, float(kp.x), float(kp.y), float(kp.sigma), float(kp.angle), buf)
    values = buf.astype(np.float32) if good else np.zeros(DESCRIPTOR_SIZE, dtype=np.float32)
    return Descriptor(values, -1, not good)


def compute_descriptors(
    levels: list[EvolutionLevel], kps: list[KeyPoint], assign_orientation: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """Batched orientation + description.

    Returns an ``(N, 64)`` float32 array and a boolean array that is False for
    degenerate rows. Keypoint angles are updated in place.
    """
    n = len(kps)
    descs = np.zeros((n, DESCRIPTOR_SIZE), dtype=np.float64)
    ok = np.zeros(n, dtype=np.bool_)
    if n == 0:
        return descs.astype(np.float32), ok
    xs = np.array([k.x for k in kps], dtype=np.float64)
    ys = np.array([k.y for k in kps], dtype=np.float64)
    sigmas = np.array([k.sigma for k in kps], dtype=np.float64)
    angles = np.array([k.angle for k in kps], dtype=np.float64)
    level_of = np.array([k.level for k in kps], dtype=np.int64)

    tasks = []
    threads = get_num_threads()
    for li in np.unique(level_of):
        lv = levels[int(li)]
        _ensure_derivatives(lv)
        members = np.flatnonzero(level_of == li)
        parts = max(threads, -(-members.size // KEYPOINTS_PER_TASK)) if threads > 1 else 1
        for lo, hi in bands(members.size, parts):
            tasks.append((lv.Lx, lv.Ly, members[lo:hi], xs, ys, sigmas, angles, descs, ok, assign_orientation))
    run_tasks(_describe_batch, tasks)

    for k, a in zip(kps, angles):
        k.angle = float(a)
    return descs.astype(np.float32), ok


def describe(levels: list[EvolutionLevel], kps: list[KeyPoint]) -> list[Descriptor]:
    """Orientation then descriptor for every keypoint, aligned by index."""
    descs, ok = compute_descriptors(levels, kps)
    return [Descriptor(descs[i], i, not bool(ok[i])) for i in range(len(kps))]
