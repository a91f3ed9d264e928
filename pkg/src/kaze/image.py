"""Raster helpers and separable filtering primitives.

Images are plain 2-D ``float32`` numpy arrays indexed ``[y, x]``. Filters use
correlation semantics: ``out[x] = sum_k taps[k] * img[x + (k - R) * spacing]``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numba as nb
import numpy as np

from .parallel import run_banded

SCHARR_DERIV = np.array([-1.0, 0.0, 1.0]) / 2.0
SCHARR_SMOOTH = np.array([3.0, 10.0, 3.0]) / 16.0


class BorderPolicy(enum.Enum):
    """How reads outside the raster are resolved.

    ``REPLICATE`` clamps to the nearest edge pixel. ``SYMMETRIC`` mirrors about
    the pixel edge (``c b a | a b c``); for symmetric smoothing kernels it keeps
    the image sum unchanged, which replicate only does for 3-tap kernels.
    """

    REPLICATE = 0
    SYMMETRIC = 1


@dataclass(frozen=True)
class SeparableKernel:
    row_taps: np.ndarray
    col_taps: np.ndarray
    tap_spacing: int = 1

    def __post_init__(self):
        for name in ("row_taps", "col_taps"):
            taps = np.asarray(getattr(self, name), dtype=np.float64)
            if taps.ndim != 1 or taps.size < 3 or taps.size % 2 == 0:
                raise ValueError(f"{name} must have odd length >= 3, got {taps.shape}")
            s = taps.sum()
            if abs(s - 1.0) > 1e-6 and abs(s) > 1e-6:
                raise ValueError(f"{name} must sum to 1 (smoothing) or 0 (derivative), got {s}")
            object.__setattr__(self, name, taps)
        if int(self.tap_spacing) < 1:
            raise ValueError(f"tap_spacing must be >= 1, got {self.tap_spacing}")
        object.__setattr__(self, "tap_spacing", int(self.tap_spacing))


def as_image(img) -> np.ndarray:
    """Validate and convert to a C-contiguous float32 raster."""
    arr = np.ascontiguousarray(img, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale image, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("image is empty")
    if not np.isfinite(arr).all():
        raise ValueError("image contains NaN or Inf")
    return arr


def gaussian_kernel(sigma: float, radius: int | None = None) -> SeparableKernel:
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if radius is None:
        radius = max(1, math.ceil(3.0 * sigma))
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = np.exp(-(x * x) / (2.0 * sigma * sigma))
    taps /= taps.sum()
    return SeparableKernel(taps, taps, 1)


def scharr_kernel(dx: int, dy: int, step: int = 1) -> SeparableKernel:
    """First-order Scharr kernel dilated to ``step`` pixels.

    The derivative taps are divided by ``step`` so a unit ramp gives exactly 1
    at every step size.
    """
    if (dx, dy) not in ((1, 0), (0, 1)):
        raise ValueError(f"exactly one of dx, dy must be 1, got dx={dx}, dy={dy}")
    step = int(step)
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    deriv = SCHARR_DERIV / step
    if dx:
        return SeparableKernel(deriv, SCHARR_SMOOTH, step)
    return SeparableKernel(SCHARR_SMOOTH, deriv, step)


@nb.njit(inline="always")
def _map_index(i, n, mode):
    if 0 <= i < n:
        return i
    if mode == 0:
        return 0 if i < 0 else n - 1
    period = 2 * n
    i = i % period
    if i >= n:
        i = period - 1 - i
    return i


@nb.njit(nogil=True, cache=True)
def _row_pass(src, dst, taps, spacing, mode, y0, y1):
    h, w = src.shape
    radius = taps.shape[0] // 2
    acc = np.empty(w, dtype=np.float64)
    for y in range(y0, y1):
        acc[:] = 0.0
        for k in range(taps.shape[0]):
            t = taps[k]
            off = (k - radius) * spacing
            lo = min(w, max(0, -off))
            hi = max(lo, min(w, w - off))
            for x in range(lo, hi):
                acc[x] += t * src[y, x + off]
            for x in range(0, lo):
                acc[x] += t * src[y, _map_index(x + off, w, mode)]
            for x in range(hi, w):
                acc[x] += t * src[y, _map_index(x + off, w, mode)]
        for x in range(w):
            dst[y, x] = acc[x]


@nb.njit(nogil=True, cache=True)
def _col_pass(src, dst, taps, spacing, mode, y0, y1):
    h, w = src.shape
    radius = taps.shape[0] // 2
    acc = np.empty(w, dtype=np.float64)
    for y in range(y0, y1):
        acc[:] = 0.0
        for k in range(taps.shape[0]):
            t = taps[k]
            row = _map_index(y + (k - radius) * spacing, h, mode)
            for x in range(w):
                acc[x] += t * src[row, x]
        for x in range(w):
            dst[y, x] = acc[x]


@nb.njit(nogil=True, cache=True)
def _stencil3_pass(src, dst, row_taps, col_taps, spacing, mode, y0, y1):
    # row-then-column 3-tap filtering fused into one 3x3 dilated stencil
    h, w = src.shape
    s = spacing
    k = np.empty((3, 3))
    for a in range(3):
        for b in range(3):
            k[a, b] = col_taps[a] * row_taps[b]
    k00, k01, k02 = k[0, 0], k[0, 1], k[0, 2]
    k10, k11, k12 = k[1, 0], k[1, 1], k[1, 2]
    k20, k21, k22 = k[2, 0], k[2, 1], k[2, 2]
    for y in range(y0, y1):
        r0 = src[_map_index(y - s, h, mode)]
        r1 = src[y]
        r2 = src[_map_index(y + s, h, mode)]
        for x in range(min(s, w)):
            xl = _map_index(x - s, w, mode)
            xr = _map_index(x + s, w, mode)
            dst[y, x] = (
                k00 * r0[xl] + k01 * r0[x] + k02 * r0[xr]
                + k10 * r1[xl] + k11 * r1[x] + k12 * r1[xr]
                + k20 * r2[xl] + k21 * r2[x] + k22 * r2[xr]
            )
        for x in range(s, w - s):
            dst[y, x] = (
                k00 * r0[x - s] + k01 * r0[x] + k02 * r0[x + s]
                + k10 * r1[x - s] + k11 * r1[x] + k12 * r1[x + s]
                + k20 * r2[x - s] + k21 * r2[x] + k22 * r2[x + s]
            )
        for x in range(max(s, w - s), w):
            xl = _map_index(x - s, w, mode)
            xr = _map_index(x + s, w, mode)
            dst[y, x] = (
                k00 * r0[xl] + k01 * r0[x] + k02 * r0[xr]
                + k10 * r1[xl] + k11 * r1[x] + k12 * r1[xr]
                + k20 * r2[xl] + k21 * r2[x] + k22 * r2[xr]
            )


def convolve_separable(
    img, kernel: SeparableKernel, border: BorderPolicy = BorderPolicy.REPLICATE
) -> np.ndarray:
    """Row pass then column pass, each accumulating in float64."""
    src = as_image(img)
    h, _ = src.shape
    out = np.empty(src.shape, dtype=np.float32)
    mode = BorderPolicy(border).value
    if kernel.row_taps.size == 3 and kernel.col_taps.size == 3:
        run_banded(_stencil3_pass, h, src, out, kernel.row_taps, kernel.col_taps, kernel.tap_spacing, mode)
        return out
    tmp = np.empty(src.shape, dtype=np.float32)
    run_banded(_row_pass, h, src, tmp, kernel.row_taps, kernel.tap_spacing, mode)
    run_banded(_col_pass, h, tmp, out, kernel.col_taps, kernel.tap_spacing, mode)
    return out


def gaussian_blur(img, sigma: float, border: BorderPolicy = BorderPolicy.SYMMETRIC) -> np.ndarray:
    return convolve_separable(img, gaussian_kernel(sigma), border)


def scharr_derivative(img, dx: int, dy: int, step: int = 1) -> np.ndarray:
    return convolve_separable(img, scharr_kernel(dx, dy, step), BorderPolicy.REPLICATE)
