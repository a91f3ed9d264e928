"""Nonlinear scale space built with Fast Explicit Diffusion (FED) cycles."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .image import as_image, gaussian_blur, scharr_derivative
from .parallel import run_banded

MIN_IMAGE_SIDE = 32
FALLBACK_CONTRAST = 0.03
CONDUCTIVITY_PRESMOOTH = 1.0

DIFFUSIVITIES = ("g1", "g2")
EXTREMA_WINDOWS = ("exact_sigma", "approx_3x3")


class DegenerateInputWarning(UserWarning):
    """The input carries no usable gradient information."""


@dataclass(frozen=True)
class ScaleSpaceOptions:
    num_octaves: int = 4
    num_sublevels: int = 4
    base_sigma: float = 1.6
    tau_max: float = 0.25
    diffusivity: str = "g2"
    k_percentile: float = 0.7
    k_histogram_bins: int = 300
    detector_threshold: float = 1e-3
    edge_ratio: float = 10.0
    extrema_window: str = "exact_sigma"

    def __post_init__(self):
        if self.num_octaves < 1 or self.num_sublevels < 1:
            raise ValueError("num_octaves and num_sublevels must be >= 1")
        if not self.base_sigma > 0:
            raise ValueError(f"base_sigma must be positive, got {self.base_sigma}")
        if not 0 < self.tau_max <= 0.25:
            raise ValueError(f"tau_max must lie in (0, 0.25], got {self.tau_max}")
        if self.diffusivity not in DIFFUSIVITIES:
            raise ValueError(f"diffusivity must be one of {DIFFUSIVITIES}, got {self.diffusivity!r}")
        if not 0 < self.k_percentile < 1:
            raise ValueError(f"k_percentile must lie in (0, 1), got {self.k_percentile}")
        if self.k_histogram_bins < 1:
            raise ValueError("k_histogram_bins must be >= 1")
        if self.edge_ratio <= 0:
            raise ValueError("edge_ratio must be positive")
        if self.extrema_window not in EXTREMA_WINDOWS:
            raise ValueError(f"extrema_window must be one of {EXTREMA_WINDOWS}, got {self.extrema_window!r}")


@dataclass
class EvolutionLevel:
    """One full-resolution level of the pyramid.

    ``Lt`` and ``Lsmooth`` come from the scale-space build; the derivative
    images, ``Ldet`` and ``deriv_step`` are filled in by the detector.
    """

    index: int
    octave: int
    sublevel: int
    sigma: float
    time: float
    Lt: np.ndarray
    Lsmooth: np.ndarray
    Lx: np.ndarray | None = None
    Ly: np.ndarray | None = None
    Lxx: np.ndarray | None = None
    Lyy: np.ndarray | None = None
    Lxy: np.ndarray | None = None
    Ldet: np.ndarray | None = None
    deriv_step: int = 0


@dataclass(frozen=True)
class FedCycle:
    n: int
    taus: np.ndarray = field(repr=False)
    total_time: float


def evolution_schedule(opts: ScaleSpaceOptions, shape: tuple[int, int] | None = None):
    """Return ``(octave, sublevel, sigma, time)`` tuples in increasing scale.

    With ``shape`` given, the tail whose sigma exceeds half the shorter image
    side is dropped.
    """
    limit = math.inf if shape is None else min(shape) / 2.0
    out = []
    for o in range(opts.num_octaves):
        for s in range(opts.num_sublevels):
            sigma = opts.base_sigma * 2.0 ** (o + s / opts.num_sublevels)
            if sigma > limit:
                return out
            out.append((o, s, sigma, 0.5 * sigma * sigma))
    return out


def gradient_histogram_k(magnitudes: np.ndarray, percentile: float, bins: int) -> float:
    """Upper edge of the histogram bin holding the requested quantile."""
    g = magnitudes[magnitudes > 0]
    if g.size == 0:
        return 0.0
    gmax = float(g.max())
    idx = np.minimum((g * (bins / gmax)).astype(np.int64), bins - 1)
    counts = np.bincount(idx, minlength=bins)
    target = percentile * g.size
    b = int(np.searchsorted(np.cumsum(counts), target, side="left"))
    return gmax * (b + 1) / bins


def estimate_contrast_k(img, opts: ScaleSpaceOptions = ScaleSpaceOptions()) -> float:
    """Contrast factor from the gradient-magnitude histogram of a smoothed image."""
    L = as_image(img)
    lx = scharr_derivative(L, 1, 0, 1).astype(np.float64)
    ly = scharr_derivative(L, 0, 1, 1).astype(np.float64)
    k = gradient_histogram_k(np.sqrt(lx * lx + ly * ly), opts.k_percentile, opts.k_histogram_bins)
    if k <= 0:
        warnings.warn(
            f"image has zero gradient everywhere; using contrast factor {FALLBACK_CONTRAST}",
            DegenerateInputWarning,
            stacklevel=2,
        )
        return FALLBACK_CONTRAST
    return k


@nb.njit(nogil=True, cache=True)
def _conductivity_rows(lx, ly, out, inv_k2, kind, y0, y1):
    w = lx.shape[1]
    for y in range(y0, y1):
        for x in range(w):
            a = float(lx[y, x])
            b = float(ly[y, x])
            r = (a * a + b * b) * inv_k2
            if kind == 1:
                out[y, x] = math.exp(-r)
            else:
                out[y, x] = 1.0 / (1.0 + r)


def conductivity(Lx, Ly, k: float, which: str = "g2") -> np.ndarray:
    """Perona-Malik diffusivity g(|grad L|) per pixel, values in (0, 1]."""
    if not k > 0:
        raise ValueError(f"contrast factor k must be positive, got {k}")
    if which not in DIFFUSIVITIES:
        raise ValueError(f"unknown diffusivity {which!r}")
    lx, ly = as_image(Lx), as_image(Ly)
    if lx.shape != ly.shape:
        raise ValueError(f"Lx and Ly shapes differ: {lx.shape} vs {ly.shape}")
    out = np.empty(lx.shape, dtype=np.float32)
    run_banded(_conductivity_rows, lx.shape[0], lx, ly, out, 1.0 / (k * k), 1 if which == "g1" else 2)
    return out


def fed_tau_steps(n: int, tau_max: float) -> np.ndarray:
    if n < 1:
        raise ValueError(f"FED cycle length must be >= 1, got {n}")
    if not tau_max > 0:
        raise ValueError(f"tau_max must be positive, got {tau_max}")
    j = np.arange(n, dtype=np.float64)
    c = np.cos(np.pi * (2.0 * j + 1.0) / (4.0 * n + 2.0))
    return tau_max / (2.0 * c * c)


def _is_prime(n: int) -> bool:
    return n >= 2 and all(n % d for d in range(2, math.isqrt(n) + 1))


def kappa_cycle_order(n: int) -> np.ndarray:
    """Step permutation that interleaves small and large FED steps.

    Applying a long cycle in increasing order lets round-off grow by many
    orders of magnitude before the cycle closes; visiting the steps along a
    kappa-cycle (kappa = n // 2, modulo the next prime above n) keeps the
    intermediate amplification bounded.
    """
    if n < 3:
        return np.arange(n)
    kappa = n // 2
    prime = n + 1
    while not _is_prime(prime):
        prime += 1
    order = []
    k = 0
    while len(order) < n:
        idx = ((k + 1) * kappa) % prime - 1
        k += 1
        if 0 <= idx < n:
            order.append(idx)
    return np.array(order)


def fed_cycle(total_time: float, tau_max: float, reorder: bool = True) -> FedCycle:
    """Shortest FED cycle reaching ``total_time``, rescaled to land on it exactly.

    ``taus`` is in application order; with ``reorder`` the steps follow
    :func:`kappa_cycle_order`, otherwise they increase monotonically.
    """
    if not total_time > 0:
        raise ValueError(f"total_time must be positive, got {total_time}")
    # the small offset keeps exact boundary cases from rounding up a step
    n = max(1, math.ceil(-0.5 + 0.5 * math.sqrt(1.0 + 12.0 * total_time / tau_max) - 1e-9))
    q = total_time / (tau_max * n * (n + 1) / 3.0)
    taus = fed_tau_steps(n, tau_max) * q
    if reorder:
        taus = taus[kappa_cycle_order(n)]
    return FedCycle(n, taus, float(total_time))


@nb.njit(nogil=True, cache=True)
def _fed_rows(L, c, out, tau, y0, y1):
    h, w = L.shape
    for y in range(y0, y1):
        for x in range(w):
            lp = float(L[y, x])
            cp = float(c[y, x])
            flux = 0.0
            if x > 0:
                flux += (cp + c[y, x - 1]) * (L[y, x - 1] - lp)
            if x < w - 1:
                flux += (cp + c[y, x + 1]) * (L[y, x + 1] - lp)
            if y > 0:
                flux += (cp + c[y - 1, x]) * (L[y - 1, x] - lp)
            if y < h - 1:
                flux += (cp + c[y + 1, x]) * (L[y + 1, x] - lp)
            out[y, x] = lp + tau * 0.5 * flux


def fed_step(L, c, tau: float) -> np.ndarray:
    """One explicit step of div(c grad L) with zero flux across the border."""
    L, c = as_image(L), as_image(c)
    if L.shape != c.shape:
        raise ValueError(f"image and conductivity shapes differ: {L.shape} vs {c.shape}")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    out = np.empty_like(L)
    run_banded(_fed_rows, L.shape[0], L, c, out, float(tau))
    return out


def build_scale_space(img, opts: ScaleSpaceOptions = ScaleSpaceOptions()) -> list[EvolutionLevel]:
    base = as_image(img)
    if min(base.shape) < MIN_IMAGE_SIDE:
        raise ValueError(f"image must be at least {MIN_IMAGE_SIDE} px on each side, got {base.shape[::-1]}")
    schedule = evolution_schedule(opts, base.shape)

    o, s, sigma, t = schedule[0]
    Lt = gaussian_blur(base, opts.base_sigma)
    k = estimate_contrast_k(Lt, opts)
    levels = [EvolutionLevel(0, o, s, sigma, t, Lt, Lt)]

    for i, (o, s, sigma, t) in enumerate(schedule[1:], start=1):
        prev = levels[-1]
        Lsmooth = gaussian_blur(prev.Lt, CONDUCTIVITY_PRESMOOTH)
        gx = scharr_derivative(Lsmooth, 1, 0, 1)
        gy = scharr_derivative(Lsmooth, 0, 1, 1)
        flow = conductivity(gx, gy, k, opts.diffusivity)
        Lt = prev.Lt
        for tau in fed_cycle(t - prev.time, opts.tau_max).taus:
            Lt = fed_step(Lt, flow, tau)
        levels.append(EvolutionLevel(i, o, s, sigma, t, Lt, Lsmooth))
    return levels
