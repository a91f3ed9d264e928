"""Deterministic synthetic images for the test suite."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def _blur_fft(noise, sigma):
    h, w = noise.shape
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    g = np.exp(-2.0 * (np.pi * sigma) ** 2 * (fx * fx + fy * fy))
    return np.real(np.fft.ifft2(np.fft.fft2(noise) * g))


def textured(h, w, seed=0):
    """Multi-scale smoothed noise rescaled to [0, 1]."""
    rng = np.random.default_rng(seed)
    img = np.zeros((h, w))
    for sigma, amp in [(1.5, 0.25), (3.0, 0.5), (6.0, 0.8), (12.0, 1.0)]:
        n = _blur_fft(rng.standard_normal((h, w)), sigma)
        img += amp * n / n.std()
    img -= img.min()
    img /= img.max()
    return img.astype(np.float32)


def smooth(h, w):
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    img = 0.5 + 0.2 * np.sin(2 * np.pi * x / 23.0) * np.cos(2 * np.pi * y / 31.0) + 0.1 * np.cos(2 * np.pi * (x + y) / 41.0)
    return img.astype(np.float32)


def gaussian_spot(h, w, cx, cy, sigma, amp=1.0, background=0.2):
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    return (background + amp * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * sigma**2))).astype(np.float32)


def random_blobs(h, w, seed, count=12):
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:h, 0:w].astype(np.float64)
    img = np.full((h, w), 0.3)
    for _ in range(count):
        cx, cy = rng.uniform(4, w - 4), rng.uniform(4, h - 4)
        s = rng.uniform(1.5, 6.0)
        a = rng.uniform(-0.4, 0.6)
        img += a * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * s * s))
    return img.astype(np.float32)


def brute_force_extrema(ldets, sigmas, threshold, windows):
    """All-pixel maximality scan with explicit window views.

    Returns a set of (level, y, x) for levels 1..N-2.
    """
    found = set()
    for i in range(1, len(ldets) - 1):
        cur = ldets[i].astype(np.float64)
        h, w = cur.shape
        half = windows[i] // 2
        ring = np.pad(cur, 1, constant_values=-np.inf)
        views = sliding_window_view(ring, (3, 3)).reshape(h, w, 9).copy()
        views[:, :, 4] = -np.inf
        spatial = views.max(axis=2)
        nb = []
        for j in (i - 1, i + 1):
            pad = np.pad(ldets[j].astype(np.float64), half, constant_values=-np.inf)
            nb.append(sliding_window_view(pad, (2 * half + 1, 2 * half + 1)).max(axis=(2, 3)))
        ok = (cur > threshold) & (cur > spatial) & (cur > nb[0]) & (cur > nb[1])
        ok[0, :] = ok[-1, :] = ok[:, 0] = ok[:, -1] = False
        for y, x in zip(*np.nonzero(ok)):
            found.add((i, int(y), int(x)))
    return found
