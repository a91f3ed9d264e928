"""Brute-force L2 matching with a ratio test and mutual cross-check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .descriptor import DESCRIPTOR_SIZE, Descriptor

ROW_CHUNK = 1024


@dataclass(frozen=True)
class Match:
    index_a: int
    index_b: int
    distance: float


def as_matrix(descs) -> tuple[np.ndarray, np.ndarray]:
    """Stack descriptors into a float64 matrix plus a usable-row mask.

    Degenerate descriptors and all-zero rows are masked out.
    """
    if isinstance(descs, np.ndarray):
        mat = np.asarray(descs, dtype=np.float64).reshape(-1, DESCRIPTOR_SIZE)
        usable = np.any(mat != 0, axis=1)
        return mat, usable
    descs = list(descs)
    if not descs:
        return np.zeros((0, DESCRIPTOR_SIZE)), np.zeros(0, dtype=bool)
    mat = np.stack([np.asarray(d.values, dtype=np.float64) for d in descs])
    usable = np.array([not d.degenerate for d in descs]) & np.any(mat != 0, axis=1)
    return mat, usable


def _squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty((a.shape[0], b.shape[0]))
    bb = np.einsum("ij,ij->i", b, b)
    for lo in range(0, a.shape[0], ROW_CHUNK):
        blk = a[lo : lo + ROW_CHUNK]
        d = np.einsum("ij,ij->i", blk, blk)[:, None] + bb[None, :] - 2.0 * blk @ b.T
        out[lo : lo + ROW_CHUNK] = np.maximum(d, 0.0)
    return out


def match(
    desc_a: list[Descriptor] | np.ndarray,
    desc_b: list[Descriptor] | np.ndarray,
    ratio: float = 0.8,
    cross_check: bool = True,
) -> list[Match]:
    """Nearest-neighbour matches from ``desc_a`` into ``desc_b``.

    A pair survives when its distance is below ``ratio`` times the distance to
    the second-nearest candidate and, with ``cross_check``, when it is also the
    nearest in the reverse direction. Ties go to the lower index.
    """
    if not 0 < ratio <= 1:
        raise ValueError(f"ratio must lie in (0, 1], got {ratio}")
    a, ua = as_matrix(desc_a)
    b, ub = as_matrix(desc_b)
    ia, ib = np.flatnonzero(ua), np.flatnonzero(ub)
    if ia.size == 0 or ib.size == 0:
        return []

    d2 = _squared_distances(a[ia], b[ib])
    best = np.argmin(d2, axis=1)
    d_best = np.sqrt(d2[np.arange(ia.size), best])
    if ib.size > 1:
        masked = d2.copy()
        masked[np.arange(ia.size), best] = np.inf
        d_second = np.sqrt(masked.min(axis=1))
    else:
        d_second = np.full(ia.size, np.inf)
    reverse = np.argmin(d2, axis=0) if cross_check else None

    out = []
    for row in range(ia.size):
        col = int(best[row])
        if not d_best[row] < ratio * d_second[row]:
            continue
        if cross_check and reverse[col] != row:
            continue
        i, j = int(ia[row]), int(ib[col])
        out.append(Match(i, j, float(np.linalg.norm(a[i] - b[j]))))
    return out
