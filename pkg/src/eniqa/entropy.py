"""Shannon entropies and mutual information over 8-bit maps (base 2)."""
from __future__ import annotations

import numpy as np

__all__ = [
    "entropy_1d",
    "entropy_2d",
    "joint_entropy",
    "mutual_info",
    "neighbor_mean_map",
    "block_entropy_2d",
    "joint_histogram",
]

_MI_CLAMP = 1e-9


def _entropy_from_counts(counts: np.ndarray, total: int) -> float:
    c = counts[counts > 0].astype(np.float64)
    p = c / total
    return float(-np.sum(p * np.log2(p)))


def _as_u8(values, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.size == 0:
        raise ValueError("%s must be nonempty" % name)
    if arr.dtype != np.uint8:
        if np.any(arr < 0) or np.any(arr > 255) or np.any(arr != np.round(arr)):
            raise ValueError("%s must hold integers in [0, 255]" % name)
        arr = arr.astype(np.uint8)
    return arr.ravel()


def entropy_1d(values) -> float:
    """Entropy in bits of the empirical gray-level distribution of ``values``."""
    v = _as_u8(values, "values")
    return _entropy_from_counts(np.bincount(v, minlength=256), v.size)


def joint_histogram(a, b) -> np.ndarray:
    """256x256 table of pair counts ``(a_i, b_i)``."""
    x = _as_u8(a, "a")
    y = _as_u8(b, "b")
    if x.size != y.size:
        raise ValueError("length mismatch: %d vs %d" % (x.size, y.size))
    codes = x.astype(np.int64) * 256 + y
    return np.bincount(codes, minlength=65536).reshape(256, 256)


def entropy_2d(pixels, neighbor_means) -> float:
    """Entropy of the joint distribution of (pixel, neighborhood mean) pairs."""
    counts = joint_histogram(pixels, neighbor_means)
    return _entropy_from_counts(counts.ravel(), int(np.asarray(pixels).size))


def _check_same_shape(a, b) -> None:
    if np.shape(a) != np.shape(b):
        raise ValueError("dimension mismatch: %s vs %s" % (np.shape(a), np.shape(b)))


def joint_entropy(a, b) -> float:
    _check_same_shape(a, b)
    return entropy_2d(a, b)


def mutual_info(a, b) -> float:
    """I(A;B) = H(A) + H(B) - H(A,B); float residue below 1e-9 is clamped to 0."""
    _check_same_shape(a, b)
    mi = entropy_1d(a) + entropy_1d(b) - joint_entropy(a, b)
    if mi < 0 and mi > -_MI_CLAMP:
        return 0.0
    return mi


def neighbor_mean_map(gray) -> np.ndarray:
    """Rounded mean of the eight neighbors of every pixel.

    Borders use clamped (edge-replicated) coordinates. The sum of eight
    uint8 values is integral, so ``(s + 4) // 8`` is exactly the mean
    rounded half away from zero.
    """
    g = np.asarray(gray)
    if g.ndim != 2:
        raise ValueError("expected a 2-D gray map, got shape %s" % (g.shape,))
    if g.shape[0] < 3 or g.shape[1] < 3:
        raise ValueError("image must be at least 3x3, got %dx%d" % (g.shape[1], g.shape[0]))
    p = np.pad(g.astype(np.int32), 1, mode="edge")
    h, w = g.shape
    s = np.zeros((h, w), dtype=np.int32)
    for dy in (0, 1, 2):
        for dx in (0, 1, 2):
            if dy == 1 and dx == 1:
                continue
            s += p[dy:dy + h, dx:dx + w]
    return ((s + 4) // 8).astype(np.uint8)


def block_entropy_2d(map8, nmm, origins, k: int, l: int) -> np.ndarray:
    """Two-dimensional entropy of many ``k`` x ``l`` blocks at once.

    ``origins`` is an ``(n, 2)`` array of (row, col) block corners; the
    pixel and neighbor-mean values of each block are read from the
    full-size maps.
    """
    origins = np.asarray(origins, dtype=np.intp).reshape(-1, 2)
    n = len(origins)
    if n == 0:
        return np.zeros(0)
    rr = origins[:, 0, None, None] + np.arange(k)[None, :, None]
    cc = origins[:, 1, None, None] + np.arange(l)[None, None, :]
    x1 = np.asarray(map8)[rr, cc].reshape(n, -1).astype(np.int64)
    x2 = np.asarray(nmm)[rr, cc].reshape(n, -1).astype(np.int64)
    keys = np.arange(n, dtype=np.int64)[:, None] * 65536 + x1 * 256 + x2
    uniq, counts = np.unique(keys.ravel(), return_counts=True)
    p = counts / float(k * l)
    terms = -p * np.log2(p)
    return np.bincount(uniq // 65536, weights=terms, minlength=n)
