"""The 56-dimensional entropy feature vector.

Layout (1-based feature names)::

    f1-f6    MI between RGB channel pairs (RG, RB, GB), scale 1 then scale 2
    f7-f10   mean and skewness of patch TE of the gray image, per scale
    f11-f42  mean/skew of patch TE for the eight log-Gabor sub-bands, per scale
    f43-f54  MI between orientation aggregates (6 pairs), per scale
    f55-f56  MI between the two frequency aggregates, per scale
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from itertools import combinations

import numpy as np

from .entropy import block_entropy_2d, mutual_info, neighbor_mean_map
from .imgio import ImageSizeError, downsample_nn, to_grayscale
from .spectral import (LogGaborParams, apply_filter_bank, quantize_minmax,
                       spectral_residual_saliency)

__all__ = [
    "FeatureConfig",
    "FeatureError",
    "PatchGrid",
    "N_FEATURES",
    "GROUP_BOUNDARIES",
    "LAYOUT_VERSION",
    "MODEL_KINDS",
    "partition_patches",
    "select_salient_patches",
    "patch_te_stats",
    "extract_features",
    "feature_subset",
    "feature_names",
]

N_FEATURES = 56
GROUP_BOUNDARIES = (6, 10, 42, 54)
LAYOUT_VERSION = 1
MIN_SIDE = 32

MODEL_KINDS = {
    "FULL": slice(0, 56),
    "ENIQA1": slice(0, 6),
    "ENIQA2": slice(6, 42),
    "ENIQA3": slice(42, 56),
}

CHANNEL_PAIRS = ((0, 1), (0, 2), (1, 2))
ORIENT_PAIRS = tuple(combinations(range(4), 2))


class FeatureError(RuntimeError):
    """Feature extraction produced an invalid (non-finite) value."""


@dataclass(frozen=True)
class FeatureConfig:
    window: tuple = (8, 8)
    keep_fraction: float = 0.8
    log_gabor: LogGaborParams = field(default_factory=LogGaborParams)

    def __post_init__(self):
        k, l = (int(v) for v in self.window)
        if k < 2 or l < 2:
            raise ValueError("window sides must be >= 2, got %r" % (self.window,))
        object.__setattr__(self, "window", (k, l))
        if not 0.0 < self.keep_fraction <= 1.0:
            raise ValueError("keep_fraction must lie in (0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        d["log_gabor"]["center_wavelengths"] = list(self.log_gabor.center_wavelengths)
        d["log_gabor"]["orientations"] = list(self.log_gabor.orientations)
        d["layout_version"] = LAYOUT_VERSION
        return d

    def digest(self) -> str:
        """Stable hash of everything that influences the feature values."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class PatchGrid:
    window_k: int
    window_l: int
    origins: np.ndarray
    saliency_score: np.ndarray | None = None
    kept: np.ndarray | None = None

    def __len__(self):
        return len(self.origins)

    @property
    def kept_origins(self) -> np.ndarray:
        if self.kept is None:
            return self.origins
        return self.origins[self.kept]


def feature_names() -> list:
    return ["f%d" % i for i in range(1, N_FEATURES + 1)]


def partition_patches(width: int, height: int, k: int, l: int) -> PatchGrid:
    """Non-overlapping ``k`` (rows) x ``l`` (cols) tiling; partial strips are dropped."""
    if k < 2 or l < 2:
        raise ValueError("window sides must be >= 2")
    nr, nc = height // k, width // l
    if nr < 1 or nc < 1:
        raise ImageSizeError("a %dx%d image holds no %dx%d patch" % (width, height, l, k))
    ii, jj = np.meshgrid(np.arange(nr) * k, np.arange(nc) * l, indexing="ij")
    origins = np.stack([ii.ravel(), jj.ravel()], axis=1)
    return PatchGrid(k, l, origins)


def _keep_count(n: int, fraction: float) -> int:
    # round first so 0.8 * 10 style products do not ceil up on fp noise
    return max(1, min(n, math.ceil(round(fraction * n, 9))))


def select_salient_patches(grid: PatchGrid, saliency, keep_fraction: float = 0.8) -> PatchGrid:
    """Mark the ``ceil(keep_fraction * n)`` patches with highest mean saliency.

    Ties are resolved in favor of the earlier patch in raster order.
    """
    sal = np.asarray(saliency, dtype=np.float64)
    k, l = grid.window_k, grid.window_l
    o = grid.origins
    rr = o[:, 0, None, None] + np.arange(k)[None, :, None]
    cc = o[:, 1, None, None] + np.arange(l)[None, None, :]
    scores = sal[rr, cc].reshape(len(o), -1).mean(axis=1)
    order = np.argsort(-scores, kind="stable")
    kept = np.zeros(len(o), dtype=bool)
    kept[order[:_keep_count(len(o), keep_fraction)]] = True
    return PatchGrid(k, l, o, scores, kept)


def _mean_skew(values) -> tuple:
    v = np.asarray(values, dtype=np.float64)
    mean = float(v.mean())
    d = v - mean
    m2 = float(np.mean(d * d))
    if m2 < 1e-12:
        return mean, 0.0
    m3 = float(np.mean(d * d * d))
    return mean, m3 / m2 ** 1.5


def patch_te_stats(map8, nmm, grid: PatchGrid) -> tuple:
    """Mean and (population) skewness of TE over the kept patches."""
    origins = grid.kept_origins
    if len(origins) == 0:
        raise RuntimeError("no kept patches")
    te = block_entropy_2d(map8, nmm, origins, grid.window_k, grid.window_l)
    return _mean_skew(te)


def _scale_features(rgb: np.ndarray, config: FeatureConfig) -> tuple:
    """Per-group feature lists for one scale."""
    channels = [rgb[..., c] for c in range(3)]
    g1 = [mutual_info(channels[a], channels[b]) for a, b in CHANNEL_PAIRS]

    gray = to_grayscale(rgb)
    h, w = gray.shape
    k, l = config.window
    grid = select_salient_patches(partition_patches(w, h, k, l),
                                  spectral_residual_saliency(gray), config.keep_fraction)
    g2 = list(patch_te_stats(gray, neighbor_mean_map(gray), grid))

    bands = apply_filter_bank(gray, config.log_gabor)
    g3 = []
    for band in bands:
        g3.extend(patch_te_stats(band.quantized, neighbor_mean_map(band.quantized), grid))

    mags = [b.magnitude for b in bands]
    by_orient = [quantize_minmax(mags[o] + mags[4 + o]) for o in range(4)]
    g4 = [mutual_info(by_orient[a], by_orient[b]) for a, b in ORIENT_PAIRS]
    by_freq = [quantize_minmax(sum(mags[4 * f + o] for o in range(4))) for f in range(2)]
    g5 = [mutual_info(by_freq[0], by_freq[1])]
    return g1, g2, g3, g4, g5


def extract_features(img, config: FeatureConfig | None = None) -> np.ndarray:
    """Compute the 56-value feature vector of an ``(h, w, 3)`` uint8 image."""
    config = config or FeatureConfig()
    rgb = np.asarray(img)
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise ValueError("expected an (h, w, 3) uint8 image")
    h, w = rgb.shape[:2]
    if h < MIN_SIDE or w < MIN_SIDE:
        raise ImageSizeError("image is %dx%d; at least %dx%d is required"
                             % (w, h, MIN_SIDE, MIN_SIDE))
    half = downsample_nn(rgb, 2, min_size=MIN_SIDE // 2)
    s1 = _scale_features(rgb, config)
    s2 = _scale_features(half, config)
    values = []
    for group1, group2 in zip(s1, s2):
        values.extend(group1)
        values.extend(group2)
    vec = np.asarray(values, dtype=np.float64)
    if vec.shape != (N_FEATURES,):
        raise FeatureError("expected %d features, got %d" % (N_FEATURES, vec.size))
    bad = np.flatnonzero(~np.isfinite(vec))
    if bad.size:
        raise FeatureError("non-finite features: %s" % ", ".join("f%d" % (i + 1) for i in bad))
    return vec


def feature_subset(v, model_kind: str = "FULL") -> np.ndarray:
    """Columns used by a (possibly limited) model; works on vectors and matrices."""
    try:
        sl = MODEL_KINDS[model_kind.upper()]
    except KeyError:
        raise ValueError("unknown model kind %r" % (model_kind,)) from None
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != N_FEATURES:
        raise ValueError("expected %d features, got %d" % (N_FEATURES, v.shape[-1]))
    return v[..., sl]
