"""On-disk cache of per-image feature vectors and batch extraction."""
from __future__ import annotations

import hashlib
import logging
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .features import N_FEATURES, FeatureConfig, extract_features
from .imgio import decode_image

__all__ = ["FeatureCache", "compute_features", "image_features"]

log = logging.getLogger(__name__)


class FeatureCache:
    """Feature vectors keyed by (sha256 of image bytes, feature config digest).

    Writes go to a temp file followed by an atomic rename, so concurrent
    readers never observe a partial entry.
    """

    def __init__(self, root):
        self.root = os.fspath(root)
        os.makedirs(self.root, exist_ok=True)

    def _path(self, image_hash: str, config: FeatureConfig) -> str:
        return os.path.join(self.root, config.digest(), image_hash[:2], image_hash + ".npy")

    def get(self, image_hash: str, config: FeatureConfig):
        p = self._path(image_hash, config)
        if not os.path.exists(p):
            return None
        v = np.load(p)
        if v.shape != (N_FEATURES,):
            return None
        return v

    def put(self, image_hash: str, config: FeatureConfig, vec) -> None:
        p = self._path(image_hash, config)
        os.makedirs(os.path.dirname(p), exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(p), suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                np.save(fh, np.asarray(vec, dtype=np.float64))
            os.replace(tmp, p)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def image_features(path, config: FeatureConfig, cache: FeatureCache | None = None):
    """Return ``(vector, seconds)``; seconds is 0 for cache hits."""
    with open(path, "rb") as fh:
        data = fh.read()
    key = hashlib.sha256(data).hexdigest()
    if cache is not None:
        v = cache.get(key, config)
        if v is not None:
            return v, 0.0
    t0 = time.perf_counter()
    v = extract_features(decode_image(data), config)
    elapsed = time.perf_counter() - t0
    if cache is not None:
        cache.put(key, config, v)
    return v, elapsed


def _worker(args):
    path, config, root = args
    cache = FeatureCache(root) if root else None
    return image_features(path, config, cache)


def compute_features(paths, config: FeatureConfig | None = None, cache_dir=None,
                     jobs: int = 1, return_times: bool = False):
    """Feature matrix for ``paths`` in input order."""
    config = config or FeatureConfig()
    paths = list(paths)
    args = [(p, config, os.fspath(cache_dir) if cache_dir else None) for p in paths]
    if jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_worker, args, chunksize=4))
    else:
        results = [_worker(a) for a in args]
    F = np.array([r[0] for r in results]).reshape(len(paths), N_FEATURES)
    times = np.array([r[1] for r in results])
    log.info("features for %d images (%d extracted)", len(paths), int(np.sum(times > 0)))
    return (F, times) if return_times else F
