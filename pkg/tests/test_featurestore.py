import numpy as np

from eniqa.dataset import make_synthetic_corpus
from eniqa.features import FeatureConfig, extract_features
from eniqa.featurestore import FeatureCache, compute_features, image_features
from eniqa.imgio import load_image


def test_cache_and_parallel_agree(tmp_path):
    m = make_synthetic_corpus(tmp_path / "c", n_refs=2, size=40,
                              levels={"WN": (4.0,), "GBLUR": (2.0,)})
    cfg = FeatureConfig()
    direct = np.array([extract_features(load_image(p), cfg) for p in m.paths])
    F, t = compute_features(m.paths, cfg, tmp_path / "cache", return_times=True)
    assert F.tobytes() == direct.tobytes() and np.all(t > 0)
    F2, t2 = compute_features(m.paths, cfg, tmp_path / "cache", return_times=True)
    assert F2.tobytes() == direct.tobytes() and np.all(t2 == 0)
    F3 = compute_features(m.paths, cfg, None, jobs=2)
    assert F3.tobytes() == direct.tobytes()


def test_cache_keyed_by_config(tmp_path):
    m = make_synthetic_corpus(tmp_path / "c", n_refs=1, size=40,
                              levels={"WN": (4.0,), "GBLUR": (2.0,)})
    cache = FeatureCache(tmp_path / "cache")
    a, _ = image_features(m.paths[0], FeatureConfig((8, 8)), cache)
    b, secs = image_features(m.paths[0], FeatureConfig((4, 4)), cache)
    assert secs > 0 and not np.array_equal(a, b)
    assert not list((tmp_path / "cache").rglob("*.tmp"))
