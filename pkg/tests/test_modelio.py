import numpy as np
import pytest

from eniqa.features import FeatureConfig
from eniqa.modelio import ModelFormatError, deserialize_model, load_model, save_model, \
    serialize_model
from eniqa.pipeline import predict_features, train_eniqa
from eniqa.spectral import LogGaborParams
from eniqa.svm import SvmParams, predict_proba, predict_svr, train_svc, train_svr

LABELS = ["JP2K", "JPEG", "WN", "GBLUR", "FF"]


@pytest.fixture(scope="module")
def svc():
    rng = np.random.default_rng(1)
    X = np.vstack([rng.normal((0, 0), 0.1, (20, 2)), rng.normal((3, 0), 0.1, (20, 2))])
    return train_svc(X, ["a"] * 20 + ["b"] * 20, C=1.0, gamma=1.0)


@pytest.fixture(scope="module")
def full_model():
    rng = np.random.default_rng(2)
    F = rng.normal(size=(60, 56)) + np.repeat(np.arange(5), 12)[:, None] * 0.5
    labels = np.repeat(LABELS, 12).tolist()
    scores = rng.uniform(0, 100, 60)
    cfg = FeatureConfig((6, 10), 0.7, LogGaborParams((4.0, 9.0), sigma_ratio=0.6))
    return train_eniqa(F, labels, scores, SvmParams(C=2.0, gamma=0.05, seed=4), "FULL", cfg)


def test_svc_round_trip_bit_exact(svc):
    back = deserialize_model(serialize_model(svc))
    probe = np.random.default_rng(3).normal(1.5, 2, (100, 2))
    assert predict_proba(back, probe).tobytes() == predict_proba(svc, probe).tobytes()
    assert back.classes == svc.classes


def test_svr_round_trip_bit_exact():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(30, 3))
    m = train_svr(X, X.sum(axis=1), C=3.0, gamma=0.2)
    back = deserialize_model(serialize_model(m))
    probe = rng.normal(size=(50, 3))
    assert predict_svr(back, probe).tobytes() == predict_svr(m, probe).tobytes()


def test_full_model_round_trip(full_model, tmp_path):
    p = tmp_path / "m.txt"
    save_model(p, full_model)
    back = load_model(p)
    assert back.feature_config == full_model.feature_config
    assert back.params == full_model.params
    assert back.classes == full_model.classes
    F = np.random.default_rng(6).normal(size=(40, 56))
    for a, b in zip(predict_features(back, F), predict_features(full_model, F)):
        assert a.tobytes() == b.tobytes()
    assert serialize_model(back) == serialize_model(full_model)


def test_config_is_echoed(full_model):
    text = serialize_model(full_model)
    assert "window 6 10" in text
    assert "keep_fraction 0.7" in text
    assert "center_wavelengths 4.0 9.0" in text


@pytest.mark.parametrize("text", ["", "\n\n", "hello\n"])
def test_missing_header(text):
    with pytest.raises(ModelFormatError, match="missing header"):
        deserialize_model(text)


def test_unknown_version(svc):
    text = serialize_model(svc).replace("ENIQA-MODEL v1", "ENIQA-MODEL v7", 1)
    with pytest.raises(ModelFormatError, match="v7"):
        deserialize_model(text)


def test_truncated_and_corrupt(full_model):
    lines = serialize_model(full_model).splitlines()
    with pytest.raises(ModelFormatError, match="truncated"):
        deserialize_model("\n".join(lines[:len(lines) // 2]))
    bad = list(lines)
    i = next(k for k, s in enumerate(bad) if s.startswith("dim "))
    bad[i] = "dim many"
    with pytest.raises(ModelFormatError, match="line %d" % (i + 1)):
        deserialize_model("\n".join(bad))


def test_rejects_unknown_object():
    with pytest.raises(TypeError):
        serialize_model(object())
