import numpy as np
import pytest

import eniqa.pipeline as pipeline
from eniqa.features import FeatureConfig
from eniqa.pipeline import EniqaModel, predict_features, predict_score, train_eniqa
from eniqa.svm import SvmParams, TrainingError

LABELS = ["JP2K", "JPEG", "WN", "GBLUR", "FF"]


def live_like(rng, per_class=10):
    F = rng.normal(size=(5 * per_class, 56))
    for k in range(5):
        F[k * per_class:(k + 1) * per_class, 8 * k:8 * k + 8] += 4.0
    labels = np.repeat(LABELS, per_class).tolist()
    scores = rng.uniform(10, 90, len(labels))
    return F, labels, scores


@pytest.fixture(scope="module")
def model():
    F, labels, scores = live_like(np.random.default_rng(0))
    return train_eniqa(F, labels, scores, SvmParams(C=10.0, gamma=0.02))


def test_five_class_model(model):
    assert model.classes == LABELS
    assert set(model.regressors) == set(LABELS)
    assert model.scaler.dim == 56


def test_eniqa2_uses_36_dims():
    F, labels, scores = live_like(np.random.default_rng(1))
    m = train_eniqa(F, labels, scores, SvmParams(C=10.0, gamma=0.02), "ENIQA2")
    assert m.scaler.dim == 36
    assert m.classifier.dim == 36
    assert all(r.dim == 36 for r in m.regressors.values())
    s, p, q = predict_features(m, F[:3])
    assert s.shape == (3,) and p.shape == (3, 5)


def test_single_class_rejected():
    with pytest.raises(TrainingError):
        train_eniqa(np.zeros((4, 56)), ["WN"] * 4, np.arange(4.0))
    with pytest.raises(TrainingError, match="'FF'"):
        train_eniqa(np.random.default_rng(0).normal(size=(5, 56)),
                    ["WN", "WN", "FF", "JPEG", "JPEG"], np.arange(5.0))


def test_score_is_weighted_sum_and_convex(model):
    F = np.random.default_rng(2).normal(size=(200, 56)) * 2
    s, p, q = predict_features(model, F)
    np.testing.assert_allclose(s, np.sum(p * q, axis=1), rtol=0, atol=1e-12)
    assert np.all(q.min(axis=1) - 1e-9 <= s) and np.all(s <= q.max(axis=1) + 1e-9)
    np.testing.assert_allclose(p.sum(axis=1), 1, atol=1e-9)


def test_one_hot_and_uniform(model, monkeypatch):
    F = np.random.default_rng(3).normal(size=(4, 56))
    _, _, q = predict_features(model, F)

    def one_hot(m, X):
        out = np.zeros((len(X), 5))
        out[:, 2] = 1.0
        return out

    monkeypatch.setattr(pipeline, "predict_proba", one_hot)
    s, _, _ = predict_features(model, F)
    np.testing.assert_array_equal(s, q[:, 2])
    monkeypatch.setattr(pipeline, "predict_proba", lambda m, X: np.full((len(X), 5), 0.2))
    s, _, _ = predict_features(model, F)
    np.testing.assert_allclose(s, q.mean(axis=1), rtol=1e-15)


def test_predict_score_on_image(model):
    img = np.random.default_rng(4).integers(0, 256, (48, 64, 3), dtype=np.uint8)
    pred = predict_score(model, img)
    assert list(pred.probs) == LABELS and list(pred.per_class_scores) == LABELS
    assert abs(sum(pred.probs.values()) - 1) < 1e-9
    assert abs(pred.score - sum(pred.probs[c] * pred.per_class_scores[c] for c in LABELS)) \
        < 1e-9


def test_feature_width_checked(model):
    with pytest.raises(ValueError):
        predict_features(model, np.zeros((2, 36)))


def test_model_consistency_checks(model):
    regs = dict(model.regressors)
    regs.pop("FF")
    with pytest.raises(ValueError):
        EniqaModel(model.scaler, model.classifier, regs, FeatureConfig())
    with pytest.raises(ValueError):
        EniqaModel(model.scaler, model.classifier, model.regressors, FeatureConfig(),
                   "ENIQA3")
