"""Two-stage quality model: distortion classifier + per-distortion regressors.

The predicted score is ``sum_d p_d * q_d`` where ``p`` are the classifier's
class probabilities and ``q_d`` the regressor output for distortion ``d``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .features import (MODEL_KINDS, N_FEATURES, FeatureConfig, extract_features,
                       feature_subset)
from .svm import (ScaleParams, SvcModel, SvmParams, TrainingError, apply_scaler,
                  fit_scaler, predict_proba, predict_svr, train_svc, train_svr)

__all__ = ["EniqaModel", "Prediction", "train_eniqa", "predict_features", "predict_score"]


@dataclass
class EniqaModel:
    scaler: ScaleParams
    classifier: SvcModel
    regressors: dict
    feature_config: FeatureConfig = field(default_factory=FeatureConfig)
    model_kind: str = "FULL"
    params: SvmParams = field(default_factory=SvmParams)

    def __post_init__(self):
        self.model_kind = self.model_kind.upper()
        if self.model_kind not in MODEL_KINDS:
            raise ValueError("unknown model kind %r" % self.model_kind)
        if set(self.regressors) != set(self.classifier.classes):
            raise ValueError("regressor labels %s do not match classifier classes %s"
                             % (sorted(self.regressors), sorted(self.classifier.classes)))
        sl = MODEL_KINDS[self.model_kind]
        if self.scaler.dim != sl.stop - sl.start:
            raise ValueError("scaler dimension %d does not fit model kind %s"
                             % (self.scaler.dim, self.model_kind))

    @property
    def classes(self) -> list:
        return list(self.classifier.classes)


@dataclass
class Prediction:
    score: float
    probs: dict
    per_class_scores: dict


def train_eniqa(features, labels, scores, params: SvmParams | None = None,
                model_kind: str = "FULL",
                feature_config: FeatureConfig | None = None) -> EniqaModel:
    """Fit scaler, classifier and one regressor per distortion label.

    ``features`` holds full 56-value rows; the subset for ``model_kind`` is
    taken here. Each regressor only sees the samples of its own label.
    """
    params = params or SvmParams()
    X = feature_subset(np.atleast_2d(np.asarray(features, dtype=np.float64)), model_kind)
    labels = [str(v) for v in labels]
    y = np.asarray(scores, dtype=np.float64)
    if not (len(X) == len(labels) == len(y)):
        raise TrainingError("features, labels and scores differ in length")
    classes = list(dict.fromkeys(labels))
    lab = np.array(labels, dtype=object)
    for c in classes:
        n = int(np.sum(lab == c))
        if n < 2:
            raise TrainingError("class %r has %d training sample(s); at least 2 are required"
                                % (c, n))
    if len(classes) < 2:
        raise TrainingError("need at least 2 distortion classes, got %s" % classes)
    scaler = fit_scaler(X)
    Xs = apply_scaler(scaler, X)
    svc = train_svc(Xs, labels, params.C, params.gamma, params.seed, params.tol)
    regs = {}
    for c in classes:
        m = lab == c
        regs[c] = train_svr(Xs[m], y[m], params.C, params.gamma, params.epsilon,
                            params.seed, params.tol)
    return EniqaModel(scaler, svc, regs, feature_config or FeatureConfig(),
                      model_kind.upper(), params)


def predict_features(model: EniqaModel, features):
    """Score precomputed 56-value feature rows.

    Returns ``(scores, probs, q)`` arrays of shape ``(n,)``, ``(n, k)`` and
    ``(n, k)``, columns following ``model.classes``.
    """
    F = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if F.shape[1] != N_FEATURES:
        raise ValueError("expected %d-value feature rows, got %d" % (N_FEATURES, F.shape[1]))
    Xs = apply_scaler(model.scaler, feature_subset(F, model.model_kind))
    probs = np.atleast_2d(predict_proba(model.classifier, Xs))
    q = np.stack([np.atleast_1d(predict_svr(model.regressors[c], Xs)) for c in model.classes],
                 axis=1)
    return np.sum(probs * q, axis=1), probs, q


def predict_score(model: EniqaModel, img) -> Prediction:
    """Quality score of one RGB image, with the per-class diagnostics."""
    v = extract_features(img, model.feature_config)
    scores, probs, q = predict_features(model, v)
    return Prediction(float(scores[0]),
                      dict(zip(model.classes, probs[0].tolist())),
                      dict(zip(model.classes, q[0].tolist())))
