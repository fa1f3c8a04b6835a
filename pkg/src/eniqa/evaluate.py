"""Correlation metrics and the train/test evaluation protocols.

PLCC and RMSE are measured after mapping predictions through the
five-parameter logistic

    f(z) = b1 * (1/2 - 1 / (1 + exp(b2 * (z - b3)))) + b4 * z + b5
"""
from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special, stats

from .dataset import DatasetManifest, split_by_reference
from .features import FeatureConfig
from .featurestore import compute_features, image_features
from .pipeline import predict_features, train_eniqa
from .svm import SvmParams

__all__ = [
    "MetricError",
    "ConfigError",
    "LogisticParams",
    "EvalConfig",
    "EvalReport",
    "TrialResult",
    "SweepRow",
    "srocc",
    "pearson",
    "logistic5",
    "fit_logistic5",
    "plcc_rmse",
    "confusion_matrix",
    "cross_validate",
    "cross_database",
    "window_sweep",
    "grid_search",
    "ALL",
]

log = logging.getLogger(__name__)

ALL = "ALL"
MIN_FIT_POINTS = 5


class MetricError(ValueError):
    """A correlation or fit is undefined for the given data."""


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- metrics


def _pair(a, b, min_len):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise MetricError("length mismatch: %d vs %d" % (a.size, b.size))
    if a.size < min_len:
        raise MetricError("need at least %d points, got %d" % (min_len, a.size))
    return a, b


def pearson(a, b) -> float:
    a, b = _pair(a, b, 2)
    da, db = a - a.mean(), b - b.mean()
    den = np.sqrt(np.dot(da, da) * np.dot(db, db))
    if den == 0:
        raise MetricError("correlation is undefined for a constant vector")
    return float(np.clip(np.dot(da, db) / den, -1.0, 1.0))


def srocc(a, b) -> float:
    """Spearman correlation: Pearson correlation of tie-averaged ranks."""
    a, b = _pair(a, b, 3)
    return pearson(stats.rankdata(a), stats.rankdata(b))


def logistic5(z, beta) -> np.ndarray:
    b1, b2, b3, b4, b5 = beta
    z = np.asarray(z, dtype=np.float64)
    # 1 / (1 + exp(t)) == expit(-t)
    return b1 * (0.5 - special.expit(-b2 * (z - b3))) + b4 * z + b5


@dataclass
class LogisticParams:
    beta: np.ndarray
    sse: float

    def __call__(self, z):
        return logistic5(z, self.beta)


def fit_logistic5(z, y, max_evals: int = 20000, xatol: float = 1e-8) -> LogisticParams:
    """Least-squares fit of the 5-parameter logistic by Nelder-Mead.

    Starts from ``(max(y)-min(y), 1/std(z), mean(z), 0, mean(y))`` and
    restarts once from the best vertex found. The initial simplex steps each
    parameter by its natural data scale; the default 5% (or 0.00025 for
    zeros) steps leave the linear term unexplored and stall on plateaus.
    """
    z, y = _pair(z, y, MIN_FIT_POINTS)
    sz = float(np.std(z))
    if sz == 0:
        raise MetricError("cannot fit a logistic to constant predictions")
    sy = float(np.std(y)) or 1.0
    x0 = np.array([y.max() - y.min(), 1.0 / sz, z.mean(), 0.0, y.mean()])
    steps = np.diag([max(y.max() - y.min(), sy), 1.0 / sz, sz, sy / sz, sy])

    def sse(beta):
        r = logistic5(z, beta) - y
        v = float(np.dot(r, r))
        return v if np.isfinite(v) else np.inf

    best_x, best_f = x0, sse(x0)
    start = x0
    for _ in range(2):
        opts = {"xatol": xatol, "fatol": np.inf, "maxfev": max_evals, "maxiter": max_evals,
                "initial_simplex": np.vstack([start, start + steps])}
        res = optimize.minimize(sse, start, method="Nelder-Mead", options=opts)
        if res.fun <= best_f:
            best_x, best_f = np.asarray(res.x, dtype=np.float64), float(res.fun)
        start = best_x
    return LogisticParams(best_x, best_f)


def plcc_rmse(z, y):
    """``(plcc, rmse, params)`` after logistic mapping of ``z`` onto ``y``."""
    z, y = _pair(z, y, MIN_FIT_POINTS)
    params = fit_logistic5(z, y)
    fz = params(z)
    rmse = float(np.sqrt(np.mean((fz - y) ** 2)))
    return pearson(fz, y), rmse, params


def _metrics(z, y) -> tuple:
    """(srocc, plcc, rmse), NaN where undefined for this subset."""
    try:
        s = srocc(z, y)
    except MetricError:
        return (np.nan, np.nan, np.nan), None
    try:
        p, r, params = plcc_rmse(z, y)
    except MetricError:
        return (s, np.nan, np.nan), None
    return (s, p, r), params


def confusion_matrix(true_labels, pred_labels, row_labels, col_labels=None):
    """Row-normalized confusion counts; rows without samples are NaN."""
    col_labels = list(col_labels or row_labels)
    ri = {c: i for i, c in enumerate(row_labels)}
    ci = {c: i for i, c in enumerate(col_labels)}
    counts = np.zeros((len(row_labels), len(col_labels)))
    for t, p in zip(true_labels, pred_labels):
        if t in ri:
            counts[ri[t], ci[p]] += 1
    totals = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(totals > 0, counts / np.where(totals > 0, totals, 1), np.nan)


# ---------------------------------------------------------------- protocols


@dataclass(frozen=True)
class EvalConfig:
    trials: int = 1000
    train_fraction: float = 0.8
    seed: int = 0
    params: SvmParams = field(default_factory=SvmParams)
    model_kind: str = "FULL"
    jobs: int = 1
    max_resample: int = 1000

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie strictly between 0 and 1 "
                              "(got %r); the test side would be empty" % self.train_fraction)

    def to_dict(self) -> dict:
        p = self.params
        return {"trials": self.trials, "train_fraction": self.train_fraction,
                "seed": self.seed, "C": p.C, "gamma": p.gamma, "epsilon": p.epsilon,
                "tol": p.tol, "model_kind": self.model_kind}


@dataclass
class TrialResult:
    trial: int
    metrics: dict
    accuracy: float
    confusion: np.ndarray
    train_refs: list
    test_refs: list
    resamples: int = 0
    logistic: LogisticParams | None = None
    test_indices: np.ndarray | None = None
    predicted: np.ndarray | None = None
    predicted_labels: list | None = None


@dataclass
class EvalReport:
    labels: list
    srocc: dict
    plcc: dict
    rmse: dict
    n_trials: int
    confusion: np.ndarray
    row_labels: list
    col_labels: list
    class_accuracy: dict
    median_accuracy: float
    logistic: LogisticParams | None
    config: dict
    score_polarity: str
    resampled: int = 0
    trials: list = field(default_factory=list)

    def to_text(self) -> str:
        out = io.StringIO()
        out.write("ENIQA evaluation report\n")
        for k, v in self.config.items():
            out.write("  %s: %s\n" % (k, v))
        out.write("  score_polarity: %s\n" % self.score_polarity)
        out.write("  trials: %d (resampled splits: %d)\n\n" % (self.n_trials, self.resampled))
        cols = list(self.labels) + [ALL]
        out.write("%-8s" % "" + "".join("%10s" % c for c in cols) + "\n")
        for name, d in (("SROCC", self.srocc), ("PLCC", self.plcc), ("RMSE", self.rmse)):
            out.write("%-8s" % name + "".join("%10.4f" % d.get(c, np.nan) for c in cols) + "\n")
        out.write("%-8s" % "Acc(%)" + "".join(
            "%10.4f" % (100 * self.class_accuracy.get(c, np.nan)) for c in cols) + "\n")
        out.write("\nmedian per-trial classification accuracy: %.4f\n" % self.median_accuracy)
        out.write("\nconfusion matrix (rows: true, cols: predicted)\n")
        out.write("%-8s" % "" + "".join("%10s" % c for c in self.col_labels) + "\n")
        for lab, row in zip(self.row_labels, self.confusion):
            out.write("%-8s" % lab + "".join("%10.4f" % v for v in row) + "\n")
        if self.logistic is not None:
            out.write("\nlogistic parameters (last overall fit): %s\n"
                      % " ".join(repr(float(b)) for b in self.logistic.beta))
        return out.getvalue()

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["label", "srocc", "plcc", "rmse", "accuracy"])
        for c in list(self.labels) + [ALL]:
            w.writerow([c, repr(self.srocc.get(c, np.nan)), repr(self.plcc.get(c, np.nan)),
                        repr(self.rmse.get(c, np.nan)),
                        repr(self.class_accuracy.get(c, np.nan))])
        return out.getvalue()

    def confusion_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["true"] + list(self.col_labels))
        for lab, row in zip(self.row_labels, self.confusion):
            w.writerow([lab] + [repr(float(v)) for v in row])
        return out.getvalue()

    def trials_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["trial", "label", "srocc", "plcc", "rmse", "accuracy"])
        for t in self.trials:
            for lab, (s, p, r) in t.metrics.items():
                w.writerow([t.trial, lab, repr(s), repr(p), repr(r), repr(t.accuracy)])
        return out.getvalue()


def _trial_seed(seed, purpose, trial, attempt=0) -> int:
    return int(np.random.SeedSequence([seed, purpose, trial, attempt]).generate_state(1)[0])


def _run_split(features, labels, scores, train_idx, test_idx, classes, eval_labels,
               params, model_kind):
    model = train_eniqa(features[train_idx], [labels[i] for i in train_idx],
                        scores[train_idx], params, model_kind)
    pred, probs, _ = predict_features(model, features[test_idx])
    pred_labels = [model.classes[i] for i in np.argmax(probs, axis=1)]
    true = [labels[i] for i in test_idx]
    y = scores[test_idx]
    metrics = {}
    tl = np.array(true, dtype=object)
    for c in eval_labels:
        m = tl == c
        metrics[c], _ = _metrics(pred[m], y[m]) if m.sum() >= MIN_FIT_POINTS \
            else ((np.nan, np.nan, np.nan), None)
    metrics[ALL], logistic = _metrics(pred, y)
    acc = float(np.mean([t == p for t, p in zip(true, pred_labels)]))
    conf = confusion_matrix(true, pred_labels, eval_labels, model.classes)
    return metrics, acc, conf, logistic, pred, pred_labels, model.classes


def _cv_trial(args):
    (trial, manifest, features, cfg) = args
    labels = manifest.label_list
    scores = manifest.scores
    classes = list(manifest.labels)
    for attempt in range(cfg.max_resample + 1):
        train_m, test_m = split_by_reference(manifest, cfg.train_fraction,
                                             _trial_seed(cfg.seed, 0, trial, attempt))
        counts = {c: 0 for c in classes}
        for r in train_m.records:
            counts[r.label] += 1
        if all(n >= 2 for n in counts.values()):
            break
        log.info("trial %d: split %d lacks training samples for %s; resampling", trial,
                 attempt, [c for c, n in counts.items() if n < 2])
    else:
        raise RuntimeError("trial %d: no valid split after %d attempts" % (trial, attempt + 1))
    train_refs = set(train_m.reference_ids)
    test_refs = set(test_m.reference_ids)
    if train_refs & test_refs:
        raise AssertionError("content separation violated: %s" % sorted(train_refs & test_refs))
    train_ids = set(train_m.paths)
    train_idx = np.array([i for i, r in enumerate(manifest.records) if r.path in train_ids])
    test_idx = np.array([i for i, r in enumerate(manifest.records) if r.path not in train_ids])
    params = SvmParams(cfg.params.C, cfg.params.gamma, cfg.params.epsilon, cfg.params.tol,
                       _trial_seed(cfg.seed, 1, trial))
    metrics, acc, conf, logistic, pred, pred_labels, model_classes = _run_split(
        features, labels, scores, train_idx, test_idx, classes, classes, params,
        cfg.model_kind)
    # columns follow first appearance in the training side; reorder to manifest order
    order = [model_classes.index(c) for c in classes]
    return TrialResult(trial, metrics, acc, conf[:, order], sorted(train_refs),
                       sorted(test_refs), attempt, logistic, test_idx, pred, pred_labels)


def _summarize(trials, labels, row_labels, col_labels, config, polarity) -> EvalReport:
    def med(label, k):
        vals = np.array([t.metrics[label][k] for t in trials if label in t.metrics])
        vals = vals[np.isfinite(vals)]
        return float(np.median(vals)) if vals.size else float("nan")

    keys = list(labels) + [ALL]
    conf_stack = np.array([t.confusion for t in trials])
    with np.errstate(invalid="ignore"):
        valid = np.isfinite(conf_stack)
        n_valid = valid.sum(axis=0)
        conf = np.where(n_valid > 0, np.where(valid, conf_stack, 0).sum(axis=0)
                        / np.maximum(n_valid, 1), np.nan)
    class_acc = {}
    for i, lab in enumerate(row_labels):
        j = col_labels.index(lab) if lab in col_labels else None
        class_acc[lab] = float(conf[i, j]) if j is not None else float("nan")
    finite = [v for v in class_acc.values() if np.isfinite(v)]
    class_acc[ALL] = float(np.mean(finite)) if finite else float("nan")
    return EvalReport(
        labels=list(labels),
        srocc={k: med(k, 0) for k in keys},
        plcc={k: med(k, 1) for k in keys},
        rmse={k: med(k, 2) for k in keys},
        n_trials=len(trials),
        confusion=conf,
        row_labels=list(row_labels),
        col_labels=list(col_labels),
        class_accuracy=class_acc,
        median_accuracy=float(np.median([t.accuracy for t in trials])),
        logistic=trials[-1].logistic,
        config=config,
        score_polarity=polarity,
        resampled=int(sum(t.resamples for t in trials)),
        trials=list(trials),
    )


def cross_validate(manifest: DatasetManifest, features, config: EvalConfig | None = None
                   ) -> EvalReport:
    """Repeated content-separated train/test evaluation; medians over trials.

    ``features`` is the ``(n, 56)`` matrix aligned with ``manifest.records``.
    """
    config = config or EvalConfig()
    F = np.asarray(features, dtype=np.float64)
    if len(F) != len(manifest):
        raise ConfigError("%d feature rows for %d manifest records" % (len(F), len(manifest)))
    args = [(t, manifest, F, config) for t in range(config.trials)]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as ex:
            trials = list(ex.map(_cv_trial, args))
    else:
        trials = [_cv_trial(a) for a in args]
    labels = list(manifest.labels)
    return _summarize(trials, labels, labels, labels, config.to_dict(), manifest.score_polarity)


def cross_database(train_manifest: DatasetManifest, train_features,
                   test_manifest: DatasetManifest, test_features, common_labels,
                   params: SvmParams | None = None, model_kind: str = "FULL") -> EvalReport:
    """Train on every training record, test on the shared distortion types.

    Scores are used as stored; when polarities differ (DMOS vs MOS) the
    reported SROCC/PLCC are negative for a good model.
    """
    params = params or SvmParams()
    common = list(dict.fromkeys(common_labels))
    if not common:
        raise ConfigError("empty set of common labels")
    for name, m in (("training", train_manifest), ("test", test_manifest)):
        missing = [c for c in common if c not in m.labels]
        if missing:
            raise ConfigError("labels %s are absent from the %s manifest" % (missing, name))
    Ftr = np.asarray(train_features, dtype=np.float64)
    Fte = np.asarray(test_features, dtype=np.float64)
    keep = [i for i, r in enumerate(test_manifest.records) if r.label in common]
    if not keep:
        raise ConfigError("no test records carry a common label")
    n_tr = len(train_manifest)
    F = np.vstack([Ftr, Fte[keep]])
    labels = train_manifest.label_list + [test_manifest.records[i].label for i in keep]
    scores = np.concatenate([train_manifest.scores, test_manifest.scores[keep]])
    train_idx = np.arange(n_tr)
    test_idx = np.arange(n_tr, n_tr + len(keep))
    metrics, acc, conf, logistic, pred, pred_labels, model_classes = _run_split(
        F, labels, scores, train_idx, test_idx, list(train_manifest.labels), common, params,
        model_kind)
    trial = TrialResult(0, metrics, acc, conf, sorted(train_manifest.reference_ids),
                        sorted(test_manifest.reference_ids), 0, logistic,
                        np.asarray(keep), pred, pred_labels)
    cfg = {"protocol": "cross-database", "C": params.C, "gamma": params.gamma,
           "epsilon": params.epsilon, "model_kind": model_kind,
           "common_labels": " ".join(common)}
    polarity = "train=%s test=%s" % (train_manifest.score_polarity, test_manifest.score_polarity)
    return _summarize([trial], common, common, model_classes, cfg, polarity)


@dataclass
class SweepRow:
    window: tuple
    srocc: float
    per_label: dict
    seconds_per_image: float


def window_sweep(manifest: DatasetManifest,
                 sizes=((6, 6), (8, 8), (12, 12), (16, 16), (32, 32)),
                 config: EvalConfig | None = None, feature_config: FeatureConfig | None = None,
                 cache_dir=None, timing_repeats: int = 3, jobs: int = 1) -> list:
    """Median SROCC and per-image extraction time for each window size.

    Timing re-extracts the first manifest image ``timing_repeats`` times
    (no cache) and reports the mean.
    """
    config = config or EvalConfig()
    base = feature_config or FeatureConfig()
    rows = []
    for size in sizes:
        fc = FeatureConfig(tuple(size), base.keep_fraction, base.log_gabor)
        F = compute_features(manifest.paths, fc, cache_dir, jobs=jobs)
        times = []
        for _ in range(max(1, timing_repeats)):
            t0 = time.perf_counter()
            image_features(manifest.paths[0], fc, None)
            times.append(time.perf_counter() - t0)
        rep = cross_validate(manifest, F, config)
        rows.append(SweepRow(tuple(size), rep.srocc[ALL],
                             {k: v for k, v in rep.srocc.items() if k != ALL},
                             float(np.mean(times))))
    return rows


def grid_search(manifest: DatasetManifest, features, Cs, gammas,
                config: EvalConfig | None = None) -> list:
    """Median overall SROCC for every (C, gamma); ``[(C, gamma, srocc, accuracy)]``."""
    config = config or EvalConfig()
    out = []
    for C in Cs:
        for g in gammas:
            p = SvmParams(float(C), float(g), config.params.epsilon, config.params.tol)
            cfg = EvalConfig(config.trials, config.train_fraction, config.seed, p,
                             config.model_kind, config.jobs, config.max_resample)
            rep = cross_validate(manifest, features, cfg)
            out.append((float(C), float(g), rep.srocc[ALL], rep.median_accuracy))
    return out
