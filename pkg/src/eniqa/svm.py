"""RBF-kernel support vector machines trained with SMO.

Provides one-vs-one C-SVC with Platt-scaled pairwise probabilities coupled
into class posteriors, and epsilon-SVR. Both share one dual solver that
uses maximal-violating-pair working-set selection without shrinking.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SvmParams",
    "ScaleParams",
    "BinarySvc",
    "SvcModel",
    "SvrModel",
    "TrainingError",
    "rbf_kernel",
    "rbf_matrix",
    "fit_scaler",
    "apply_scaler",
    "smo_solve",
    "train_svc",
    "decision_values",
    "predict_proba",
    "predict_label",
    "train_svr",
    "predict_svr",
    "couple_pairwise",
]

log = logging.getLogger(__name__)

TAU = 1e-12
GRAM_LIMIT = 4000
PROB_CLIP = 1e-7


class TrainingError(ValueError):
    """Training data does not satisfy the solver's preconditions."""


@dataclass(frozen=True)
class SvmParams:
    """Hyperparameters shared by the classifier and the regressors."""

    C: float = 1e-4
    gamma: float = 1e-4
    epsilon: float = 0.1
    tol: float = 1e-3
    seed: int = 0


# ---------------------------------------------------------------- kernel


def rbf_kernel(x, y, gamma: float) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("dimension mismatch: %s vs %s" % (x.shape, y.shape))
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    d = x - y
    return math.exp(-gamma * float(np.dot(d, d)))


def rbf_matrix(A, B, gamma: float) -> np.ndarray:
    """Kernel matrix ``K[i, j] = exp(-gamma * |A_i - B_j|^2)``."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise ValueError("dimension mismatch: %d vs %d" % (A.shape[1], B.shape[1]))
    sq = (np.einsum("ij,ij->i", A, A)[:, None] + np.einsum("ij,ij->i", B, B)[None, :]
          - 2.0 * (A @ B.T))
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


class _KernelRows:
    """Row access to the training Gram matrix; materialized when small."""

    def __init__(self, X, gamma):
        self.X = X
        self.gamma = gamma
        self.full = rbf_matrix(X, X, gamma) if len(X) <= GRAM_LIMIT else None
        self._cache = {}

    def row(self, i):
        if self.full is not None:
            return self.full[i]
        r = self._cache.get(i)
        if r is None:
            if len(self._cache) > 256:
                self._cache.clear()
            r = self._cache[i] = rbf_matrix(self.X[i:i + 1], self.X, self.gamma)[0]
        return r


# ---------------------------------------------------------------- scaling


@dataclass
class ScaleParams:
    """Per-column training range; columns are mapped linearly onto [-1, 1]."""

    mins: np.ndarray
    maxs: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.mins)


def fit_scaler(X) -> ScaleParams:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if len(X) < 1:
        raise ValueError("need at least one row")
    return ScaleParams(X.min(axis=0), X.max(axis=0))


def apply_scaler(params: ScaleParams, x) -> np.ndarray:
    """Scale without clipping; constant training columns map to 0."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.dim:
        raise ValueError("expected %d features, got %d" % (params.dim, x.shape[-1]))
    span = params.maxs - params.mins
    safe = np.where(span > 0, span, 1.0)
    out = -1.0 + 2.0 * (x - params.mins) / safe
    return np.where(span > 0, out, 0.0)


# ---------------------------------------------------------------- solver


@dataclass
class SmoResult:
    alpha: np.ndarray
    rho: float
    n_iter: int
    objective: list = field(default_factory=list)


def smo_solve(krow, y, p, C: float, tol: float = 1e-3, max_iter: int | None = None,
              trace: bool = False) -> SmoResult:
    """Minimize ``0.5 a'Qa + p'a`` s.t. ``y'a = 0``, ``0 <= a <= C``.

    ``Q[i, j] = y_i y_j k(i, j)`` where ``krow(i)`` returns the kernel row of
    variable ``i`` over all variables. Stops when the maximal KKT violation
    drops below ``tol``.
    """
    y = np.asarray(y, dtype=np.float64)
    l = len(y)
    alpha = np.zeros(l)
    G = np.asarray(p, dtype=np.float64).copy()
    pvec = G.copy()
    if max_iter is None:
        max_iter = max(100_000, 100 * l)
    pos = y > 0
    objective = []
    it = 0
    while it < max_iter:
        v = -y * G
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        vu = np.where(up, v, -np.inf)
        vl = np.where(low, v, np.inf)
        i = int(np.argmax(vu))
        j = int(np.argmin(vl))
        if vu[i] - vl[j] < tol:
            break
        ki = krow(i)
        kj = krow(j)
        Qi = y[i] * y * ki
        Qj = y[j] * y * kj
        ai, aj = alpha[i], alpha[j]
        if y[i] != y[j]:
            quad = ki[i] + kj[j] + 2.0 * Qi[j]
            if quad <= 0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ni, nj = ai + delta, aj + delta
            if diff > 0:
                if nj < 0:
                    nj, ni = 0.0, diff
            elif ni < 0:
                ni, nj = 0.0, -diff
            if diff > 0:
                if ni > C:
                    ni, nj = C, C - diff
            elif nj > C:
                nj, ni = C, C + diff
        else:
            quad = ki[i] + kj[j] - 2.0 * Qi[j]
            if quad <= 0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ni, nj = ai - delta, aj + delta
            if total > C:
                if ni > C:
                    ni, nj = C, total - C
            elif nj < 0:
                nj, ni = 0.0, total
            if total > C:
                if nj > C:
                    nj, ni = C, total - C
            elif ni < 0:
                ni, nj = 0.0, total
        alpha[i], alpha[j] = ni, nj
        G += Qi * (ni - ai) + Qj * (nj - aj)
        if trace:
            objective.append(0.5 * float(np.dot(alpha, G + pvec)))
        it += 1
    else:
        log.warning("SMO stopped at max_iter=%d before reaching tol=%g", max_iter, tol)
    return SmoResult(alpha, _rho(alpha, G, y, C), it, objective)


def _rho(alpha, G, y, C) -> float:
    yG = y * G
    at_ub = alpha >= C
    at_lb = alpha <= 0
    free = ~(at_ub | at_lb)
    if free.any():
        return float(np.mean(yG[free]))
    pos = y > 0
    ub_mask = (at_ub & ~pos) | (at_lb & pos)
    lb_mask = (at_ub & pos) | (at_lb & ~pos)
    ub = yG[ub_mask].min() if ub_mask.any() else np.inf
    lb = yG[lb_mask].max() if lb_mask.any() else -np.inf
    return float((ub + lb) / 2.0)


# ---------------------------------------------------------------- classification


@dataclass
class BinarySvc:
    """One-vs-one machine; class ``first`` is the positive side."""

    first: int
    second: int
    sv: np.ndarray
    coef: np.ndarray
    rho: float
    prob_a: float
    prob_b: float


@dataclass
class SvcModel:
    classes: list
    gamma: float
    C: float
    pairs: list

    @property
    def dim(self) -> int:
        return self.pairs[0].sv.shape[1]


def _train_binary(X, yb, C, gamma, tol):
    kr = _KernelRows(X, gamma)
    res = smo_solve(kr.row, yb, -np.ones(len(yb)), C, tol)
    mask = res.alpha > 0
    return X[mask].copy(), (yb * res.alpha)[mask], res.rho


def _binary_decision(sv, coef, rho, gamma, X) -> np.ndarray:
    if len(sv) == 0:
        return np.full(len(X), -rho)
    return rbf_matrix(X, sv, gamma) @ coef - rho


def _sigmoid_predict(dec, A, B):
    f = np.asarray(dec, dtype=np.float64) * A + B
    # 1 / (1 + exp(f)) without overflow
    out = np.empty_like(f)
    pos = f >= 0
    e = np.exp(-f[pos])
    out[pos] = e / (1.0 + e)
    out[~pos] = 1.0 / (1.0 + np.exp(f[~pos]))
    return out


def _sigmoid_train(dec, yb):
    """Platt's sigmoid via Newton's method with backtracking (Lin, Lin & Weng)."""
    dec = np.asarray(dec, dtype=np.float64)
    prior1 = int(np.sum(yb > 0))
    prior0 = len(yb) - prior1
    hi = (prior1 + 1.0) / (prior1 + 2.0)
    lo = 1.0 / (prior0 + 2.0)
    t = np.where(yb > 0, hi, lo)
    max_iter, min_step, sigma, eps = 100, 1e-10, 1e-12, 1e-5

    def objective(A, B):
        f = dec * A + B
        return float(np.sum(np.where(f >= 0, t * f + np.log1p(np.exp(-np.abs(f))),
                                     (t - 1.0) * f + np.log1p(np.exp(-np.abs(f))))))

    A, B = 0.0, math.log((prior0 + 1.0) / (prior1 + 1.0))
    fval = objective(A, B)
    for _ in range(max_iter):
        p = _sigmoid_predict(dec, A, B)
        q = 1.0 - p
        d2 = p * q
        h11 = sigma + np.dot(dec * dec, d2)
        h22 = sigma + d2.sum()
        h21 = np.dot(dec, d2)
        d1 = t - p
        g1 = np.dot(dec, d1)
        g2 = d1.sum()
        if abs(g1) < eps and abs(g2) < eps:
            break
        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB
        step = 1.0
        while step >= min_step:
            nA, nB = A + step * dA, B + step * dB
            nf = objective(nA, nB)
            if nf < fval + 1e-4 * step * gd:
                A, B, fval = nA, nB, nf
                break
            step /= 2.0
        if step < min_step:
            log.debug("Platt line search failed")
            break
    return float(A), float(B)


def _cv_decision_values(X, yb, C, gamma, tol, rng, n_folds=5):
    n = len(yb)
    perm = rng.permutation(n)
    dec = np.zeros(n)
    for k in range(n_folds):
        test = perm[k * n // n_folds:(k + 1) * n // n_folds]
        if len(test) == 0:
            continue
        train = np.concatenate([perm[:k * n // n_folds], perm[(k + 1) * n // n_folds:]])
        ytr = yb[train]
        npos = int(np.sum(ytr > 0))
        nneg = len(ytr) - npos
        if npos == 0 and nneg == 0:
            dec[test] = 0.0
        elif nneg == 0:
            dec[test] = 1.0
        elif npos == 0:
            dec[test] = -1.0
        else:
            sv, coef, rho = _train_binary(X[train], ytr, C, gamma, tol)
            dec[test] = _binary_decision(sv, coef, rho, gamma, X[test])
    return dec


def train_svc(X, labels, C: float = 1e-4, gamma: float = 1e-4, seed: int = 0,
              tol: float = 1e-3) -> SvcModel:
    """Train a probabilistic one-vs-one C-SVC.

    Classes keep their order of first appearance in ``labels``. Each pair's
    sigmoid is fitted on 5-fold cross-validated decision values, with the
    fold shuffle drawn from ``seed``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    labels = [str(v) for v in labels]
    if len(labels) != len(X):
        raise TrainingError("got %d labels for %d samples" % (len(labels), len(X)))
    classes = list(dict.fromkeys(labels))
    if len(classes) < 2:
        raise TrainingError("need at least 2 classes, got %s" % classes)
    lab = np.array(labels, dtype=object)
    idx = {c: np.flatnonzero(lab == c) for c in classes}
    for c in classes:
        if len(idx[c]) < 2:
            raise TrainingError("class %r has %d sample(s); at least 2 are required"
                                % (c, len(idx[c])))
    pairs = []
    for a in range(len(classes)):
        for b in range(a + 1, len(classes)):
            rows = np.concatenate([idx[classes[a]], idx[classes[b]]])
            Xp = X[rows]
            yb = np.concatenate([np.ones(len(idx[classes[a]])), -np.ones(len(idx[classes[b]]))])
            rng = np.random.default_rng([seed, len(pairs)])
            dec = _cv_decision_values(Xp, yb, C, gamma, tol, rng)
            prob_a, prob_b = _sigmoid_train(dec, yb)
            sv, coef, rho = _train_binary(Xp, yb, C, gamma, tol)
            pairs.append(BinarySvc(a, b, sv, coef, rho, prob_a, prob_b))
    return SvcModel(classes, float(gamma), float(C), pairs)


def decision_values(model: SvcModel, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return np.stack([_binary_decision(p.sv, p.coef, p.rho, model.gamma, X)
                     for p in model.pairs], axis=1)


def couple_pairwise(r: np.ndarray, tol: float = 1e-10, max_iter: int = 200) -> np.ndarray:
    """Class posteriors from pairwise ``r[i, j] = P(i | i or j)``.

    Fixed-point solver of Wu, Lin & Weng's second coupling method.
    """
    k = r.shape[0]
    if k == 2:
        return np.array([r[0, 1], r[1, 0]])
    Q = -r.T * r
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, np.sum(r.T ** 2, axis=1) - np.diag(r) ** 2)
    p = np.full(k, 1.0 / k)
    for _ in range(max_iter):
        Qp = Q @ p
        pQp = float(p @ Qp)
        if np.max(np.abs(Qp - pQp)) < tol:
            break
        for t in range(k):
            diff = (-Qp[t] + pQp) / Q[t, t]
            p[t] += diff
            pQp = (pQp + diff * (diff * Q[t, t] + 2.0 * Qp[t])) / (1.0 + diff) / (1.0 + diff)
            Qp = (Qp + diff * Q[t]) / (1.0 + diff)
            p /= 1.0 + diff
    else:
        log.debug("pairwise coupling hit max_iter=%d", max_iter)
    return p


def predict_proba(model: SvcModel, X) -> np.ndarray:
    """Class probabilities, columns ordered as ``model.classes``.

    A 1-D input returns a 1-D probability vector.
    """
    single = np.ndim(X) == 1
    dec = decision_values(model, X)
    k = len(model.classes)
    out = np.empty((len(dec), k))
    for n in range(len(dec)):
        r = np.zeros((k, k))
        for col, pr in enumerate(model.pairs):
            rij = float(_sigmoid_predict(dec[n, col:col + 1], pr.prob_a, pr.prob_b)[0])
            rij = min(max(rij, PROB_CLIP), 1.0 - PROB_CLIP)
            r[pr.first, pr.second] = rij
            r[pr.second, pr.first] = 1.0 - rij
        out[n] = couple_pairwise(r)
    return out[0] if single else out


def predict_label(model: SvcModel, X, method: str = "proba"):
    """Predicted class names.

    ``method="proba"`` takes the argmax of :func:`predict_proba`;
    ``method="vote"`` uses one-vs-one majority voting on the raw decision
    values (ties go to the earlier class), which does not depend on the
    fitted sigmoids.
    """
    X2 = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if method == "proba":
        idx = np.argmax(np.atleast_2d(predict_proba(model, X2)), axis=1)
    elif method == "vote":
        dec = decision_values(model, X2)
        votes = np.zeros((len(X2), len(model.classes)), dtype=np.int64)
        for col, pr in enumerate(model.pairs):
            win = np.where(dec[:, col] > 0, pr.first, pr.second)
            votes[np.arange(len(X2)), win] += 1
        idx = np.argmax(votes, axis=1)
    else:
        raise ValueError("unknown method %r" % (method,))
    labels = [model.classes[i] for i in idx]
    return labels[0] if np.ndim(X) == 1 else labels


# ---------------------------------------------------------------- regression


@dataclass
class SvrModel:
    sv: np.ndarray
    coef: np.ndarray
    rho: float
    gamma: float
    C: float
    epsilon: float

    @property
    def dim(self) -> int:
        return self.sv.shape[1]


def train_svr(X, y, C: float = 1e-4, gamma: float = 1e-4, epsilon: float = 0.1,
              seed: int = 0, tol: float = 1e-3) -> SvrModel:
    """epsilon-insensitive regression. ``seed`` is accepted for interface symmetry;
    the solver itself is deterministic."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    z = np.asarray(y, dtype=np.float64).ravel()
    n = len(z)
    if n < 2:
        raise TrainingError("need at least 2 samples")
    if len(X) != n:
        raise TrainingError("got %d targets for %d samples" % (n, len(X)))
    if epsilon < 0:
        raise TrainingError("epsilon must be >= 0")
    kr = _KernelRows(X, gamma)

    def krow(i):
        r = kr.row(i % n)
        return np.concatenate([r, r])

    ys = np.concatenate([np.ones(n), -np.ones(n)])
    p = np.concatenate([epsilon - z, epsilon + z])
    res = smo_solve(krow, ys, p, C, tol)
    coef = res.alpha[:n] - res.alpha[n:]
    mask = coef != 0
    return SvrModel(X[mask].copy(), coef[mask], res.rho, float(gamma), float(C), float(epsilon))


def predict_svr(model: SvrModel, X):
    single = np.ndim(X) == 1
    out = _binary_decision(model.sv, model.coef, model.rho, model.gamma,
                           np.atleast_2d(np.asarray(X, dtype=np.float64)))
    return float(out[0]) if single else out
