"""Dataset-free invariant checks run by ``eniqa selftest``."""
from __future__ import annotations

import sys

import numpy as np
from scipy import stats

from .entropy import entropy_1d, entropy_2d, mutual_info, neighbor_mean_map
from .evaluate import srocc
from .spectral import LogGaborParams, build_filter_bank
from .svm import predict_proba, train_svc


def _entropy_bounds(rng):
    for _ in range(50):
        a = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
        h = entropy_1d(a)
        if not 0.0 <= h <= min(8.0, np.log2(a.size)) + 1e-12:
            return False
        h2 = entropy_2d(a, neighbor_mean_map(a))
        if not h - 1e-12 <= h2 <= 2 * np.log2(256):
            return False
    return entropy_1d(np.zeros(64, np.uint8)) == 0.0


def _mi_symmetry(rng):
    for _ in range(50):
        a = rng.integers(0, 256, 200, dtype=np.uint8)
        b = rng.integers(0, 8, 200, dtype=np.uint8) + a // 2
        if abs(mutual_info(a, b) - mutual_info(b, a)) > 1e-12 or mutual_info(a, b) < 0:
            return False
    return True


def _filter_dc():
    bank = build_filter_bank(64, 48, LogGaborParams())
    return len(bank) == 8 and all(g[0, 0] == 0.0 and g.max() <= 1.0 for g in bank)


def _simplex(rng):
    X = np.vstack([rng.normal(-2, 1, (20, 3)), rng.normal(2, 1, (20, 3)),
                   rng.normal((2, -2, 0), 1, (20, 3))])
    y = ["a"] * 20 + ["b"] * 20 + ["c"] * 20
    m = train_svc(X, y, C=1.0, gamma=0.5, seed=0)
    P = predict_proba(m, rng.normal(0, 3, (500, 3)))
    return bool(np.all(P >= 0) and np.all(np.abs(P.sum(axis=1) - 1) <= 1e-9))


def _srocc_oracle(rng):
    for _ in range(100):
        n = int(rng.integers(5, 60))
        a = rng.integers(0, 10, n).astype(float)
        b = a + rng.normal(0, 3, n)
        ref = stats.spearmanr(a, b).statistic
        if abs(srocc(a, b) - ref) > 1e-12:
            return False
    return True


CHECKS = (
    ("entropy bounds", _entropy_bounds),
    ("mutual information symmetry", _mi_symmetry),
    ("log-Gabor DC gain", lambda rng: _filter_dc()),
    ("probability simplex", _simplex),
    ("SROCC vs tied-rank oracle", _srocc_oracle),
)


def run_selftest(out=sys.stdout, seed: int = 0) -> bool:
    ok = True
    for name, fn in CHECKS:
        try:
            passed = bool(fn(np.random.default_rng(seed)))
        except Exception as exc:  # noqa: BLE001
            passed = False
            name = "%s (%s)" % (name, exc)
        ok &= passed
        print("%-4s %s" % ("ok" if passed else "FAIL", name), file=out)
    return ok
