import math

import numpy as np
import pytest
from scipy import optimize

from eniqa.svm import (ScaleParams, SvmParams, TrainingError, _KernelRows, _sigmoid_predict,
                       _sigmoid_train, apply_scaler, couple_pairwise, decision_values,
                       fit_scaler, predict_label, predict_proba, predict_svr, rbf_kernel,
                       rbf_matrix, smo_solve, train_svc, train_svr)


def blobs(rng, n=30, sigma=0.1, sep=3.0):
    a = rng.normal((0, 0), sigma, (n, 2))
    b = rng.normal((sep, 0), sigma, (n, 2))
    return np.vstack([a, b]), ["left"] * n + ["right"] * n


def three_class(rng, n=25):
    X = np.vstack([rng.normal(c, 0.7, (n, 2)) for c in [(0, 0), (3, 0), (0, 3)]])
    return X, ["a"] * n + ["b"] * n + ["c"] * n


@pytest.fixture(scope="module")
def model3():
    X, y = three_class(np.random.default_rng(7))
    return train_svc(X, y, C=1.0, gamma=0.5, seed=3)


def test_rbf_examples():
    x = np.array([1.0, -2.0, 0.5])
    assert rbf_kernel(x, x, 3.0) == 1.0
    y = x + np.array([math.sqrt(math.log(2)), 0, 0])
    assert abs(rbf_kernel(x, y, 1.0) - 0.5) < 1e-12
    v = rbf_kernel(x, x + 1, 200.0)
    assert 0.0 < v < 1e-200
    A = np.random.default_rng(0).normal(size=(5, 3))
    K = rbf_matrix(A, A, 0.7)
    ref = np.array([[math.exp(-0.7 * np.sum((a - b) ** 2)) for b in A] for a in A])
    np.testing.assert_allclose(K, ref, rtol=1e-13, atol=1e-15)


def test_scaler_examples():
    X = np.array([[0.0, 5.0, 2.0], [10.0, 5.0, 4.0]])
    s = fit_scaler(X)
    np.testing.assert_array_equal(apply_scaler(s, X), [[-1, 0, -1], [1, 0, 1]])
    assert apply_scaler(s, np.array([5.0, 1.0, 3.0])).tolist() == [0, 0, 0]
    # no clipping outside the training range
    assert apply_scaler(s, np.array([20.0, 9.0, 0.0])).tolist() == [3, 0, -3]
    with pytest.raises(ValueError):
        apply_scaler(ScaleParams(np.zeros(2), np.ones(2)), np.zeros(3))


def test_two_blobs_separable(rng):
    X, y = blobs(rng)
    m = train_svc(X, y, C=1.0, gamma=1.0)
    assert predict_label(m, X) == y
    assert predict_label(m, np.array([0.0, 0.0])) == "left"
    assert predict_label(m, np.array([3.0, 0.0])) == "right"
    p = predict_proba(m, X)
    assert np.all(p[np.arange(len(y)), [0 if c == "left" else 1 for c in y]] > 0.5)


def test_duplicated_samples_same_labels(rng):
    X, y = blobs(rng)
    m1 = train_svc(X, y, C=1.0, gamma=1.0)
    m2 = train_svc(np.vstack([X, X]), y + y, C=1.0, gamma=1.0)
    g = np.stack(np.meshgrid(np.linspace(-1, 4, 10), np.linspace(-2, 2, 10)), -1).reshape(-1, 2)
    np.testing.assert_allclose(decision_values(m1, g), decision_values(m2, g), atol=1e-9)
    assert predict_label(m1, g, "vote") == predict_label(m2, g, "vote")


def test_vote_agrees_with_proba_away_from_boundary(model3, rng):
    probe = rng.normal(1, 1, (300, 2))
    P = predict_proba(model3, probe)
    sure = P.max(axis=1) > 0.9
    vote = np.array(predict_label(model3, probe, "vote"))
    prob = np.array(predict_label(model3, probe))
    assert sure.sum() > 50
    assert np.all(vote[sure] == prob[sure])


def test_simplex_10k_probes(model3, rng):
    P = predict_proba(model3, rng.uniform(-6, 9, (10_000, 2)))
    assert P.shape == (10_000, 3)
    assert np.all(P >= 0)
    assert np.max(np.abs(P.sum(axis=1) - 1.0)) <= 1e-9


def test_argmax_inside_blob(model3):
    assert predict_label(model3, np.array([[0, 0], [3, 0], [0, 3]])) == ["a", "b", "c"]


def test_two_class_coupling_is_the_pair_sigmoid(rng):
    X, y = blobs(rng, sigma=0.8, sep=2.0)
    m = train_svc(X, y, C=1.0, gamma=1.0)
    pr = m.pairs[0]
    r = _sigmoid_predict(decision_values(m, X)[:, 0], pr.prob_a, pr.prob_b)
    r = np.clip(r, 1e-7, 1 - 1e-7)
    np.testing.assert_allclose(predict_proba(m, X)[:, 0], r, rtol=0, atol=1e-15)


def test_coupling_matches_closed_form(rng):
    """Method 2 minimizes p'Qp on the simplex; solve the KKT system directly."""
    for k in (3, 4, 5):
        r = rng.uniform(0.05, 0.95, (k, k))
        r = np.triu(r, 1)
        r = r + np.tril(1 - r.T, -1)
        np.fill_diagonal(r, 0)
        Q = np.where(np.eye(k, dtype=bool), 0.0, -r.T * r)
        np.fill_diagonal(Q, [sum(r[j, i] ** 2 for j in range(k) if j != i) for i in range(k)])
        A = np.zeros((k + 1, k + 1))
        A[:k, :k] = 2 * Q
        A[:k, k] = 1
        A[k, :k] = 1
        want = np.linalg.solve(A, np.r_[np.zeros(k), 1.0])[:k]
        np.testing.assert_allclose(couple_pairwise(r), want, atol=1e-8)


def test_platt_fit_matches_direct_minimizer(rng):
    dec = np.r_[rng.normal(1, 1, 40), rng.normal(-1, 1, 30)]
    yb = np.r_[np.ones(40), -np.ones(30)]
    A, B = _sigmoid_train(dec, yb)
    t = np.where(yb > 0, 41 / 42, 1 / 32)

    def nll(ab):
        p = _sigmoid_predict(dec, *ab)
        return -np.sum(t * np.log(p) + (1 - t) * np.log(1 - p))

    ref = optimize.minimize(nll, [0.0, 0.0], method="BFGS", options={"gtol": 1e-10}).x
    assert abs(A - ref[0]) < 1e-4 and abs(B - ref[1]) < 1e-4
    assert A < 0  # positive decision values -> higher P(first class)


def test_platt_separated_training_points(rng):
    dec = np.r_[rng.uniform(1, 3, 20), rng.uniform(-3, -1, 20)]
    yb = np.r_[np.ones(20), -np.ones(20)]
    A, B = _sigmoid_train(dec, yb)
    p = _sigmoid_predict(dec, A, B)
    assert np.all(p[:20] > 0.5) and np.all(p[20:] < 0.5)


def test_smo_constraints_and_monotone_objective(rng):
    X, y = blobs(rng, sigma=1.0, sep=1.5)
    yb = np.array([1.0 if c == "left" else -1.0 for c in y])
    kr = _KernelRows(X, 0.5)
    C = 2.0
    res = smo_solve(kr.row, yb, -np.ones(len(yb)), C, trace=True)
    assert np.all(res.alpha >= 0) and np.all(res.alpha <= C)
    assert abs(np.dot(yb, res.alpha)) < 1e-10
    obj = np.array(res.objective)
    assert len(obj) > 5
    assert np.all(np.diff(obj) <= 1e-12)
    # KKT: gradient conditions hold to tolerance
    K = rbf_matrix(X, X, 0.5)
    G = (yb[:, None] * yb[None, :] * K) @ res.alpha - 1
    up = ((yb > 0) & (res.alpha < C)) | ((yb < 0) & (res.alpha > 0))
    low = ((yb > 0) & (res.alpha > 0)) | ((yb < 0) & (res.alpha < C))
    assert np.max(-yb[up] * G[up]) - np.min(-yb[low] * G[low]) < 1e-3 + 1e-12


def test_svc_matches_libsvm(rng):
    svm = pytest.importorskip("sklearn.svm")
    X = np.vstack([rng.normal(0, 1, (40, 4)), rng.normal(0.8, 1, (40, 4))])
    y = ["p"] * 40 + ["q"] * 40
    m = train_svc(X, y, C=3.0, gamma=0.3)
    ref = svm.SVC(C=3.0, gamma=0.3, tol=1e-3, shrinking=False).fit(X, y)
    probe = rng.normal(0.4, 1.5, (200, 4))
    ours = decision_values(m, probe)[:, 0]
    # libsvm's sign convention puts classes_[1] on the positive side
    theirs = -ref.decision_function(probe)
    assert np.max(np.abs(ours - theirs)) < 1e-2


def test_svr_matches_libsvm(rng):
    svm = pytest.importorskip("sklearn.svm")
    X = rng.uniform(-1, 1, (60, 3))
    y = np.sin(2 * X[:, 0]) + X[:, 1] ** 2 + 0.05 * rng.normal(size=60)
    m = train_svr(X, y, C=5.0, gamma=0.8, epsilon=0.1)
    ref = svm.SVR(C=5.0, gamma=0.8, epsilon=0.1, tol=1e-3, shrinking=False).fit(X, y)
    probe = rng.uniform(-1, 1, (100, 3))
    assert np.max(np.abs(predict_svr(m, probe) - ref.predict(probe))) < 1e-2


def test_svr_linear_function():
    x = np.linspace(0, 1, 200)[:, None]
    y = 2 * x[:, 0] + 1
    m = train_svr(x, y, C=100, gamma=10, epsilon=0.01)
    assert np.max(np.abs(predict_svr(m, x) - y)) <= 0.05


def test_svr_constant_target(rng):
    X = rng.normal(size=(30, 2))
    m = train_svr(X, np.full(30, 4.2), C=1.0, gamma=1.0, epsilon=0.1)
    assert np.max(np.abs(predict_svr(m, X) - 4.2)) <= 0.1 + 1e-9


def test_svr_continuity(rng):
    X = rng.normal(size=(40, 3))
    m = train_svr(X, X[:, 0] - X[:, 2], C=10, gamma=0.5, epsilon=0.05)
    for x in rng.normal(size=(20, 3)):
        assert abs(predict_svr(m, x + 1e-9) - predict_svr(m, x)) < 1e-6


def test_svr_interpolates_with_zero_epsilon(rng):
    x = np.sort(rng.uniform(0, 1, 15))[:, None]
    y = np.cos(5 * x[:, 0])
    m = train_svr(x, y, C=1e4, gamma=20, epsilon=0.0, tol=1e-6)
    assert np.max(np.abs(predict_svr(m, x) - y)) < 1e-3


def test_training_errors():
    with pytest.raises(TrainingError, match="at least 2 classes"):
        train_svc(np.zeros((4, 2)), ["a"] * 4)
    with pytest.raises(TrainingError, match="'b'"):
        train_svc(np.zeros((4, 2)), ["a", "a", "a", "b"])
    with pytest.raises(TrainingError):
        train_svr(np.zeros((1, 2)), [1.0])
    with pytest.raises(TrainingError):
        train_svr(np.zeros((3, 2)), [1.0, 2, 3], epsilon=-1)


def test_class_order_first_appearance(rng):
    X = np.vstack([rng.normal(0, 0.3, (10, 2)), rng.normal(3, 0.3, (10, 2))])
    m = train_svc(X, ["zeta"] * 10 + ["alpha"] * 10, C=1, gamma=1)
    assert m.classes == ["zeta", "alpha"]


def test_deterministic_given_seed(rng):
    X, y = three_class(rng)
    a = train_svc(X, y, C=1.0, gamma=0.5, seed=11)
    b = train_svc(X, y, C=1.0, gamma=0.5, seed=11)
    probe = rng.normal(1, 2, (50, 2))
    assert predict_proba(a, probe).tobytes() == predict_proba(b, probe).tobytes()


def test_default_params():
    p = SvmParams()
    assert (p.C, p.gamma, p.epsilon) == (1e-4, 1e-4, 0.1)
