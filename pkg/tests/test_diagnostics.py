"""Diagnostics: exact W1 on point clouds, map sensitivity, gradient-noise
level, sampled Lipschitz constants, and the one-step descent inequality."""

import itertools

import numpy as np
import pytest

from perfpred.datasets import BaseDataset, Sample, SyntheticSpec, gen_synthetic
from perfpred.diagnostics import (
    DESCENT_SUPPORT_CAP,
    descent_check,
    estimate_loss_lipschitz,
    estimate_sigma,
    estimate_smoothness,
    sensitivity_check,
    w1_discrete,
)
from perfpred.models import LinearSigmoidModel, MlpBceModel, MlpLayout
from perfpred.numkit import RngStream
from perfpred.shiftmaps import BestResponseShiftMap, LocationShiftMap


class QuadraticHelper:
    """loss(theta; z) = 0.5 ||theta - a||^2, independent of the sample.

    Its gradient-Lipschitz constant in theta is exactly 1 and its Lipschitz
    constant in the sample is exactly 0, which pins both estimators.
    """

    encoding = "pm1"

    def __init__(self, d, target):
        self.dim = d
        self.target = np.asarray(target, float)

    def loss(self, theta, sample):
        diff = theta - self.target
        return 0.5 * float(diff @ diff)

    def grad_theta(self, theta, sample):
        return theta - self.target


def brute_force_w1(P, Q):
    n = P.shape[0]
    best = np.inf
    for perm in itertools.permutations(range(n)):
        cost = sum(np.abs(P[i] - Q[perm[i]]).sum() for i in range(n)) / n
        best = min(best, cost)
    return best


def small_instance(m=40, d=5, eps=0.5, seed=0):
    spec = SyntheticSpec(m=m, d=d, m_test=10, flip_frac=0.1, seed=seed)
    train, _, _ = gen_synthetic(spec)
    model = LinearSigmoidModel(d=d, c=0.1, beta=1e-3)
    return model, LocationShiftMap(train, eps), train


def test_w1_matches_brute_force_assignment():
    rng = np.random.default_rng(0)
    for n, d in [(2, 1), (3, 2), (4, 3), (5, 2), (6, 2)]:
        for _ in range(6):
            P = rng.normal(size=(n, d))
            Q = rng.normal(size=(n, d))
            np.testing.assert_allclose(
                w1_discrete(P, Q), brute_force_w1(P, Q), rtol=0, atol=1e-12
            )


def test_w1_identity_translation_and_symmetry():
    rng = np.random.default_rng(1)
    P = rng.normal(size=(12, 4))
    v = np.array([0.5, -1.5, 0.25, 2.0])
    assert w1_discrete(P, P) == 0.0
    np.testing.assert_allclose(w1_discrete(P, P + v), np.abs(v).sum(), atol=1e-12)
    Q = rng.normal(size=(12, 4))
    np.testing.assert_allclose(w1_discrete(P, Q), w1_discrete(Q, P), atol=1e-12)
    # optimal transport does not care how the atoms are listed
    np.testing.assert_allclose(
        w1_discrete(P, Q), w1_discrete(P, Q[rng.permutation(12)]), atol=1e-12
    )


def test_w1_rejects_mismatched_clouds():
    with pytest.raises(ValueError, match="shape"):
        w1_discrete(np.zeros((3, 2)), np.zeros((4, 2)))


def test_location_sensitivity_bound_is_tight():
    model, smap, train = small_instance(m=25, d=4, eps=1.5)
    rng = RngStream(2)
    for i in range(5):
        theta = rng.fork(i).normal(4)
        theta_p = rng.fork(100 + i).normal(4)
        rep = sensitivity_check(smap, theta, theta_p)
        assert rep.norm_used == "l1"
        assert rep.theta_dist == pytest.approx(np.abs(theta - theta_p).sum())
        assert rep.bound == pytest.approx(1.5 * rep.theta_dist)
        # a location shift is a pure translation, so the bound is an equality
        assert abs(rep.slack) <= 1e-9
        assert rep.w1 == pytest.approx(rep.bound, abs=1e-9)


def test_best_response_sensitivity_reports_l2_norm():
    spec = SyntheticSpec(m=12, d=6, m_test=4, flip_frac=0.0, seed=3)
    train, _, _ = gen_synthetic(spec)
    layout = MlpLayout(d_in=6, h1=3, h2=4)
    model = MlpBceModel(layout)
    smap = BestResponseShiftMap(train, 0.8, model)
    rng = RngStream(4)
    theta = 0.5 * rng.normal(model.dim)
    theta_p = 0.5 * rng.fork(1).normal(model.dim)
    rep = sensitivity_check(smap, theta, theta_p)
    assert rep.norm_used == "l2"
    d = theta - theta_p
    assert rep.theta_dist == pytest.approx(float(np.sqrt(d @ d)))
    assert rep.bound == pytest.approx(0.8 * rep.theta_dist)
    assert rep.slack == pytest.approx(rep.bound - rep.w1)
    assert rep.w1 > 0.0


def test_estimate_sigma_matches_population_variance():
    model, smap, train = small_instance(m=30, d=4, eps=1.0)
    theta = RngStream(5).normal(4)
    sigma0, var = estimate_sigma(model, theta, smap)
    Xs = smap.shifted_features(theta)
    G = model.grad_matrix(theta, Xs, train.y)
    centered = G - G.mean(axis=0)
    expect = float(np.mean(np.sum(centered * centered, axis=1)))
    assert var == pytest.approx(expect, rel=1e-12)
    assert sigma0 == pytest.approx(np.sqrt(expect), rel=1e-12)


def test_estimate_sigma_zero_on_singleton_support():
    X = np.array([[0.3, -0.2]])
    data = BaseDataset(X, np.array([1.0]), "pm1")
    model = LinearSigmoidModel(d=2, c=0.1, beta=1e-3)
    smap = LocationShiftMap(data, 2.0)
    sigma0, var = estimate_sigma(model, np.array([0.5, 0.5]), smap)
    assert sigma0 == 0.0
    assert var == 0.0


def test_lipschitz_estimators_pinned_by_quadratic_loss():
    rng = np.random.default_rng(6)
    X = rng.uniform(-1, 1, size=(8, 3))
    data = BaseDataset(X, np.ones(8), "pm1")
    model = QuadraticHelper(3, target=[1.0, -1.0, 0.5])
    assert estimate_smoothness(model, data, 50, RngStream(7)) == pytest.approx(1.0, rel=1e-12)
    assert estimate_loss_lipschitz(model, data, 50, RngStream(8)) == 0.0


def test_lipschitz_estimators_deterministic_and_validated():
    model, _, train = small_instance()
    a = estimate_smoothness(model, train, 100, RngStream(9))
    b = estimate_smoothness(model, train, 100, RngStream(9))
    assert a == b
    assert 0.0 < a < np.inf
    la = estimate_loss_lipschitz(model, train, 100, RngStream(10))
    lb = estimate_loss_lipschitz(model, train, 100, RngStream(10))
    assert la == lb
    assert 0.0 < la < np.inf
    with pytest.raises(ValueError):
        estimate_smoothness(model, train, 0, RngStream(11))
    with pytest.raises(ValueError):
        estimate_loss_lipschitz(model, train, 0, RngStream(11))


def test_descent_check_matches_hand_enumeration():
    model, smap, train = small_instance(m=5, d=3, eps=1.0, seed=12)
    theta = RngStream(13).normal(3)
    gamma = 0.7
    rep = descent_check(model, smap, theta, gamma, smoothness=2.0, loss_lipschitz=0.3)

    Xs = smap.shifted_features(theta)
    G = model.grad_matrix(theta, Xs, train.y)
    g = G.mean(axis=0)
    lhs = 0.5 * gamma * float(g @ g)
    risk = float(np.mean(model.batch_losses(theta, Xs, train.y)))
    frozen, own, steps = [], [], []
    for i in range(5):
        cand = theta - gamma * G[i]
        frozen.append(np.mean(model.batch_losses(cand, Xs, train.y)))
        own.append(np.mean(model.batch_losses(cand, smap.shifted_features(cand), train.y)))
        steps.append(gamma * np.abs(G[i]).sum())
    expected_next = float(np.mean(frozen))
    centered = G - g
    sigma_sq = float(np.mean(np.sum(centered * centered, axis=1)))

    assert rep.lhs == pytest.approx(lhs, rel=1e-12)
    assert rep.risk == pytest.approx(risk, rel=1e-12)
    assert rep.expected_next == pytest.approx(expected_next, rel=1e-12)
    assert rep.rhs == pytest.approx(risk - expected_next + 0.5 * 2.0 * sigma_sq * gamma**2, rel=1e-12)
    assert rep.residual == pytest.approx(float(np.mean(own)) - expected_next, rel=1e-10)
    assert rep.residual_bound == pytest.approx(0.3 * 1.0 * float(np.mean(steps)), rel=1e-12)
    assert rep.sigma0 == pytest.approx(np.sqrt(sigma_sq), rel=1e-12)
    assert rep.gamma == gamma
    assert rep.smoothness == 2.0
    assert rep.loss_lipschitz == 0.3


def test_descent_inequality_holds_below_inverse_smoothness():
    model, smap, train = small_instance(m=40, d=5, eps=0.5, seed=14)
    rng = RngStream(15)
    L = estimate_smoothness(model, train, 2000, rng.fork(0))
    gamma = 0.5 / L
    for i in range(5):
        theta = rng.fork(10 + i).normal(5)
        rep = descent_check(model, smap, theta, gamma, rng=rng.fork(20 + i))
        assert rep.holds
        assert rep.lhs <= rep.rhs + 1e-12 * max(1.0, abs(rep.rhs))
        assert rep.residual <= rep.residual_bound + 1e-9


def test_descent_residual_vanishes_for_static_map():
    model, smap, train = small_instance(m=20, d=4, eps=0.0, seed=16)
    theta = RngStream(17).normal(4)
    rep = descent_check(model, smap, theta, 0.5, smoothness=1.0, loss_lipschitz=1.0)
    assert rep.residual == 0.0
    assert rep.residual_bound >= 0.0


def test_descent_check_input_validation():
    model, smap, train = small_instance(m=10, d=3)
    theta = np.zeros(3)
    with pytest.raises(ValueError, match="gamma"):
        descent_check(model, smap, theta, 0.0, smoothness=1.0, loss_lipschitz=1.0)
    with pytest.raises(ValueError, match="rng"):
        descent_check(model, smap, theta, 0.1)
    with pytest.raises(ValueError, match="cap"):
        descent_check(model, smap, theta, 0.1, smoothness=1.0,
                      loss_lipschitz=1.0, max_m=5)
    big_model, big_map, _ = small_instance(m=DESCENT_SUPPORT_CAP + 1, d=3)
    with pytest.raises(ValueError, match="cap"):
        descent_check(big_model, big_map, theta, 0.1, smoothness=1.0, loss_lipschitz=1.0)
