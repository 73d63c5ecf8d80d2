"""Numerical checks of the quantities the convergence analysis leans on.

* :func:`w1_discrete` -- exact Wasserstein-1 distance between two uniform
  point clouds of equal size under the L1 ground metric (Hungarian matching).
* :func:`sensitivity_check` -- measured W1 between two deployments of a map
  against its advertised eps * ||theta - theta'|| bound.  For location maps
  the bound uses the L1 norm on the parameter difference, where it is tight
  (a location shift is a pure translation, and W1 of a translation under the
  L1 ground metric equals the L1 length of the translation vector); for
  best-response maps the L2 norm is used and the bound is heuristic.  The
  report's ``norm_used`` field surfaces which convention applied.
* :func:`estimate_sigma` -- exact population variance of the per-sample
  gradients over a deployment's support (the gradient-noise level; the noise
  is bounded on finite supports, so the variance slope sigma1 is reported
  as zero and only sigma0 is estimated).
* :func:`estimate_smoothness` / :func:`estimate_loss_lipschitz` -- sampled
  lower estimates of the gradient-Lipschitz constant in theta and the
  loss-Lipschitz constant in the sample (L1 metric, matching w1_discrete).
* :func:`descent_check` -- the one-step descent inequality
  (gamma/2) ||grad J(theta; theta)||^2
      <= J(theta; theta) - E[J(theta_+; theta)] + (L/2) sigma0^2 gamma^2,
  with the expectation over the next iterate enumerated exactly (one
  candidate per support point, batch size 1), plus the exact deployment
  residual E[J(theta_+; theta_+) - J(theta_+; theta)] and its Lipschitz
  bound.  Enumeration is O(m^2) loss evaluations, so supports are capped.

A note on total-variation sensitivity: on finite uniform supports a location
shift moves every atom, so D(theta) and D(theta') have disjoint supports for
almost every pair and their TV distance is 1 no matter how close theta and
theta' are.  A TV-based sensitivity check is therefore vacuous here; the W1
route is the one measured.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .datasets import BaseDataset, Sample
from .numkit import RngStream, Vec
from .shiftmaps import LocationShiftMap

DESCENT_SUPPORT_CAP = 64


def w1_discrete(P: np.ndarray, Q: np.ndarray) -> float:
    """Exact W1 between uniform distributions on two equal-size point sets.

    Points are rows; the ground metric is L1.  Solved as an optimal
    assignment (uniform weights make the transport polytope's optimum a
    permutation), cost averaged over the n matched pairs.
    """
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    if P.shape != Q.shape:
        raise ValueError(f"point sets differ in shape: {P.shape} vs {Q.shape}")
    costs = cdist(P, Q, metric="cityblock")
    rows, cols = linear_sum_assignment(costs)
    return float(costs[rows, cols].mean())


def _support_points(data: BaseDataset) -> np.ndarray:
    # A sample is the feature vector with its label appended as a coordinate;
    # matched pairs with equal labels contribute nothing on that axis.
    return np.hstack([data.X, data.y[:, None].astype(np.float64)])


@dataclass(frozen=True)
class SensitivityReport:
    w1: float
    bound: float
    slack: float          # bound - w1; >= 0 when the advertised bound holds
    theta_dist: float     # ||theta - theta'|| in the norm below
    norm_used: str        # "l1" (location maps, tight) or "l2" (heuristic)


def sensitivity_check(shift_map, theta: Vec, theta_prime: Vec) -> SensitivityReport:
    """Measure W1(D(theta), D(theta')) against eps * ||theta - theta'||."""
    P = _support_points(shift_map.support(theta))
    Q = _support_points(shift_map.support(theta_prime))
    w1 = w1_discrete(P, Q)
    diff = np.asarray(theta) - np.asarray(theta_prime)
    if isinstance(shift_map, LocationShiftMap):
        dist, norm_used = float(np.abs(diff).sum()), "l1"
    else:
        dist, norm_used = float(np.sqrt(diff @ diff)), "l2"
    bound = shift_map.eps * dist
    return SensitivityReport(w1, bound, bound - w1, dist, norm_used)


def estimate_sigma(model, theta: Vec, shift_map) -> tuple[float, float]:
    """(sigma0, sigma0^2): exact gradient-noise level at theta.

    Population variance of the per-sample gradients over the support of
    D(theta) around their mean (the exact partial gradient).
    """
    Xs = shift_map.shifted_features(theta)
    G = model.grad_matrix(theta, Xs, shift_map.base.y)
    centered = G - G.mean(axis=0)
    var = float(np.mean(np.einsum("ij,ij->i", centered, centered)))
    return float(np.sqrt(var)), var


def _ball_point(rng: RngStream, d: int, radius: float) -> Vec:
    v = rng.normal(d)
    norm = float(np.sqrt(v @ v))
    if norm == 0.0:
        return v
    r = radius * float(rng.uniform()) ** (1.0 / d)
    return (r / norm) * v


def estimate_smoothness(
    model, data: BaseDataset, trials: int, rng: RngStream, radius: float = 3.0
) -> float:
    """Sampled gradient-Lipschitz constant of the loss in theta.

    Max of ||grad(theta; z) - grad(theta'; z)|| / ||theta - theta'|| over
    random parameter pairs in a ball and random samples of ``data``.  A lower
    estimate of the true constant; stable across redraws at these trial
    counts on the shipped losses.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    best = 0.0
    for _ in range(trials):
        th1 = _ball_point(rng, model.dim, radius)
        th2 = _ball_point(rng, model.dim, radius)
        diff = th1 - th2
        dn = float(np.sqrt(diff @ diff))
        if dn == 0.0:
            continue
        sample = data[int(rng.integers(0, data.m))]
        g1 = model.grad_theta(th1, sample)
        g2 = model.grad_theta(th2, sample)
        gd = g1 - g2
        best = max(best, float(np.sqrt(gd @ gd)) / dn)
    return best


def estimate_loss_lipschitz(
    model,
    data: BaseDataset,
    trials: int,
    rng: RngStream,
    radius: float = 3.0,
    x_radius: float = 1.0,
) -> float:
    """Sampled Lipschitz constant of the loss in the sample, L1 metric.

    Max of |loss(theta; x, y) - loss(theta; x', y)| / ||x - x'||_1 over random
    theta in a ball, random samples, and random feature perturbations.  The
    L1 metric matches the ground metric of :func:`w1_discrete`.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    best = 0.0
    for _ in range(trials):
        theta = _ball_point(rng, model.dim, radius)
        sample = data[int(rng.integers(0, data.m))]
        delta = rng.uniform(-x_radius, x_radius, sample.x.shape[0])
        dn = float(np.abs(delta).sum())
        if dn == 0.0:
            continue
        moved = Sample(sample.x + delta, sample.y)
        num = abs(model.loss(theta, sample) - model.loss(theta, moved))
        best = max(best, num / dn)
    return best


@dataclass(frozen=True)
class DescentReport:
    """One-step descent inequality at theta, all expectations exact."""

    lhs: float            # (gamma/2) ||grad J(theta; theta)||^2
    rhs: float            # J - E[J(theta_+; theta)] + (L/2) sigma0^2 gamma^2
    holds: bool
    residual: float       # E[J(theta_+; theta_+) - J(theta_+; theta)]
    residual_bound: float  # L0 * eps * E||theta_+ - theta||_1
    gamma: float
    sigma0: float
    smoothness: float
    loss_lipschitz: float
    risk: float           # J(theta; theta)
    expected_next: float  # E[J(theta_+; theta)]


def descent_check(
    model,
    shift_map,
    theta: Vec,
    gamma: float,
    rng: RngStream | None = None,
    smoothness: float | None = None,
    loss_lipschitz: float | None = None,
    trials: int = 2000,
    max_m: int = DESCENT_SUPPORT_CAP,
) -> DescentReport:
    """Exact one-step descent check at theta (batch size 1).

    All m candidate next iterates theta - gamma * grad(theta; z_i) are
    enumerated, so the conditional expectations carry no Monte Carlo error;
    the only estimated inputs are the smoothness and loss-Lipschitz
    constants (pass them in to pin them).  ``holds`` compares lhs <= rhs up
    to float roundoff; the inequality is guaranteed for
    gamma <= 1 / smoothness.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    m = shift_map.m
    if m > max_m:
        raise ValueError(
            f"support size {m} exceeds the descent enumeration cap {max_m}"
        )
    if (smoothness is None or loss_lipschitz is None) and rng is None:
        raise ValueError("rng is required when constants are not supplied")
    if smoothness is None:
        smoothness = estimate_smoothness(model, shift_map.base, trials, rng.fork(0))
    if loss_lipschitz is None:
        loss_lipschitz = estimate_loss_lipschitz(
            model, shift_map.base, trials, rng.fork(1)
        )

    y = shift_map.base.y
    Xs = shift_map.shifted_features(theta)
    G = model.grad_matrix(theta, Xs, y)          # (m, dim) per-sample grads
    g_mean = G.mean(axis=0)
    lhs = 0.5 * gamma * float(g_mean @ g_mean)

    centered = G - g_mean
    sigma_sq = float(np.mean(np.einsum("ij,ij->i", centered, centered)))

    risk = float(np.mean(model.batch_losses(theta, Xs, y)))
    candidates = theta - gamma * G               # next iterate per drawn sample

    frozen = np.empty(m)   # J(theta_i_+; theta): loss on the frozen support
    own = np.empty(m)      # J(theta_i_+; theta_i_+): after redeployment
    step_l1 = np.empty(m)  # ||theta_i_+ - theta||_1
    for i in range(m):
        cand = candidates[i]
        frozen[i] = np.mean(model.batch_losses(cand, Xs, y))
        Xi = shift_map.shifted_features(cand)
        own[i] = np.mean(model.batch_losses(cand, Xi, y))
        step_l1[i] = gamma * np.abs(G[i]).sum()

    expected_next = float(frozen.mean())
    rhs = risk - expected_next + 0.5 * smoothness * sigma_sq * gamma**2
    holds = lhs <= rhs + 1e-12 * max(1.0, abs(rhs))

    residual = float(own.mean() - frozen.mean())
    residual_bound = loss_lipschitz * shift_map.eps * float(step_l1.mean())

    return DescentReport(
        lhs=lhs,
        rhs=rhs,
        holds=bool(holds),
        residual=residual,
        residual_bound=residual_bound,
        gamma=gamma,
        sigma0=float(np.sqrt(sigma_sq)),
        smoothness=smoothness,
        loss_lipschitz=loss_lipschitz,
        risk=risk,
        expected_next=expected_next,
    )
