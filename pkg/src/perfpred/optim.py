"""Stochastic optimization under decision-dependent data.

Three drivers share one trajectory format:

* :func:`run_greedy` -- deploy after every step: draw a minibatch from
  D(theta_t), take one stochastic gradient step.
* :func:`run_lazy` -- deploy every K steps: freeze D(theta_t), take K
  stochastic steps against the frozen distribution, then redeploy.
* :func:`run_exact_gradient` -- greedy deployment with the exact partial
  gradient over the full support (the zero-noise limit).

Greedy is the K = 1 special case of lazy: with equal seed, batch size, and
step size the two produce bit-identical trajectories, which the test suite
pins down to the serialized bytes.

Determinism: a run's randomness comes from ``RngStream(config.seed)`` alone
(parameter init first, then all index noise pre-drawn in a single call), so
equal (config, model, map, data) reproduce a trajectory exactly, regardless
of how runs are scheduled across processes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .models import accuracy
from .numkit import RngStream, Vec

DIVERGENCE_NORM = 1e12


@dataclass(frozen=True)
class Constant:
    """Fixed step size."""

    gamma: float


@dataclass(frozen=True)
class InvSqrtT:
    """gamma_t = scale / sqrt(T), constant in t for a fixed horizon."""

    scale: float = 1.0


@dataclass(frozen=True)
class LazyInvSqrtT:
    """gamma_t = scale / (K * sqrt(T)); requires the deployment period K."""

    scale: float = 1.0


StepSchedule = Constant | InvSqrtT | LazyInvSqrtT


def schedule_gamma(schedule: StepSchedule, t: int, T: int, K: int | None = None) -> float:
    """Step size at iteration t of horizon T (deployments, for lazy runs)."""
    if not 0 <= t < T:
        raise ValueError(f"iteration {t} outside horizon [0, {T})")
    if isinstance(schedule, Constant):
        return schedule.gamma
    if isinstance(schedule, InvSqrtT):
        return schedule.scale / math.sqrt(T)
    if isinstance(schedule, LazyInvSqrtT):
        if K is None:
            raise ValueError("LazyInvSqrtT needs the deployment period K")
        return schedule.scale / (K * math.sqrt(T))
    raise TypeError(f"unknown schedule {schedule!r}")


@dataclass(frozen=True)
class Greedy:
    """Deploy after every minibatch step."""

    b: int = 1

    def __post_init__(self):
        if self.b < 1:
            raise ValueError("batch size must be >= 1")


@dataclass(frozen=True)
class Lazy:
    """Deploy every K minibatch steps (distribution frozen in between)."""

    K: int
    b: int = 1

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be >= 1")
        if self.b < 1:
            raise ValueError("batch size must be >= 1")


DeploymentPlan = Greedy | Lazy


@dataclass(frozen=True)
class RunConfig:
    """Everything a single run needs besides the problem instance.

    T counts iterations for greedy runs and deployments for lazy runs.
    theta0 = None draws the model's default initialization from the run's
    stream; otherwise the given vector is used as-is.
    """

    T: int
    plan: DeploymentPlan
    schedule: StepSchedule
    seed: int
    eval_every: int = 100
    theta0: np.ndarray | None = None

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not 1 <= self.eval_every:
            raise ValueError("eval_every must be >= 1")


@dataclass(frozen=True)
class TrajectoryPoint:
    """Metrics of the iterate theta_t, captured before the step at t."""

    t: int
    samples_accessed: int
    gamma: float
    sps_sq: float
    risk: float
    train_acc: float
    test_acc: float


@dataclass
class Trajectory:
    config: RunConfig
    points: list[TrajectoryPoint] = field(default_factory=list)
    final_theta: np.ndarray | None = None
    status: str = "ok"
    note: str = ""


def _theta_ok(theta: Vec) -> bool:
    return bool(np.all(np.isfinite(theta))) and float(theta @ theta) <= DIVERGENCE_NORM**2


def _capture(traj, model, shift_map, test, theta, t, samples, gamma) -> bool:
    """Append a metrics point for theta_t; False if the iterate has diverged."""
    if not _theta_ok(theta):
        traj.status = "diverged"
        traj.note = f"non-finite or oversized parameter at iteration {t}"
        return False
    Xs = shift_map.shifted_features(theta)
    y = shift_map.base.y
    g = model.batch_grad(theta, Xs, y)
    sps_sq = float(g @ g)
    risk = float(np.mean(model.batch_losses(theta, Xs, y)))
    train_acc = float(np.mean(model.decision(theta, Xs) == y))
    test_acc = accuracy(model, theta, test)
    traj.points.append(
        TrajectoryPoint(t, samples, gamma, sps_sq, risk, train_acc, test_acc)
    )
    return True


def _init_theta(config: RunConfig, model, rng: RngStream) -> Vec:
    if config.theta0 is not None:
        theta0 = np.array(config.theta0, dtype=np.float64)
        if theta0.shape != (model.dim,):
            raise ValueError(
                f"theta0 has shape {theta0.shape}, model expects ({model.dim},)"
            )
        return theta0
    return model.init_params(rng)


def _capture_due(t: int, T: int, eval_every: int) -> bool:
    return t % eval_every == 0 or t == T - 1


def _finish(traj, theta, T) -> Trajectory:
    traj.final_theta = theta
    if traj.status == "ok" and not _theta_ok(theta):
        traj.status = "diverged"
        traj.note = f"non-finite or oversized parameter at iteration {T}"
    return traj


def run_lazy(config: RunConfig, model, shift_map, train, test) -> Trajectory:
    """K steps against each frozen deployment D(theta_t), then redeploy."""
    if not isinstance(config.plan, Lazy):
        raise TypeError("run_lazy requires a Lazy deployment plan")
    if train.m != shift_map.m:
        raise ValueError("train set and shift map disagree on m")
    K, b, T = config.plan.K, config.plan.b, config.T
    rng = RngStream(config.seed)
    theta = _init_theta(config, model, rng)
    idx = rng.integers(0, shift_map.m, size=T * K * b).reshape(T, K, b)
    y = shift_map.base.y
    traj = Trajectory(config=config)
    # Every shipped schedule is constant over the horizon; hoist it.
    gamma = schedule_gamma(config.schedule, 0, T, K)
    for t in range(T):
        if _capture_due(t, T, config.eval_every):
            if not _capture(traj, model, shift_map, test, theta, t, t * K * b, gamma):
                return _finish(traj, theta, t)
        theta_dep = theta  # deployment frozen for the inner loop
        for k in range(K):
            rows = idx[t, k]
            Xb = shift_map.shifted_features(theta_dep, rows)
            g = model.batch_grad(theta, Xb, y[rows])
            theta = theta - gamma * g
    return _finish(traj, theta, T)


def run_greedy(config: RunConfig, model, shift_map, train, test) -> Trajectory:
    """Deploy every step: single stochastic gradient step per deployment."""
    if not isinstance(config.plan, Greedy):
        raise TypeError("run_greedy requires a Greedy deployment plan")
    if train.m != shift_map.m:
        raise ValueError("train set and shift map disagree on m")
    b, T = config.plan.b, config.T
    rng = RngStream(config.seed)
    theta = _init_theta(config, model, rng)
    # Same draw-call shape as run_lazy with K = 1, so the two consume the
    # stream identically and the K = 1 degeneracy is bit-exact.
    idx = rng.integers(0, shift_map.m, size=T * 1 * b).reshape(T, 1, b)
    y = shift_map.base.y
    traj = Trajectory(config=config)
    gamma = schedule_gamma(config.schedule, 0, T, 1)
    for t in range(T):
        if _capture_due(t, T, config.eval_every):
            if not _capture(traj, model, shift_map, test, theta, t, t * b, gamma):
                return _finish(traj, theta, t)
        rows = idx[t, 0]
        Xb = shift_map.shifted_features(theta, rows)
        g = model.batch_grad(theta, Xb, y[rows])
        theta = theta - gamma * g
    return _finish(traj, theta, T)


def run_exact_gradient(config: RunConfig, model, shift_map, train, test) -> Trajectory:
    """Greedy deployment driven by the exact partial gradient.

    Each iteration reads the full m-point support, so samples_accessed grows
    by m per step.
    """
    if not isinstance(config.plan, Greedy):
        raise TypeError("run_exact_gradient requires a Greedy deployment plan")
    if train.m != shift_map.m:
        raise ValueError("train set and shift map disagree on m")
    T, m = config.T, shift_map.m
    rng = RngStream(config.seed)
    theta = _init_theta(config, model, rng)
    y = shift_map.base.y
    traj = Trajectory(config=config)
    gamma = schedule_gamma(config.schedule, 0, T, 1)
    for t in range(T):
        if _capture_due(t, T, config.eval_every):
            if not _capture(traj, model, shift_map, test, theta, t, t * m, gamma):
                return _finish(traj, theta, t)
        Xs = shift_map.shifted_features(theta)
        g = model.batch_grad(theta, Xs, y)
        theta = theta - gamma * g
    return _finish(traj, theta, T)
