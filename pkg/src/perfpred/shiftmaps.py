"""Decision-dependent data distributions over finite supports.

A shift map turns a parameter vector theta into a distribution D(theta):
the uniform distribution on the m base samples with their features moved by a
theta-dependent displacement.  Because the index distribution is uniform no
matter what theta is, sampling factorizes into "draw indices" + "shift the
selected rows", which the optimizers exploit.

The decoupled risk J(theta1; theta2) is the mean loss of theta1 over
D(theta2); its gradient in the first slot is the partial gradient whose
squared norm at theta1 = theta2 is the stationarity measure ``sps_measure``
(how far theta is from being a stationary point of the risk it induces).
"""

from __future__ import annotations

import numpy as np

from .datasets import BaseDataset
from .numkit import RngStream, Vec

# Chunk size for the Monte Carlo gradient estimator; bounds peak memory at
# large n without changing the result (chunk means are count-weighted).
_MC_CHUNK = 1 << 15


class LocationShiftMap:
    """Uniform distribution on {(x_i - eps * theta, y_i)}.

    Moving every feature vector against theta models a population that
    strategically retreats along the deployed parameter direction; eps is the
    sensitivity of the shift.  eps = 0 recovers the static distribution.
    """

    __slots__ = ("base", "eps")

    def __init__(self, base: BaseDataset, eps: float):
        if eps < 0:
            raise ValueError("eps must be nonnegative")
        self.base = base
        self.eps = float(eps)

    @property
    def m(self) -> int:
        return self.base.m

    @property
    def d(self) -> int:
        return self.base.d

    def shifted_features(self, theta: Vec, idx: np.ndarray | None = None) -> np.ndarray:
        if theta.shape[0] != self.base.d:
            raise ValueError(
                f"theta has dim {theta.shape[0]}, map expects {self.base.d}"
            )
        X = self.base.X if idx is None else self.base.X[idx]
        if self.eps == 0.0:
            return X.copy()
        return X - self.eps * theta

    def support(self, theta: Vec) -> BaseDataset:
        return BaseDataset(
            self.shifted_features(theta), self.base.y, self.base.encoding
        )


class BestResponseShiftMap:
    """Each sample takes a first-order best response against the model.

    Features move by -eps times the input-gradient of the model's forward
    output at the base features: x_i -> x_i - eps * grad_x f(theta; x_i).
    Applied to every drawn sample regardless of its label.  The model must
    expose ``batch_grad_x``.
    """

    __slots__ = ("base", "eps", "model")

    def __init__(self, base: BaseDataset, eps: float, model):
        if eps < 0:
            raise ValueError("eps must be nonnegative")
        if not hasattr(model, "batch_grad_x"):
            raise TypeError("model must expose batch_grad_x for best-response shifts")
        self.base = base
        self.eps = float(eps)
        self.model = model

    @property
    def m(self) -> int:
        return self.base.m

    @property
    def d(self) -> int:
        return self.base.d

    def shifted_features(self, theta: Vec, idx: np.ndarray | None = None) -> np.ndarray:
        X = self.base.X if idx is None else self.base.X[idx]
        if self.eps == 0.0:
            return X.copy()
        return X - self.eps * self.model.batch_grad_x(theta, X)

    def support(self, theta: Vec) -> BaseDataset:
        return BaseDataset(
            self.shifted_features(theta), self.base.y, self.base.encoding
        )


def support(shift_map, theta: Vec) -> BaseDataset:
    """The m-point support of D(theta) as a dataset (labels untouched)."""
    return shift_map.support(theta)


def draw_minibatch(shift_map, theta: Vec, b: int, rng: RngStream) -> BaseDataset:
    """Draw b samples i.i.d. from D(theta) (uniform indices, with replacement)."""
    if b < 1:
        raise ValueError("batch size must be >= 1")
    idx = rng.integers(0, shift_map.m, size=b)
    return BaseDataset(
        shift_map.shifted_features(theta, idx),
        shift_map.base.y[idx],
        shift_map.base.encoding,
    )


def decoupled_risk_exact(model, theta1: Vec, theta2: Vec, shift_map) -> float:
    """J(theta1; theta2): mean loss of theta1 over the support of D(theta2)."""
    Xs = shift_map.shifted_features(theta2)
    return float(np.mean(model.batch_losses(theta1, Xs, shift_map.base.y)))


def decoupled_grad_exact(model, theta1: Vec, theta2: Vec, shift_map) -> Vec:
    """Partial gradient of J in its first slot, averaged over the support."""
    Xs = shift_map.shifted_features(theta2)
    return model.batch_grad(theta1, Xs, shift_map.base.y)


def decoupled_grad_mc(
    model, theta1: Vec, theta2: Vec, shift_map, n: int, rng: RngStream
) -> Vec:
    """Monte Carlo estimate of the partial gradient from n i.i.d. draws."""
    if n < 1:
        raise ValueError("n must be >= 1")
    y = shift_map.base.y
    total = np.zeros(model.dim)
    done = 0
    while done < n:
        k = min(_MC_CHUNK, n - done)
        idx = rng.integers(0, shift_map.m, size=k)
        Xs = shift_map.shifted_features(theta2, idx)
        total += k * model.batch_grad(theta1, Xs, y[idx])
        done += k
    return total / n


def sps_measure(model, theta: Vec, shift_map) -> float:
    """Squared norm of the self-induced partial gradient at theta.

    Zero exactly when theta is a stationary point of the risk under its own
    distribution; small values mean theta is near performative stationarity.
    """
    g = decoupled_grad_exact(model, theta, theta, shift_map)
    return float(g @ g)
