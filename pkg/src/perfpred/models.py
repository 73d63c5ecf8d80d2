"""Loss families.

Two models share a small duck-typed interface (``loss``, ``grad_theta``,
``batch_losses``, ``batch_grad``, ``grad_matrix``, ``decision``,
``init_params``, ``dim``, ``encoding``):

* :class:`LinearSigmoidModel` -- a smooth 0-1-style loss over a linear score,
  ``(1 + exp(c * y * <x, theta>))^-1 + (beta/2) ||theta||^2`` with labels in
  {-1, +1}.  Non-convex in theta.
* :class:`MlpBceModel` -- binary cross entropy of a fixed
  input -> h2 -> h1 -> 1 tanh network with sigmoid output and L2-regularized
  flat parameter vector, labels in {0, 1}.

All gradients are hand-derived (reverse mode for the MLP) and are validated
against central finite differences in the test suite.  The MLP output
probability is clamped to [p_min, 1 - p_min] to keep the cross entropy
finite; gradients honor the clamp (zero through a clamped output), so they
agree with finite differences of the loss as actually computed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .datasets import BaseDataset, Sample
from .numkit import RngStream, Vec


def _check_dim(name: str, got: int, want: int) -> None:
    if got != want:
        raise ValueError(f"{name}: dimension mismatch, got {got}, expected {want}")


@dataclass(frozen=True)
class LinearSigmoidModel:
    """Sigmoid loss over a linear score with L2 regularization.

    loss(theta; x, y) = expit(-c * y * <x, theta>) + (beta/2) ||theta||^2
    grad___________  = -c * y * s * (1 - s) * x + beta * theta,
    with s the loss's sigmoid factor.  Labels are encoded {-1, +1}; the
    decision rule is the sign of <x, theta> with ties toward +1.
    """

    d: int
    c: float = 0.1
    beta: float = 1e-3

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.c <= 0:
            raise ValueError("c must be positive")
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")

    encoding = "pm1"

    @property
    def dim(self) -> int:
        return self.d

    def init_params(self, rng: RngStream) -> Vec:
        return rng.normal(self.d)

    def _margins(self, theta: Vec, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        return self.c * y * (X @ theta)

    def loss(self, theta: Vec, sample: Sample) -> float:
        _check_dim("loss", sample.x.shape[0], self.d)
        if sample.y not in (-1, 1):
            raise ValueError(f"label {sample.y} outside pm1 encoding")
        u = self.c * sample.y * float(sample.x @ theta)
        return float(expit(-u) + 0.5 * self.beta * (theta @ theta))

    def grad_theta(self, theta: Vec, sample: Sample) -> Vec:
        _check_dim("grad_theta", sample.x.shape[0], self.d)
        if sample.y not in (-1, 1):
            raise ValueError(f"label {sample.y} outside pm1 encoding")
        u = self.c * sample.y * float(sample.x @ theta)
        s = expit(-u)
        return -self.c * sample.y * s * (1.0 - s) * sample.x + self.beta * theta

    def batch_losses(self, theta: Vec, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Per-sample losses, shape (n,)."""
        _check_dim("batch_losses", X.shape[1], self.d)
        s = expit(-self._margins(theta, X, y))
        return s + 0.5 * self.beta * (theta @ theta)

    def batch_grad(self, theta: Vec, X: np.ndarray, y: np.ndarray) -> Vec:
        """Mean gradient over the batch, shape (d,)."""
        s = expit(-self._margins(theta, X, y))
        w = -self.c * y * s * (1.0 - s)
        return (X.T @ w) / X.shape[0] + self.beta * theta

    def grad_matrix(self, theta: Vec, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Per-sample gradients stacked as rows, shape (n, d)."""
        s = expit(-self._margins(theta, X, y))
        w = -self.c * y * s * (1.0 - s)
        return w[:, None] * X + self.beta * theta

    def decision(self, theta: Vec, X: np.ndarray) -> np.ndarray:
        return np.where(X @ theta >= 0.0, 1, -1).astype(np.int64)


@dataclass(frozen=True)
class MlpLayout:
    """Parameter layout of the fixed d_in -> h2 -> h1 -> 1 architecture.

    The flat parameter vector is partitioned, in order, into
    W1 (d_in x h2), b1 (h2), W2 (h2 x h1), b2 (h1), w3 (h1), b3 (1);
    the slices tile [0, size) exactly.
    """

    d_in: int
    h1: int
    h2: int

    def __post_init__(self):
        if min(self.d_in, self.h1, self.h2) < 1:
            raise ValueError("all layer widths must be >= 1")

    @property
    def size(self) -> int:
        return (
            self.d_in * self.h2 + self.h2
            + self.h2 * self.h1 + self.h1
            + self.h1 + 1
        )

    def unpack(self, theta: Vec):
        """Views (W1, b1, W2, b2, w3, b3) into the flat vector."""
        d_in, h1, h2 = self.d_in, self.h1, self.h2
        o = 0
        W1 = theta[o : o + d_in * h2].reshape(d_in, h2); o += d_in * h2
        b1 = theta[o : o + h2]; o += h2
        W2 = theta[o : o + h2 * h1].reshape(h2, h1); o += h2 * h1
        b2 = theta[o : o + h1]; o += h1
        w3 = theta[o : o + h1]; o += h1
        b3 = theta[o]
        return W1, b1, W2, b2, w3, b3

    def pack(self, W1, b1, W2, b2, w3, b3) -> Vec:
        return np.concatenate(
            [W1.ravel(), b1, W2.ravel(), b2, w3, np.atleast_1d(b3)]
        )

    def weight_mask(self) -> np.ndarray:
        """Boolean mask over the flat vector: True at weight (non-bias) slots."""
        d_in, h1, h2 = self.d_in, self.h1, self.h2
        mask = np.zeros(self.size, dtype=bool)
        o = 0
        mask[o : o + d_in * h2] = True; o += d_in * h2 + h2
        mask[o : o + h2 * h1] = True; o += h2 * h1 + h1
        mask[o : o + h1] = True
        return mask


@dataclass(frozen=True)
class MlpBceModel:
    """Regularized binary cross entropy of a three-layer tanh network.

    forward(theta; x) = clamp(sigmoid(w3 . tanh(W2^T tanh(W1^T x + b1) + b2) + b3))
    loss = -y log p - (1 - y) log(1 - p) + (beta/2) ||theta||^2, labels {0, 1}.
    """

    layout: MlpLayout
    beta: float = 1e-3
    p_min: float = 1e-12

    def __post_init__(self):
        if self.beta < 0:
            raise ValueError("beta must be nonnegative")
        if not 0.0 < self.p_min < 0.5:
            raise ValueError("p_min must lie in (0, 0.5)")

    encoding = "01"

    @property
    def dim(self) -> int:
        return self.layout.size

    def init_params(self, rng: RngStream, bias_init: float = 0.0) -> Vec:
        """Standard-normal weights, constant biases."""
        theta = np.full(self.layout.size, float(bias_init))
        mask = self.layout.weight_mask()
        theta[mask] = rng.normal(int(mask.sum()))
        return theta

    def _check_theta(self, theta: Vec) -> None:
        _check_dim("theta", theta.shape[0], self.layout.size)

    def _forward_parts(self, theta: Vec, X: np.ndarray):
        """Shared forward pass; X is (n, d_in).

        Returns (h, g, p, pc) with h, g the tanh activations, p the raw
        sigmoid output, and pc its clamped version.
        """
        W1, b1, W2, b2, w3, b3 = self.layout.unpack(theta)
        h = np.tanh(X @ W1 + b1)
        g = np.tanh(h @ W2 + b2)
        p = expit(g @ w3 + b3)
        pc = np.clip(p, self.p_min, 1.0 - self.p_min)
        return h, g, p, pc

    def batch_forward(self, theta: Vec, X: np.ndarray) -> np.ndarray:
        """Clamped output probabilities, shape (n,)."""
        self._check_theta(theta)
        _check_dim("batch_forward", X.shape[1], self.layout.d_in)
        return self._forward_parts(theta, X)[3]

    def forward(self, theta: Vec, x: Vec) -> float:
        return float(self.batch_forward(theta, x[None, :])[0])

    def batch_losses(self, theta: Vec, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        self._check_theta(theta)
        _check_dim("batch_losses", X.shape[1], self.layout.d_in)
        pc = self._forward_parts(theta, X)[3]
        reg = 0.5 * self.beta * (theta @ theta)
        return -(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)) + reg

    def loss(self, theta: Vec, sample: Sample) -> float:
        if sample.y not in (0, 1):
            raise ValueError(f"label {sample.y} outside 01 encoding")
        return float(
            self.batch_losses(theta, sample.x[None, :], np.array([sample.y]))[0]
        )

    def _du_chain(self, theta: Vec, X: np.ndarray, y: np.ndarray | None):
        """Forward pass plus dloss/du (or dp/du when y is None), u the logit.

        The clamp contributes zero derivative where it is active, keeping the
        analytic gradients consistent with finite differences of the clamped
        quantities.
        """
        h, g, p, pc = self._forward_parts(theta, X)
        unclamped = (p >= self.p_min) & (p <= 1.0 - self.p_min)
        if y is None:
            du = np.where(unclamped, p * (1.0 - p), 0.0)
        else:
            du = np.where(unclamped, p - y, 0.0)
        return h, g, du

    def batch_grad(self, theta: Vec, X: np.ndarray, y: np.ndarray) -> Vec:
        """Mean parameter gradient over the batch, shape (layout.size,)."""
        self._check_theta(theta)
        _check_dim("batch_grad", X.shape[1], self.layout.d_in)
        W1, b1, W2, b2, w3, b3 = self.layout.unpack(theta)
        n = X.shape[0]
        h, g, du = self._du_chain(theta, X, y)
        dw3 = (g.T @ du) / n
        db3 = du.mean()
        dz2 = (du[:, None] * w3) * (1.0 - g * g)
        dW2 = (h.T @ dz2) / n
        db2 = dz2.mean(axis=0)
        dz1 = (dz2 @ W2.T) * (1.0 - h * h)
        dW1 = (X.T @ dz1) / n
        db1 = dz1.mean(axis=0)
        return self.layout.pack(dW1, db1, dW2, db2, dw3, db3) + self.beta * theta

    def grad_theta(self, theta: Vec, sample: Sample) -> Vec:
        if sample.y not in (0, 1):
            raise ValueError(f"label {sample.y} outside 01 encoding")
        return self.batch_grad(theta, sample.x[None, :], np.array([float(sample.y)]))

    def grad_matrix(self, theta: Vec, X: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Per-sample parameter gradients stacked as rows, shape (n, size)."""
        self._check_theta(theta)
        n = X.shape[0]
        W1, b1, W2, b2, w3, b3 = self.layout.unpack(theta)
        h, g, du = self._du_chain(theta, X, y)
        dz2 = (du[:, None] * w3) * (1.0 - g * g)
        dz1 = (dz2 @ W2.T) * (1.0 - h * h)
        out = np.empty((n, self.layout.size))
        d_in, h1, h2 = self.layout.d_in, self.layout.h1, self.layout.h2
        o = 0
        out[:, o : o + d_in * h2] = (X[:, :, None] * dz1[:, None, :]).reshape(n, -1)
        o += d_in * h2
        out[:, o : o + h2] = dz1; o += h2
        out[:, o : o + h2 * h1] = (h[:, :, None] * dz2[:, None, :]).reshape(n, -1)
        o += h2 * h1
        out[:, o : o + h1] = dz2; o += h1
        out[:, o : o + h1] = du[:, None] * g; o += h1
        out[:, o] = du
        return out + self.beta * theta

    def batch_grad_x(self, theta: Vec, X: np.ndarray) -> np.ndarray:
        """Gradient of the (clamped) forward output w.r.t. each input row."""
        self._check_theta(theta)
        _check_dim("batch_grad_x", X.shape[1], self.layout.d_in)
        W1, b1, W2, b2, w3, b3 = self.layout.unpack(theta)
        h, g, dpdu = self._du_chain(theta, X, None)
        dz2 = (1.0 - g * g) * w3
        dz1 = (dz2 @ W2.T) * (1.0 - h * h)
        return dpdu[:, None] * (dz1 @ W1.T)

    def grad_x(self, theta: Vec, x: Vec) -> Vec:
        return self.batch_grad_x(theta, x[None, :])[0]

    def decision(self, theta: Vec, X: np.ndarray) -> np.ndarray:
        return (self.batch_forward(theta, X) >= 0.5).astype(np.int64)


def accuracy(model, theta: Vec, data: BaseDataset) -> float:
    """Fraction of correct decisions of ``model`` at ``theta`` on ``data``."""
    if data.encoding != model.encoding:
        raise ValueError(
            f"dataset encoding {data.encoding!r} does not match "
            f"model encoding {model.encoding!r}"
        )
    preds = model.decision(theta, data.X)
    return float(np.mean(preds == data.y))
