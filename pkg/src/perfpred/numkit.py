"""Numerical plumbing: dense float64 vectors, splittable random streams, and a
central-difference gradient probe.

Every routine in this library that consumes randomness takes an explicit
:class:`RngStream`; nothing reads global RNG state.  Streams are keyed by a
seed plus a path of fork ids, so any subsystem can derive its own substream
without coordinating with the rest of the program.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

# A Vec is a plain 1-D float64 ndarray.  Kept as an alias rather than a
# wrapper class so that all of numpy keeps working on it.
Vec = np.ndarray


def as_vec(values) -> Vec:
    """Coerce ``values`` to a finite 1-D float64 vector.

    Raises ValueError on wrong rank or non-finite entries.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got array of shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector contains non-finite entries")
    return v


class RngStream:
    """Deterministic splittable random stream.

    A stream is fully identified by ``(seed, path)``: constructing the same
    pair twice yields the same draw sequence, independent of how much any
    other stream (including the parent) has been consumed.  ``fork(i)``
    appends ``i`` to the path, so forking is associative in the path of ids.
    Backed by the counter-based Philox bit generator.
    """

    __slots__ = ("seed", "path", "_gen")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        self._gen: np.random.Generator | None = None

    def fork(self, child_id: int) -> "RngStream":
        """Child stream ``child_id``; independent of this stream's state."""
        return RngStream(self.seed, self.path + (int(child_id),))

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
            self._gen = np.random.Generator(np.random.Philox(ss))
        return self._gen

    # Thin draw helpers so call sites do not touch .generator directly.
    def normal(self, size=None) -> np.ndarray:
        return self.generator.standard_normal(size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None) -> np.ndarray:
        return self.generator.uniform(low, high, size)

    def integers(self, low: int, high: int | None = None, size=None) -> np.ndarray:
        return self.generator.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RngStream)
            and self.seed == other.seed
            and self.path == other.path
        )

    def __hash__(self) -> int:
        return hash((self.seed, self.path))


def rng_fork(stream: RngStream, child_id: int) -> RngStream:
    """Functional alias for :meth:`RngStream.fork`."""
    return stream.fork(child_id)


def fd_gradient(f: Callable[[Vec], float], theta: Vec, h: float = 1e-5) -> Vec:
    """Central-difference gradient of a scalar function.

    Entry ``i`` is ``(f(theta + h e_i) - f(theta - h e_i)) / (2 h)``, which is
    exact up to rounding for polynomials of degree <= 2.  Used throughout the
    test suite as the independent oracle for hand-derived gradients.

    Raises ValueError if ``h <= 0`` or if a probe evaluates to a non-finite
    value (the message names the offending coordinate).
    """
    theta = as_vec(theta)
    if h <= 0:
        raise ValueError(f"step size must be positive, got {h}")
    grad = np.empty_like(theta)
    probe = theta.copy()
    for i in range(theta.size):
        orig = probe[i]
        probe[i] = orig + h
        f_plus = float(f(probe))
        probe[i] = orig - h
        f_minus = float(f(probe))
        probe[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise ValueError(
                f"non-finite function value while probing coordinate {i}"
            )
        grad[i] = (f_plus - f_minus) / (2.0 * h)
    return grad
