"""Proposal kernels ``Q(x, y)`` used to generate candidate moves."""
from typing import Optional, Sequence

import numpy as np

from .core import RngStream, as_distribution, as_point

SYMMETRIC = "symmetric-random-walk"
INDEPENDENT = "independent"
GENERAL = "general"


class Proposal:
    """Base class for proposal kernels.

    Subclasses set :attr:`kind` and implement :meth:`sample` and
    :meth:`density`. ``sample`` may consume any number of draws from the
    stream but must be deterministic given its state.
    """
    kind: str = GENERAL

    def sample(self, rng: RngStream, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def density(self, x: np.ndarray, y: np.ndarray) -> float:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}(kind={self.kind!r})"


class RandomWalkProposal(Proposal):
    """Gaussian random walk ``y = x + scale * N(0, I)`` (symmetric).

    Parameters
    ----------
    scale : float or sequence of float
        Step size per coordinate.
    dim : int, optional
        Dimension, used to broadcast a scalar ``scale``.
    """
    kind = SYMMETRIC

    def __init__(self, scale, dim: Optional[int] = None):
        scale = np.atleast_1d(np.asarray(scale, dtype=float))
        if dim is not None:
            scale = np.broadcast_to(scale, (dim,)).copy()
        if np.any(scale <= 0):
            raise ValueError(f"Random-walk scale must be positive, got {scale.tolist()}")
        self.scale = scale

    def sample(self, rng, x):
        return x + self.scale * rng.generator.standard_normal(x.shape)

    def density(self, x, y):
        z = (np.asarray(y) - np.asarray(x)) / self.scale
        norm = np.prod(np.sqrt(2 * np.pi) * np.broadcast_to(self.scale, z.shape))
        return float(np.exp(-0.5 * np.dot(z, z)) / norm)


class UniformProposal(Proposal):
    """Independent proposal, uniform over a box."""
    kind = INDEPENDENT

    def __init__(self, lower: Sequence[float], upper: Sequence[float]):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.shape != self.upper.shape or np.any(self.upper <= self.lower):
            raise ValueError(f"Invalid proposal box: lower={self.lower.tolist()}, upper={self.upper.tolist()}")
        self._density = 1.0 / float(np.prod(self.upper - self.lower))

    def sample(self, rng, x):
        return rng.generator.uniform(self.lower, self.upper)

    def density(self, x, y):
        y = np.asarray(y)
        if np.any(y < self.lower) or np.any(y > self.upper):
            return 0.0
        return self._density


class IndependentProposal(Proposal):
    """Independent proposal on the labels ``1..n`` of a finite space.

    ``density(x, y) = masses[y - 1]`` whatever the current state ``x``.
    """
    kind = INDEPENDENT

    def __init__(self, masses: Sequence[float]):
        self.masses = as_distribution(masses, name="proposal masses", strictly_positive=True, atol=1e-9)

    @property
    def n(self) -> int:
        return self.masses.size

    def sample(self, rng, x):
        return np.array([float(rng.categorical(self.masses) + 1)])

    def density(self, x, y):
        label = _label(y, self.n)
        return 0.0 if label is None else float(self.masses[label - 1])


class KernelProposal(Proposal):
    """General proposal on ``1..n`` given by a row-stochastic matrix ``Q[i, j]``."""
    kind = GENERAL

    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"Proposal matrix must be square, got shape {matrix.shape}")
        for i, row in enumerate(matrix):
            as_distribution(row, name=f"proposal row {i + 1}", atol=1e-9)
        self.matrix = matrix
        if np.allclose(matrix, matrix.T, atol=0, rtol=0):
            self.kind = SYMMETRIC

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def sample(self, rng, x):
        i = _label(x, self.n)
        if i is None:
            raise ValueError(f"Current state {np.asarray(x).tolist()} is not a label of a {self.n}-state space")
        return np.array([float(rng.categorical(self.matrix[i - 1]) + 1)])

    def density(self, x, y):
        i, j = _label(x, self.n), _label(y, self.n)
        if i is None or j is None:
            return 0.0
        return float(self.matrix[i - 1, j - 1])


def _label(point, n: int) -> Optional[int]:
    value = float(as_point(point)[0])
    label = int(round(value))
    if label != value or not 1 <= label <= n:
        return None
    return label
