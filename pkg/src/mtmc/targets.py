"""Unnormalized target densities (likelihood times prior).

A target is the expensive oracle of the samplers: every call to
:meth:`TargetDensity.evaluate` is what the evaluation ledger counts. The
prior is a uniform box (``lower``/``upper``), so points outside the box have
zero density and can be recognised without calling the likelihood.
"""
from typing import Callable, List, Optional, Sequence

import numpy as np

from .core import DiscreteSpace, as_point


class TargetDensity:
    """Base class for unnormalized densities ``p(x) = likelihood(x) * prior(x)``.

    Subclasses implement :meth:`_density`, the value inside the support box.

    Parameters
    ----------
    dim : int
        Dimension of the model space.
    lower, upper : sequence of float, optional
        Support box of the uniform prior. Unbounded if omitted.
    cost_per_eval : float, default is 1.0
        Abstract work units charged for each evaluation.
    """

    def __init__(self, dim: int, lower: Optional[Sequence[float]] = None,
                 upper: Optional[Sequence[float]] = None, cost_per_eval: float = 1.0):
        self.dim = int(dim)
        self.lower = None if lower is None else np.asarray(lower, dtype=float).reshape(self.dim)
        self.upper = None if upper is None else np.asarray(upper, dtype=float).reshape(self.dim)
        if self.lower is not None and self.upper is not None and np.any(self.upper <= self.lower):
            raise ValueError(f"Empty support box: lower={self.lower.tolist()}, upper={self.upper.tolist()}")
        if cost_per_eval < 0:
            raise ValueError(f"cost_per_eval must be non-negative, got {cost_per_eval}")
        self.cost_per_eval = float(cost_per_eval)

    @property
    def is_discrete(self) -> bool:
        return False

    def in_support(self, x: np.ndarray) -> bool:
        """Whether ``x`` lies in the support box of the prior."""
        if self.lower is not None and np.any(x < self.lower):
            return False
        if self.upper is not None and np.any(x > self.upper):
            return False
        return True

    def evaluate(self, x) -> float:
        """Unnormalized density at ``x`` (zero outside the support)."""
        x = as_point(x, self.dim)
        if not self.in_support(x):
            return 0.0
        value = float(self._density(x))
        if not np.isfinite(value) or value < 0:
            raise ValueError(f"{type(self).__name__} returned an invalid density {value!r} at {x.tolist()}")
        return value

    def evaluate_many(self, points: np.ndarray) -> np.ndarray:
        return np.array([self.evaluate(x) for x in np.atleast_2d(points)])

    def _density(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"


class FunctionTarget(TargetDensity):
    """Wrap a user callable ``func(x) -> float`` as a target."""

    def __init__(self, func: Callable[[np.ndarray], float], dim: int, lower=None, upper=None,
                 cost_per_eval: float = 1.0):
        super().__init__(dim, lower, upper, cost_per_eval)
        self.func = func

    def _density(self, x):
        return self.func(x)


class DiscreteTableTarget(TargetDensity):
    """Target on the finite space ``{1, ..., n}`` given by a table of masses.

    Points are 1-D with the state label as coordinate; non-label points
    have zero density.
    """

    def __init__(self, masses: Sequence[float], cost_per_eval: float = 1.0):
        masses = np.asarray(masses, dtype=float)
        if masses.ndim != 1 or np.any(masses <= 0) or not np.all(np.isfinite(masses)):
            raise ValueError(f"Discrete masses must be finite and strictly positive, got {masses.tolist()}")
        self.space = DiscreteSpace(masses.size)
        super().__init__(1, [1.0], [float(masses.size)], cost_per_eval)
        self.masses = masses

    @property
    def is_discrete(self) -> bool:
        return True

    @property
    def probabilities(self) -> np.ndarray:
        return self.masses / self.masses.sum()

    def _density(self, x):
        label = self.space.label_of(x)
        if label is None:
            return 0.0
        return self.masses[label - 1]


class GaussianTarget(TargetDensity):
    """Gaussian-shaped bump ``exp(-|(x - mean) / scale|^2 / 2)`` on a box."""

    def __init__(self, mean: Sequence[float], scale: Sequence[float], lower=None, upper=None,
                 cost_per_eval: float = 1.0):
        mean = np.asarray(mean, dtype=float)
        super().__init__(mean.size, lower, upper, cost_per_eval)
        self.mean = mean
        self.scale = np.broadcast_to(np.asarray(scale, dtype=float), mean.shape).copy()
        if np.any(self.scale <= 0):
            raise ValueError(f"scale must be positive, got {self.scale.tolist()}")

    def _density(self, x):
        z = (x - self.mean) / self.scale
        return np.exp(-0.5 * np.dot(z, z))


class MixtureTarget(TargetDensity):
    """Weighted sum of isotropic Gaussian-shaped bumps.

    Parameters
    ----------
    centers : list of list of float
        One center per bump, each of dimension d.
    widths : list of float
        One isotropic width per bump.
    weights : list of float
        Positive weight of each bump.
    """

    def __init__(self, centers: List[Sequence[float]], widths: Sequence[float], weights: Sequence[float],
                 lower=None, upper=None, cost_per_eval: float = 1.0):
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        super().__init__(centers.shape[1], lower, upper, cost_per_eval)
        self.centers = centers
        self.widths = np.asarray(widths, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        n_bumps = centers.shape[0]
        if self.widths.shape != (n_bumps,) or self.weights.shape != (n_bumps,):
            raise ValueError(
                f"Expected {n_bumps} widths and weights, got {self.widths.size} and {self.weights.size}"
            )
        if np.any(self.widths <= 0) or np.any(self.weights <= 0):
            raise ValueError("Mixture widths and weights must be strictly positive")

    def _density(self, x):
        sq = np.sum((self.centers - x) ** 2, axis=1) / self.widths ** 2
        return np.dot(self.weights, np.exp(-0.5 * sq))


class GridTableTarget(TargetDensity):
    """Piecewise constant density given by values on a regular cell grid.

    Parameters
    ----------
    lower, upper : sequence of float
        Box covered by the table.
    shape : sequence of int
        Number of cells along each axis.
    values : sequence of float
        Strictly positive cell values in C order, ``prod(shape)`` entries.
    """

    def __init__(self, lower: Sequence[float], upper: Sequence[float], shape: Sequence[int],
                 values: Sequence[float], cost_per_eval: float = 1.0):
        shape = tuple(int(s) for s in shape)
        super().__init__(len(shape), lower, upper, cost_per_eval)
        values = np.asarray(values, dtype=float)
        if values.size != int(np.prod(shape)):
            raise ValueError(f"Grid table of shape {shape} needs {int(np.prod(shape))} values, got {values.size}")
        if not np.all(values > 0):
            zero = int(np.flatnonzero(~(values > 0))[0])
            raise ValueError(f"Grid table values must be strictly positive, cell {zero} has {values[zero]!r}")
        self.shape = shape
        self.values = values.reshape(shape)

    def _density(self, x):
        fractions = (x - self.lower) / (self.upper - self.lower)
        cells = np.minimum((fractions * np.asarray(self.shape)).astype(int), np.asarray(self.shape) - 1)
        return self.values[tuple(cells)]
