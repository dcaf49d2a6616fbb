"""Shared primitives: points, discrete spaces, randomness and acceptance rules.

Every sampler and analysis module builds on the pieces defined here.
Densities are always *unnormalized*: the acceptance rules only ever use
ratios, so normalization constants are never computed.
"""
import logging
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

# Absolute tolerance for "equals 0" / "equals 1" checks on probabilities
PROB_ATOL = 1e-12


class ZeroDensityError(ValueError):
    """Raised when an acceptance ratio would divide by a zero density."""


class InconsistentEvaluationError(ValueError):
    """Raised when a point is re-archived with a different target value."""


class NonDiagonalisableError(ValueError):
    """Raised when two importance ratios are tied (or nearly tied).

    Attributes
    ----------
    pair : tuple of int
        Original (1-based) labels of the two offending states.
    """

    def __init__(self, message: str, pair: Tuple[int, int]):
        super().__init__(message)
        self.pair = pair


class MinorisationError(ValueError):
    """Raised when no minorisation certificate exists for the given inputs."""


def as_point(coords: Union[float, Sequence[float], np.ndarray], dim: Optional[int] = None) -> np.ndarray:
    """Convert ``coords`` to a finite 1-D float array.

    Parameters
    ----------
    coords : float or sequence of float
        Model-space coordinates. A scalar is treated as a 1-D point.
    dim : int, optional
        If given, the expected dimension of the point.

    Returns
    -------
    np.ndarray
        Array of shape ``(d,)``.

    Raises
    ------
    ValueError
        If a coordinate is NaN/Inf or the dimension does not match.
    """
    point = np.atleast_1d(np.asarray(coords, dtype=float))
    if point.ndim != 1 or point.size == 0:
        raise ValueError(f"A point must be a non-empty vector of coordinates, got shape {point.shape}")
    if not np.all(np.isfinite(point)):
        raise ValueError(f"All coordinates of a point must be finite, got {point.tolist()}")
    if dim is not None and point.size != dim:
        raise ValueError(f"Expected a point of dimension {dim}, got {point.size}")
    return point


def as_distribution(masses: Iterable[float], name: str = "distribution",
                    strictly_positive: bool = False, atol: float = PROB_ATOL) -> np.ndarray:
    """Validate a probability vector on a finite space.

    Parameters
    ----------
    masses : iterable of float
    name : str
        Used in error messages.
    strictly_positive : bool, default is False
        If True, zero entries are rejected.
    atol : float
        Tolerance on the total mass.
    """
    dist = np.asarray(list(masses) if not isinstance(masses, np.ndarray) else masses, dtype=float)
    if dist.ndim != 1 or dist.size == 0:
        raise ValueError(f"{name} must be a non-empty vector, got shape {dist.shape}")
    if not np.all(np.isfinite(dist)) or np.any(dist < 0):
        raise ValueError(f"{name} must have finite non-negative entries, got {dist.tolist()}")
    if strictly_positive and np.any(dist == 0):
        zero = int(np.flatnonzero(dist == 0)[0]) + 1
        raise ValueError(f"{name} must be strictly positive, state {zero} has zero mass")
    if abs(dist.sum() - 1.0) > atol:
        raise ValueError(f"{name} must sum to 1 (within {atol}), got {dist.sum()!r}")
    return dist


def normalize(masses: Iterable[float], name: str = "masses") -> np.ndarray:
    """Scale non-negative ``masses`` so that they sum to one."""
    values = np.asarray(list(masses) if not isinstance(masses, np.ndarray) else masses, dtype=float)
    total = values.sum()
    if not np.isfinite(total) or total <= 0:
        raise ValueError(f"Cannot normalize {name}: total mass is {total!r}")
    return values / total


class DiscreteSpace:
    """A finite state space with labels ``1..n``.

    States are stored as 1-D points whose single coordinate is the label, so
    that discrete and continuous chains share the same machinery.
    """

    def __init__(self, n: int):
        if n < 2:
            raise ValueError(f"A discrete space needs at least 2 states, got n={n}")
        self.n = int(n)

    @property
    def labels(self) -> np.ndarray:
        return np.arange(1, self.n + 1)

    def points(self) -> np.ndarray:
        """All states as an ``(n, 1)`` array of points."""
        return self.labels.astype(float).reshape(-1, 1)

    def label_of(self, point: np.ndarray) -> Optional[int]:
        """Return the label of ``point`` or None if it is not a state."""
        value = float(point[0])
        label = int(round(value))
        if label != value or not 1 <= label <= self.n:
            return None
        return label

    def __repr__(self) -> str:
        return f"DiscreteSpace(n={self.n})"


class RngStream:
    """A reproducible stream of random numbers.

    Identical ``(seed, stream)`` pairs always yield identical draws. Child
    streams (one per replicate, say) are derived with :meth:`child` and are
    statistically independent of their parent.

    Parameters
    ----------
    seed : int
        Non-negative 64-bit seed.
    stream : int, default is 0
        Stream identifier.
    """

    def __init__(self, seed: int, stream: int = 0, _key: Tuple[int, ...] = ()):
        if seed < 0 or seed >= 2**64:
            raise ValueError(f"seed must be a 64-bit non-negative integer, got {seed}")
        self.seed = int(seed)
        self.stream = int(stream)
        self._key = _key or (self.stream,)
        sequence = np.random.SeedSequence(self.seed, spawn_key=self._key)
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def child(self, index: int) -> "RngStream":
        """Independent sub-stream number ``index``."""
        return RngStream(self.seed, self.stream, _key=self._key + (int(index),))

    def uniform(self) -> float:
        """One draw from Uniform(0, 1)."""
        return float(self.generator.random())

    def categorical(self, probabilities: np.ndarray) -> int:
        """Draw an index from ``probabilities`` using exactly one uniform."""
        cdf = np.cumsum(probabilities)
        index = int(np.searchsorted(cdf, self.uniform() * cdf[-1], side="right"))
        return min(index, len(cdf) - 1)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream})"


def accept_ratio_mh(p_current: float, p_candidate: float, q_fwd: float, q_bwd: float) -> float:
    """Metropolis-Hastings acceptance probability.

    Computes ``min(1, (p_candidate / p_current) * (q_bwd / q_fwd))``. The same
    rule is used by the moving-target sampler with approximate densities.

    Parameters
    ----------
    p_current : float
        Unnormalized density at the current state, must be > 0.
    p_candidate : float
        Unnormalized density at the candidate.
    q_fwd : float
        Proposal density from current to candidate, must be > 0.
    q_bwd : float
        Proposal density from candidate back to current.

    Raises
    ------
    ZeroDensityError
        If ``p_current`` or ``q_fwd`` is zero.
    """
    if p_current < 0 or p_candidate < 0 or q_fwd < 0 or q_bwd < 0:
        raise ValueError(
            f"Densities must be non-negative, got p_current={p_current}, p_candidate={p_candidate}, "
            f"q_fwd={q_fwd}, q_bwd={q_bwd}"
        )
    if p_current == 0 or q_fwd == 0:
        raise ZeroDensityError(
            f"undefined acceptance ratio: p_current={p_current}, q_fwd={q_fwd}"
        )
    ratio = (p_candidate / p_current) * (q_bwd / q_fwd)
    return min(1.0, ratio)


def bernoulli_accept(rng: RngStream, alpha: float) -> bool:
    """Accept with probability ``alpha``, consuming exactly one uniform draw.

    The comparison is strict (``u < alpha``).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return rng.uniform() < alpha


def box_grid(lower: Sequence[float], upper: Sequence[float], size: int) -> np.ndarray:
    """Regular grid over a box, ``size`` points per axis.

    Returns
    -------
    np.ndarray
        Array of shape ``(size**d, d)``.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    if lower.shape != upper.shape or np.any(upper <= lower):
        raise ValueError(f"Invalid box: lower={lower.tolist()}, upper={upper.tolist()}")
    axes = [np.linspace(lo, hi, size) for lo, hi in zip(lower, upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def write_csv(frame: pd.DataFrame, path: Union[str, Path], header: Sequence[str] = ()) -> Path:
    """Write ``frame`` as CSV preceded by ``header`` lines as ``#`` comments."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as f:
        for line in header:
            f.write(f"# {line}\n")
        frame.to_csv(f, index=False, lineterminator="\n", na_rep="")
    return path
