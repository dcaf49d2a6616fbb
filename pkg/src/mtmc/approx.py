"""The moving approximation: nearest-neighbour interpolation of archived evaluations.

Every true evaluation ``(x_i, p(x_i))`` is archived. The approximation at a
query point is the value of its nearest archived point (Euclidean metric),
i.e. a constant on each Voronoi cell. Ties on cell boundaries go to the
record inserted first.

Notes
-----
:class:`ApproximationState` objects are immutable views over an
append-only archive: ``update`` returns a new state and leaves the old one
untouched, so snapshots of past generations stay valid and cheap.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from .core import InconsistentEvaluationError, as_point, write_csv

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())


@dataclass(frozen=True)
class EvaluationRecord:
    point: np.ndarray
    value: float
    index: int


class NearestNeighbourIndex:
    """Exact incremental nearest-neighbour search.

    Points are appended to a buffer that is scanned linearly; once the
    buffer outgrows ``max(rebuild_threshold, sqrt(size))`` a kd-tree is
    rebuilt over everything. Candidate sets from the tree and the buffer are
    resolved with the same squared-distance arithmetic as
    :meth:`brute_force_nearest`, so both always agree, including on ties
    (smallest insertion index wins).
    """

    def __init__(self, dim: int, rebuild_threshold: int = 64):
        self.dim = dim
        self.rebuild_threshold = rebuild_threshold
        self._points = np.empty((16, dim))
        self.size = 0
        self._tree: Optional[cKDTree] = None
        self._tree_size = 0

    @property
    def points(self) -> np.ndarray:
        return self._points[:self.size]

    def add(self, point: np.ndarray) -> int:
        if self.size == self._points.shape[0]:
            grown = np.empty((2 * self._points.shape[0], self.dim))
            grown[:self.size] = self._points[:self.size]
            self._points = grown
        self._points[self.size] = point
        self.size += 1
        if self.size - self._tree_size > max(self.rebuild_threshold, int(np.sqrt(self.size))):
            self._tree = cKDTree(self._points[:self.size].copy())
            self._tree_size = self.size
        return self.size - 1

    def copy_prefix(self, size: int) -> "NearestNeighbourIndex":
        clone = NearestNeighbourIndex(self.dim, self.rebuild_threshold)
        for point in self._points[:size]:
            clone.add(point)
        return clone

    def nearest(self, x: np.ndarray, size: Optional[int] = None) -> int:
        """Index of the archived point nearest to ``x`` among the first ``size``."""
        size = self.size if size is None else size
        if size == 0:
            raise ValueError("Nearest-neighbour query on an empty archive")
        if size != self.size or self._tree is None:
            return self.brute_force_nearest(x, size)

        distances, indices = self._tree.query(x, k=min(2, self._tree_size))
        distances, indices = np.atleast_1d(distances), np.atleast_1d(indices)
        radius = distances[0] * (1 + 1e-9) + 1e-300
        if distances.size > 1 and distances[1] <= radius:
            candidates = list(self._tree.query_ball_point(x, r=radius))
        else:
            candidates = [int(indices[0])]
        candidates.extend(range(self._tree_size, size))
        candidates = np.array(sorted(candidates))
        sq = np.sum((self._points[candidates] - x) ** 2, axis=1)
        return int(candidates[np.argmin(sq)])

    def brute_force_nearest(self, x: np.ndarray, size: Optional[int] = None) -> int:
        size = self.size if size is None else size
        sq = np.sum((self._points[:size] - x) ** 2, axis=1)
        return int(np.argmin(sq))


class _Archive:
    """Append-only storage shared by successive approximation states."""

    def __init__(self, dim: int):
        self.dim = dim
        self.index = NearestNeighbourIndex(dim)
        self.values: List[float] = []

    @property
    def size(self) -> int:
        return self.index.size

    def append(self, point: np.ndarray, value: float):
        self.index.add(point)
        self.values.append(value)

    def copy_prefix(self, size: int) -> "_Archive":
        clone = _Archive(self.dim)
        clone.index = self.index.copy_prefix(size)
        clone.values = self.values[:size]
        return clone


class ApproximationState:
    """Nearest-neighbour approximation ``a_m`` of the target at generation ``m``.

    Parameters
    ----------
    dim : int
        Dimension of the model space.
    fallback : float, default is 1.0
        Constant value used while the archive is empty.
    verify_index : bool, default is False
        If True, every query is cross-checked against a linear scan.
    """

    def __init__(self, dim: int, fallback: float = 1.0, verify_index: bool = False):
        if fallback < 0:
            raise ValueError(f"fallback must be non-negative, got {fallback}")
        self.dim = int(dim)
        self.fallback = float(fallback)
        self.verify_index = verify_index
        self.generation = 0
        self._archive = _Archive(self.dim)
        self._size = 0

    @classmethod
    def _view(cls, parent: "ApproximationState", archive: _Archive, size: int) -> "ApproximationState":
        state = cls.__new__(cls)
        state.dim = parent.dim
        state.fallback = parent.fallback
        state.verify_index = parent.verify_index
        state.generation = parent.generation + 1
        state._archive = archive
        state._size = size
        return state

    @classmethod
    def from_target(cls, target, points: Iterable, fallback: float = 1.0, **kwargs) -> "ApproximationState":
        """Archive the true target at each of ``points``."""
        state = cls(target.dim, fallback=fallback, **kwargs)
        for point in points:
            state = state.update(point, target.evaluate(point))
        return state

    def __len__(self) -> int:
        return self._size

    @property
    def points(self) -> np.ndarray:
        return self._archive.index.points[:self._size]

    @property
    def values(self) -> np.ndarray:
        return np.asarray(self._archive.values[:self._size], dtype=float)

    @property
    def records(self) -> List[EvaluationRecord]:
        return [EvaluationRecord(self.points[i].copy(), self._archive.values[i], i) for i in range(self._size)]

    def nearest_index(self, x) -> int:
        x = as_point(x, self.dim)
        index = self._archive.index.nearest(x, self._size)
        if self.verify_index:
            expected = self._archive.index.brute_force_nearest(x, self._size)
            if index != expected:
                raise RuntimeError(f"Nearest-neighbour index returned {index}, linear scan {expected} at {x.tolist()}")
        return index

    def evaluate(self, x) -> float:
        """Value of the nearest archived record, or the fallback if empty."""
        if self._size == 0:
            return self.fallback
        return self._archive.values[self.nearest_index(x)]

    def evaluate_many(self, points: np.ndarray, chunk: int = 256) -> np.ndarray:
        """Vectorised :meth:`evaluate` over the rows of ``points``."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self._size == 0:
            return np.full(points.shape[0], self.fallback)
        archived = self.points
        values = self.values
        out = np.empty(points.shape[0])
        for start in range(0, points.shape[0], chunk):
            block = points[start:start + chunk]
            sq = np.sum((archived[None, :, :] - block[:, None, :]) ** 2, axis=2)
            out[start:start + chunk] = values[np.argmin(sq, axis=1)]
        return out

    def update(self, x, value: float) -> "ApproximationState":
        """Return the next generation with ``(x, value)`` archived.

        Raises
        ------
        InconsistentEvaluationError
            If ``x`` is already archived with a different value.
        """
        x = as_point(x, self.dim)
        value = float(value)
        if not np.isfinite(value) or value < 0:
            raise ValueError(f"Archived values must be finite and non-negative, got {value!r}")
        if self._size > 0:
            nearest = self.nearest_index(x)
            if np.array_equal(self.points[nearest], x):
                stored = self._archive.values[nearest]
                if stored != value:
                    raise InconsistentEvaluationError(
                        f"inconsistent re-evaluation at {x.tolist()}: archived {stored!r}, got {value!r}"
                    )
                return ApproximationState._view(self, self._archive, self._size)

        archive = self._archive
        if archive.size != self._size:
            # Branching from an old snapshot: later records must stay invisible.
            archive = archive.copy_prefix(self._size)
        archive.append(x, value)
        state = ApproximationState._view(self, archive, self._size + 1)
        logger.debug(f"Archive updated to generation {state.generation} with {len(state)} records")
        return state

    def __repr__(self) -> str:
        return f"ApproximationState(dim={self.dim}, records={self._size}, generation={self.generation})"


def _normalized_on_grid(values: np.ndarray, name: str) -> np.ndarray:
    total = values.sum()
    if not total > 0:
        raise ValueError(f"Cannot normalize {name} on the grid: all values are zero")
    return values / total


def sup_error(state: ApproximationState, target, grid: np.ndarray) -> float:
    """Max grid discrepancy between the approximation and the target.

    Both sides are normalized to sum to one over the grid first, since they
    carry different (unknown) constants.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if grid.shape[0] == 0:
        raise ValueError("sup_error needs a non-empty grid")
    approx = _normalized_on_grid(state.evaluate_many(grid), "the approximation")
    exact = _normalized_on_grid(target.evaluate_many(grid), "the target")
    return float(np.max(np.abs(approx - exact)))


def successive_differences(history: Sequence[ApproximationState], grid: np.ndarray) -> np.ndarray:
    """``max_x |a_{m+1}(x) - a_m(x)|`` on the grid (normalized), per update."""
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    normalized = [_normalized_on_grid(s.evaluate_many(grid), f"generation {s.generation}") for s in history]
    return np.array([np.max(np.abs(b - a)) for a, b in zip(normalized[:-1], normalized[1:])])


def save_archive(state: ApproximationState, path: Union[str, Path], header: Sequence[str] = ()) -> Path:
    """Write the archive as CSV: ``index, coord_0..coord_{d-1}, value``.

    ``header`` lines are written first as ``#`` comments.
    """
    frame = pd.DataFrame({"index": np.arange(len(state))})
    for k in range(state.dim):
        frame[f"coord_{k}"] = state.points[:, k]
    frame["value"] = state.values
    return write_csv(frame, path, header)


def load_archive(path: Union[str, Path], fallback: float = 1.0) -> ApproximationState:
    """Rebuild an :class:`ApproximationState` from :func:`save_archive` output."""
    frame = pd.read_csv(path, comment="#")
    coords = [c for c in frame.columns if c.startswith("coord_")]
    if not coords or "index" not in frame.columns or "value" not in frame.columns:
        raise ValueError(f"{path} is not an archive file: columns {list(frame.columns)}")
    frame = frame.sort_values("index")
    state = ApproximationState(len(coords), fallback=fallback)
    for point, value in zip(frame[coords].to_numpy(dtype=float), frame["value"].to_numpy(dtype=float)):
        state = state.update(point, value)
    return state
