"""Convergence measurements for live runs.

Total variation is always half the L1 distance, either exactly on a finite
space or against a declared binning on continuous spaces.
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy import integrate

from .approx import ApproximationState
from .core import as_distribution, normalize
from .samplers import ChainRun
from .spectral import TransitionMatrix, build_kernel

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

EXACT_DISCRETE = "exact-discrete"
HISTOGRAM_BINNED = "histogram-binned"


@dataclass(frozen=True)
class Binning:
    """Regular bins over a box, or the labels of a finite space.

    ``labels`` is set for discrete spaces, in which case every label is its
    own bin.
    """
    lower: np.ndarray
    upper: np.ndarray
    bins: tuple
    labels: Optional[np.ndarray] = None

    @classmethod
    def uniform(cls, lower, upper, bins) -> "Binning":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        bins = tuple(int(b) for b in np.broadcast_to(np.asarray(bins), lower.shape))
        if any(b < 1 for b in bins):
            raise ValueError(f"Every axis needs at least one bin, got {bins}")
        if np.any(upper <= lower):
            raise ValueError(f"Invalid binning box: lower={lower.tolist()}, upper={upper.tolist()}")
        return cls(lower=lower, upper=upper, bins=bins)

    @classmethod
    def discrete(cls, n: int) -> "Binning":
        return cls(lower=np.array([1.0]), upper=np.array([float(n)]), bins=(n,), labels=np.arange(1, n + 1))

    @property
    def n_bins(self) -> int:
        return int(np.prod(self.bins))

    @property
    def edges(self) -> List[np.ndarray]:
        return [np.linspace(lo, hi, b + 1) for lo, hi, b in zip(self.lower, self.upper, self.bins)]

    def describe(self) -> Dict:
        if self.labels is not None:
            return {"kind": "labels", "n": int(self.labels.size)}
        return {"kind": "uniform", "lower": self.lower.tolist(), "upper": self.upper.tolist(), "bins": list(self.bins)}


@dataclass(frozen=True)
class TvEstimate:
    value: float
    scheme: str
    binning: Optional[Binning] = None
    n_samples: Optional[int] = None


@dataclass(frozen=True)
class GenerationGap:
    """``delta_m`` (model error) and ``D_m`` (kernel change) at generation ``m``.

    ``D_m`` is NaN when generation ``m + 1`` is not available.
    """
    m: int
    delta_m: float
    D_m: float


def tv_discrete(p, q) -> TvEstimate:
    """Total variation between two distributions on the same finite space."""
    p = as_distribution(p, name="p", atol=1e-9)
    q = as_distribution(q, name="q", atol=1e-9)
    if p.size != q.size:
        raise ValueError(f"Distributions live on different spaces: {p.size} vs {q.size} states")
    return TvEstimate(value=float(0.5 * np.abs(p - q).sum()), scheme=EXACT_DISCRETE)


def tv_by_subsets(p, q) -> float:
    """``max_B |p(B) - q(B)|`` by enumerating all subsets (small spaces only)."""
    diff = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    n = diff.size
    if n > 20:
        raise ValueError(f"Subset enumeration is limited to 20 states, got {n}")
    masks = (np.arange(2 ** n)[:, None] >> np.arange(n)[None, :]) & 1
    return float(np.max(np.abs(masks @ diff)))


def bin_masses(target, binning: Binning, points_per_axis: int = 5) -> np.ndarray:
    """Normalized target mass of each bin (C order).

    Finite spaces use the exact masses. In 1-D each bin is integrated by
    adaptive quadrature; in higher dimensions a midpoint rule with
    ``points_per_axis`` nodes per bin and axis is used.
    """
    if binning.labels is not None:
        return normalize([target.evaluate([label]) for label in binning.labels], name="target masses")
    edges = binning.edges
    if len(edges) == 1:
        e = edges[0]
        masses = [integrate.quad(lambda t: target.evaluate([t]), lo, hi, limit=100)[0] for lo, hi in zip(e[:-1], e[1:])]
        return normalize(np.clip(masses, 0.0, None), name="binned target mass")

    fine_axes = []
    for e in edges:
        width = np.diff(e)
        offsets = (np.arange(points_per_axis) + 0.5) / points_per_axis
        fine_axes.append((e[:-1, None] + width[:, None] * offsets[None, :]).ravel())
    mesh = np.meshgrid(*fine_axes, indexing="ij")
    values = target.evaluate_many(np.stack([m.ravel() for m in mesh], axis=1)).reshape([a.size for a in fine_axes])
    for axis, b in enumerate(binning.bins):
        shape = values.shape[:axis] + (b, points_per_axis) + values.shape[axis + 1:]
        values = values.reshape(shape).sum(axis=axis + 1)
    return normalize(values.ravel(), name="binned target mass")


def _samples(trace):
    return trace.trace if isinstance(trace, ChainRun) else trace


def empirical_bin_frequencies(trace: np.ndarray, binning: Binning) -> np.ndarray:
    trace = np.atleast_2d(np.asarray(trace, dtype=float))
    if binning.labels is not None:
        counts = np.array([(trace[:, 0] == label).sum() for label in binning.labels], dtype=float)
    else:
        counts, _ = np.histogramdd(trace, bins=binning.edges)
        counts = counts.ravel()
    return counts / trace.shape[0]


def tv_histogram(trace, target, binning: Binning, masses: Optional[np.ndarray] = None) -> TvEstimate:
    """Binned total variation between the empirical trace and the target.

    Parameters
    ----------
    trace : np.ndarray or ChainRun
        Samples as rows (a ``ChainRun`` contributes its full trace).
    target : TargetDensity
    binning : Binning
    masses : np.ndarray, optional
        Pre-computed :func:`bin_masses`, reused across checkpoints.
    """
    trace = np.atleast_2d(np.asarray(_samples(trace), dtype=float))
    if trace.shape[0] == 0:
        raise ValueError("tv_histogram needs at least one sample")
    if binning.n_bins == 0:
        raise ValueError("tv_histogram needs a non-empty binning")
    masses = bin_masses(target, binning) if masses is None else masses
    freqs = empirical_bin_frequencies(trace, binning)
    value = float(0.5 * np.abs(freqs - masses).sum())
    return TvEstimate(value=value, scheme=HISTOGRAM_BINNED, binning=binning, n_samples=trace.shape[0])


def frozen_grid_kernel(state: ApproximationState, grid: np.ndarray, proposal=None) -> TransitionMatrix:
    """The frozen-generation kernel restricted to a finite grid.

    The approximation is normalized over the grid. ``proposal`` holds
    independent masses or a proposal matrix on the grid; uniform independent
    masses if omitted. Builds a dense matrix, so keep the grid small.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    a = normalize(state.evaluate_many(grid), name=f"generation {state.generation} on the grid")
    Q = np.full(grid.shape[0], 1.0 / grid.shape[0]) if proposal is None else proposal
    return build_kernel(a, Q)


def _independent_rows(a: np.ndarray, Q: np.ndarray, rows: np.ndarray) -> np.ndarray:
    # Off-diagonal entries of the independent-proposal kernel: min(Q_j, a_j Q_i / a_i)
    block = np.minimum(Q[None, :], a[None, :] * (Q[rows] / a[rows])[:, None])
    block[np.arange(rows.size), rows] = 0.0
    return block


def kernel_change(a_before, a_after, proposal_masses=None, block_rows: int = 64) -> float:
    """``D = sup_x |P_after(x, .) - P_before(x, .)|_TV`` for an independent proposal.

    Rows are built ``block_rows`` at a time, so memory stays linear in the
    number of states.

    Parameters
    ----------
    a_before, a_after : sequence of float
        Normalized, strictly positive approximations on the same states.
    proposal_masses : sequence of float, optional
        Independent proposal, uniform if omitted.
    block_rows : int
    """
    a0 = as_distribution(a_before, name="approximation before", strictly_positive=True, atol=1e-9)
    a1 = as_distribution(a_after, name="approximation after", strictly_positive=True, atol=1e-9)
    if a0.size != a1.size:
        raise ValueError(f"Approximations live on different spaces: {a0.size} vs {a1.size} states")
    n = a0.size
    Q = np.full(n, 1.0 / n) if proposal_masses is None else as_distribution(
        proposal_masses, name="proposal", strictly_positive=True, atol=1e-9)
    if Q.size != n:
        raise ValueError(f"approximation has {n} states but proposal has {Q.size}")

    worst = 0.0
    for start in range(0, n, block_rows):
        rows = np.arange(start, min(start + block_rows, n))
        off0 = _independent_rows(a0, Q, rows)
        off1 = _independent_rows(a1, Q, rows)
        # Diagonals are 1 minus the off-diagonal row sums
        stay = np.abs(off1.sum(axis=1) - off0.sum(axis=1))
        tv = 0.5 * (np.abs(off1 - off0).sum(axis=1) + stay)
        worst = max(worst, float(tv.max()))
    return worst


def generation_gaps(history: Sequence[ApproximationState], target, grid,
                    generations: Optional[Sequence[int]] = None,
                    proposal_masses: Optional[Sequence[float]] = None) -> List[GenerationGap]:
    """``delta_m`` and ``D_m`` for the requested generations.

    Parameters
    ----------
    history : sequence of ApproximationState
        Snapshots ordered by generation.
    target : TargetDensity
    grid : array of points
    generations : sequence of int, optional
        Generations to report; every snapshot in ``history`` if omitted.
        Generations beyond the last snapshot are skipped.
    proposal_masses : sequence of float, optional
        Independent proposal on the grid, uniform if omitted.
    """
    if len(history) < 2:
        raise ValueError(f"generation_gaps needs at least 2 snapshots, got {len(history)}")
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    by_generation = {state.generation: state for state in history}
    exact = normalize(target.evaluate_many(grid), name="the target on the grid")
    wanted = sorted(by_generation) if generations is None else [m for m in generations if m in by_generation]

    def on_grid(m: int) -> np.ndarray:
        return normalize(by_generation[m].evaluate_many(grid), name=f"generation {m} on the grid")

    gaps = []
    for m in wanted:
        approx = on_grid(m)
        delta = tv_discrete(approx, exact).value
        if m + 1 in by_generation:
            D = kernel_change(approx, on_grid(m + 1), proposal_masses)
        else:
            D = float("nan")
        gaps.append(GenerationGap(m=m, delta_m=delta, D_m=D))
    logger.debug(f"Computed generation gaps for {len(gaps)} generations on {grid.shape[0]} grid points")
    return gaps


def detailed_balance_check(P, a) -> float:
    """``max_{i,j} |a(i) P(i,j) - a(j) P(j,i)|``."""
    P = np.asarray(getattr(P, "entries", P), dtype=float)
    a = np.asarray(a, dtype=float)
    if P.shape != (a.size, a.size):
        raise ValueError(f"Kernel of shape {P.shape} does not match a distribution on {a.size} states")
    flow = a[:, None] * P
    return float(np.max(np.abs(flow - flow.T)))


def make_observable(name: str) -> Callable[[np.ndarray], float]:
    """Observable from its name: ``identity`` (first coordinate) or ``indicator:<label>``."""
    if name == "identity":
        return lambda x: float(x[0])
    if name.startswith("indicator:"):
        label = float(name.split(":", 1)[1])
        return lambda x: 1.0 if float(x[0]) == label else 0.0
    raise ValueError(f"Unknown observable {name!r}, expected 'identity' or 'indicator:<label>'")


def ergodic_average(trace, e: Callable[[np.ndarray], float], bound: float) -> np.ndarray:
    """Running means ``sum_{k<=n} e(X_k) / n`` for ``n = 1..N``.

    Raises
    ------
    ValueError
        If ``|e|`` exceeds the declared ``bound`` on the trace.
    """
    trace = np.atleast_2d(np.asarray(_samples(trace), dtype=float))
    values = np.array([e(x) for x in trace], dtype=float)
    worst = np.max(np.abs(values))
    if worst > bound:
        raise ValueError(f"Observable is unbounded on the trace: |e| reaches {worst!r} > declared bound {bound!r}")
    return np.cumsum(values) / np.arange(1, values.size + 1)


def batch_means_stderr(values, n_batches: int = 20) -> float:
    """Standard error of a chain average from non-overlapping batch means."""
    values = np.asarray(values, dtype=float)
    size = values.size // n_batches
    if size < 1:
        raise ValueError(f"Need at least {n_batches} values for {n_batches} batches, got {values.size}")
    means = values[:size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))


@dataclass(frozen=True)
class ErrorBudget:
    mixing: float
    model_error: float

    @property
    def total(self) -> float:
        return min(1.0, self.mixing + self.model_error)


def error_budget(mixing_bound: Union[float, np.ndarray], delta_m: float) -> ErrorBudget:
    """Split ``|P_m^N(x, .) - p|`` into the mixing term and the model error ``delta_m``."""
    mixing = float(np.max(mixing_bound))
    if not 0.0 <= delta_m <= 1.0:
        raise ValueError(f"delta_m must be in [0, 1], got {delta_m}")
    return ErrorBudget(mixing=min(1.0, mixing), model_error=float(delta_m))
