"""Couplings and minorisation bounds on finite state spaces.

States are 0-based row indices of the transition matrix throughout this
module; callers working with 1-based labels convert at the boundary.
"""
import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .core import MinorisationError, RngStream, as_distribution
from .spectral import stationary_distribution

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

# Probability below which a mixture component is treated as absent
COMPONENT_ATOL = 1e-12


class CoupledStep(NamedTuple):
    x_next: int
    y_next: int
    coalesced: bool


def overlap(m1, m2) -> float:
    """``c1 = sum_j min(m1(j), m2(j))``, which equals ``1 - |m1 - m2|_TV``."""
    return float(np.minimum(np.asarray(m1, dtype=float), np.asarray(m2, dtype=float)).sum())


def maximal_coupling_draw(rng: RngStream, m1, m2) -> CoupledStep:
    """Draw ``(X, Y)`` with ``X ~ m1``, ``Y ~ m2`` and ``P(X != Y) = |m1 - m2|_TV``.

    With probability ``c1`` both take a common value drawn from
    ``min(m1, m2) / c1``; otherwise each is drawn from its normalized residual.
    """
    m1 = as_distribution(m1, name="m1", atol=1e-9)
    m2 = as_distribution(m2, name="m2", atol=1e-9)
    if m1.size != m2.size:
        raise ValueError(f"Distributions live on different spaces: {m1.size} vs {m2.size} states")
    common = np.minimum(m1, m2)
    c1 = float(common.sum())

    u = rng.uniform()
    if c1 >= 1.0 - COMPONENT_ATOL or (c1 > COMPONENT_ATOL and u < c1):
        z = rng.categorical(common / c1)
        return CoupledStep(z, z, True)
    rest = 1.0 - c1
    x = rng.categorical((m1 - common) / rest)
    y = rng.categorical((m2 - common) / rest)
    return CoupledStep(x, y, False)


@dataclass(frozen=True)
class MinorisationCertificate:
    """``P^{n0}(x, .) >= epsilon * gamma(.)`` for every ``x`` in ``region``.

    ``region`` holds 0-based state indices.
    """
    epsilon: float
    gamma: np.ndarray
    n0: int
    region: np.ndarray

    @property
    def is_doeblin(self) -> bool:
        return self.region.size == self.gamma.size

    def verify(self, P, atol: float = COMPONENT_ATOL) -> bool:
        skeleton = np.linalg.matrix_power(np.asarray(getattr(P, "entries", P), dtype=float), self.n0)
        floor = self.epsilon * self.gamma
        return bool(np.all(skeleton[self.region] >= floor[None, :] - atol))


def minorisation_certificate(P, n0: int = 1, region: Optional[Sequence[int]] = None) -> MinorisationCertificate:
    """Largest ``epsilon`` with ``P^{n0}(x, .) >= epsilon * gamma`` on ``region``.

    Parameters
    ----------
    P : TransitionMatrix or 2-D array
    n0 : int, default is 1
    region : sequence of int, optional
        0-based states; the whole space if omitted.

    Raises
    ------
    MinorisationError
        If the column minima over ``region`` vanish.
    """
    entries = np.asarray(getattr(P, "entries", P), dtype=float)
    n = entries.shape[0]
    if n0 < 1:
        raise ValueError(f"n0 must be a positive integer, got {n0}")
    region = np.arange(n) if region is None or len(region) == 0 else np.unique(np.asarray(region, dtype=int))
    if region.min() < 0 or region.max() >= n:
        raise ValueError(f"Region {region.tolist()} is not a set of states of a {n}-state space")

    skeleton = np.linalg.matrix_power(entries, n0)
    floor = skeleton[region].min(axis=0)
    epsilon = float(floor.sum())
    if epsilon <= COMPONENT_ATOL:
        raise MinorisationError(f"no uniform minorisation at this N0 (N0={n0}, epsilon={epsilon:.3g})")
    return MinorisationCertificate(epsilon=min(epsilon, 1.0), gamma=floor / epsilon, n0=n0, region=region)


def doeblin_epsilon(P, n0: int = 1) -> MinorisationCertificate:
    """Minorisation on the entire space: ``epsilon = sum_j min_i P^{n0}(i, j)``."""
    return minorisation_certificate(P, n0=n0, region=None)


def doeblin_tv_bound(epsilon: float, n0: int, N) -> np.ndarray:
    """``(1 - epsilon) ** ceil(N / n0)``."""
    return (1.0 - epsilon) ** np.ceil(np.asarray(N, dtype=float) / n0)


def rosenthal_bound(z_counts, epsilon: float, j_grid: Sequence[int], n0: int = 1) -> Tuple[float, int]:
    """Tightest ``(1 - epsilon) ** ceil(j / n0) + P(z_N < j)`` over ``j_grid``.

    ``z_counts`` are the numbers of visits of the pair chain to
    ``region x region`` up to the horizon, one per simulated pair.

    Returns
    -------
    bound, j : float, int
    """
    z = np.asarray(z_counts)
    if z.size == 0 or len(j_grid) == 0:
        raise ValueError("rosenthal_bound needs at least one pair count and one j")
    values = [(1.0 - epsilon) ** np.ceil(j / n0) + np.mean(z < j) for j in j_grid]
    best = int(np.argmin(values))
    return float(values[best]), int(j_grid[best])


@dataclass
class CouplingReport:
    """Outcome of repeated coupled runs.

    Times are counted in steps of the ``n0``-step skeleton. Runs that never
    use the common component carry ``steps + 1`` as coupling time and are
    flagged in ``coupled``.
    """
    certificate: MinorisationCertificate
    steps: int
    replicates: int
    seed: int
    coupling_times: np.ndarray
    coupled: np.ndarray
    meeting_times: np.ndarray
    z_counts: np.ndarray
    survival: np.ndarray
    unmet: np.ndarray
    tv_curve: np.ndarray
    bound_curve: np.ndarray
    empirical_tv: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def mean_coupling_time(self) -> float:
        return float(self.coupling_times.mean())

    @property
    def survival_stderr(self) -> np.ndarray:
        return np.sqrt(self.survival * (1.0 - self.survival) / self.replicates)

    @property
    def unmet_stderr(self) -> np.ndarray:
        return np.sqrt(self.unmet * (1.0 - self.unmet) / self.replicates)

    def envelope_holds(self, sigmas: float = 3.0) -> bool:
        """Exact TV below the empirical ``P(X_k != Y_k)`` up to ``sigmas`` standard errors.

        One replicate's worth of probability is added, since an unobserved
        event has a zero empirical standard error.
        """
        slack = sigmas * self.unmet_stderr + 1.0 / self.replicates
        return bool(np.all(self.tv_curve <= self.unmet + slack))


def coupled_run(rng: RngStream, P, p0, steps: int, replicates: int,
                certificate: Optional[MinorisationCertificate] = None) -> CouplingReport:
    """Simulate coupled chains ``X`` (from ``p0``) and ``Y`` (from stationarity).

    While both chains are in the certified region, with probability
    ``epsilon`` they jump together to a draw from ``gamma``; otherwise each
    moves with its residual kernel ``(K - epsilon gamma) / (1 - epsilon)``.
    Outside the region they move independently with ``K = P^{n0}``. Once
    equal, the chains move together.

    Parameters
    ----------
    rng : RngStream
        Replicate ``r`` uses ``rng.child(r)``.
    P : TransitionMatrix or 2-D array
    p0 : sequence of float
        Initial distribution of ``X``.
    steps : int
        Skeleton steps per replicate.
    replicates : int
    certificate : MinorisationCertificate, optional
        Defaults to the Doeblin certificate of ``P`` with ``n0 = 1``.

    Raises
    ------
    MinorisationError
        If ``certificate`` does not hold for ``P``.
    """
    entries = np.asarray(getattr(P, "entries", P), dtype=float)
    n = entries.shape[0]
    p0 = as_distribution(p0, name="initial distribution", atol=1e-9)
    if p0.size != n:
        raise ValueError(f"initial distribution has {p0.size} states, kernel has {n}")
    if steps < 0 or replicates < 1:
        raise ValueError(f"Need steps >= 0 and replicates >= 1, got steps={steps}, replicates={replicates}")
    certificate = doeblin_epsilon(entries) if certificate is None else certificate
    if not certificate.verify(entries):
        raise MinorisationError(
            f"Certificate (epsilon={certificate.epsilon}, N0={certificate.n0}) does not hold on "
            f"region {certificate.region.tolist()}"
        )

    K = np.linalg.matrix_power(entries, certificate.n0)
    pi = stationary_distribution(entries)
    eps = certificate.epsilon
    in_region = np.zeros(n, dtype=bool)
    in_region[certificate.region] = True
    if eps < 1.0 - COMPONENT_ATOL:
        residual = np.clip(K - eps * certificate.gamma[None, :], 0.0, None) / (1.0 - eps)
    else:
        residual = K

    coupling_times = np.full(replicates, steps + 1)
    meeting_times = np.full(replicates, steps + 1)
    z_counts = np.zeros(replicates, dtype=int)
    x_states = np.zeros((replicates, steps + 1), dtype=int)

    for r in range(replicates):
        stream = rng.child(r)
        x, y = stream.categorical(p0), stream.categorical(pi)
        x_states[r, 0] = x
        if x == y:
            meeting_times[r] = 0
        for k in range(1, steps + 1):
            if in_region[x] and in_region[y]:
                z_counts[r] += 1
                if stream.uniform() < eps:
                    x = y = stream.categorical(certificate.gamma)
                    if coupling_times[r] > steps:
                        coupling_times[r] = k
                elif x == y:
                    x = y = stream.categorical(residual[x])
                else:
                    x, y = stream.categorical(residual[x]), stream.categorical(residual[y])
            elif x == y:
                x = y = stream.categorical(K[x])
            else:
                x, y = stream.categorical(K[x]), stream.categorical(K[y])
            x_states[r, k] = x
            if x == y and meeting_times[r] > steps:
                meeting_times[r] = k

    horizon = np.arange(steps + 1)
    survival = (coupling_times[:, None] > horizon[None, :]).mean(axis=0)
    unmet = (meeting_times[:, None] > horizon[None, :]).mean(axis=0)

    p = p0.copy()
    tv_curve = np.empty(steps + 1)
    empirical = np.empty(steps + 1)
    for k in range(steps + 1):
        tv_curve[k] = 0.5 * np.abs(p - pi).sum()
        freq = np.bincount(x_states[:, k], minlength=n) / replicates
        empirical[k] = 0.5 * np.abs(freq - pi).sum()
        p = p @ K

    coupled = coupling_times <= steps
    logger.debug(
        f"Coupled {replicates} pairs over {steps} steps: epsilon={eps:.6g}, "
        f"coupled={int(coupled.sum())}, mean T={coupling_times.mean():.4g}"
    )
    return CouplingReport(certificate=certificate, steps=steps, replicates=replicates, seed=rng.seed,
                          coupling_times=coupling_times, coupled=coupled, meeting_times=meeting_times,
                          z_counts=z_counts, survival=survival, unmet=unmet, tv_curve=tv_curve,
                          bound_curve=doeblin_tv_bound(eps, 1, horizon), empirical_tv=empirical)
