"""Exact analysis of a frozen-generation kernel on a finite space.

With an independent proposal ``Q`` and a frozen approximation ``a``, the
transition matrix, its eigenvalues and its left eigenvectors all have
closed forms in terms of the importance ratios ``w_k = a(k) / Q_k``. This
module builds them and cross-checks every closed form against a dense
numeric eigensolver.

States are always reported in their original labels; the descending-ratio
ordering used by the closed forms is internal and recorded in
:class:`ImportanceProfile`.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from .core import NonDiagonalisableError, PROB_ATOL, as_distribution

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

# Relative gap below which two importance ratios are considered tied
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic matrix ``P[i, j]`` reversible w.r.t. ``stationary``."""
    entries: np.ndarray
    stationary: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def power(self, k: int) -> np.ndarray:
        return np.linalg.matrix_power(self.entries, k)


@dataclass(frozen=True)
class ImportanceProfile:
    """Importance ratios and the permutation sorting them in descending order.

    ``order[r]`` is the 0-based original index of the state ranked ``r``.
    """
    weights: np.ndarray
    order: np.ndarray

    @property
    def sorted_weights(self) -> np.ndarray:
        return self.weights[self.order]


@dataclass(frozen=True)
class SpectralReport:
    """Closed-form eigen-decomposition of a frozen independent-proposal kernel.

    Attributes
    ----------
    lambdas : np.ndarray
        ``1 = lambda_0 >= lambda_1 >= ... >= lambda_{n-1} >= 0``.
    vectors : np.ndarray
        Row ``k`` is the left eigenvector ``v_k`` in original labels; ``v_0 = a``.
    thetas : np.ndarray or None
        Coefficients of the initial distribution, ``p0 = sum_k thetas[k] v_k``.
    oracle_lambdas : np.ndarray
        Eigenvalues from the dense solver, sorted in descending order.
    max_residual : float
        ``max_k |v_k P - lambda_k v_k|_inf``.
    """
    approx: np.ndarray
    proposal: np.ndarray
    kernel: TransitionMatrix
    profile: ImportanceProfile
    lambdas: np.ndarray
    vectors: np.ndarray
    thetas: Optional[np.ndarray]
    oracle_lambdas: np.ndarray
    max_residual: float

    @property
    def n(self) -> int:
        return self.lambdas.size

    @property
    def lambda_1(self) -> float:
        return float(self.lambdas[1])

    @property
    def oracle_gap(self) -> float:
        """Largest difference between closed-form and numeric eigenvalues."""
        return float(np.max(np.abs(np.sort(self.lambdas) - np.sort(self.oracle_lambdas))))


def importance_profile(a_m, Q) -> ImportanceProfile:
    a_m = as_distribution(a_m, name="approximation", strictly_positive=True)
    Q = as_distribution(Q, name="proposal", strictly_positive=True)
    if a_m.size != Q.size:
        raise ValueError(f"approximation has {a_m.size} states but proposal has {Q.size}")
    weights = a_m / Q
    # Stable sort keeps equal ratios in label order
    order = np.argsort(-weights, kind="stable")
    return ImportanceProfile(weights=weights, order=order)


def build_kernel(a_m, Q) -> TransitionMatrix:
    """Frozen-generation transition matrix on ``n`` states.

    ``P(x, y) = Q(x, y) min(1, a(y) Q(y, x) / (a(x) Q(x, y)))`` off the
    diagonal, and ``P(x, x) = Q(x, x) + sum_z Q(x, z) max(0, 1 - ...)``.

    Parameters
    ----------
    a_m : sequence of float
        Normalized approximation, strictly positive.
    Q : sequence of float or 2-D array
        Either the masses of an independent proposal, or a row-stochastic
        ``n x n`` proposal matrix.

    Returns
    -------
    TransitionMatrix
    """
    a = as_distribution(a_m, name="approximation", strictly_positive=True)
    Q = np.asarray(Q, dtype=float)
    n = a.size
    if Q.ndim == 1:
        Q = as_distribution(Q, name="proposal", strictly_positive=True)
        if Q.size != n:
            raise ValueError(f"approximation has {n} states but proposal has {Q.size}")
        Q = np.tile(Q, (n, 1))
    elif Q.shape == (n, n):
        for i, row in enumerate(Q):
            as_distribution(row, name=f"proposal row {i + 1}")
    else:
        raise ValueError(f"Proposal must be a vector of {n} masses or an {n}x{n} matrix, got shape {Q.shape}")

    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (a[None, :] * Q.T) / (a[:, None] * Q)
    accept = np.where(Q > 0, np.minimum(1.0, ratio), 0.0)
    P = Q * accept
    np.fill_diagonal(P, 0.0)
    rejected = np.where(Q > 0, Q * np.maximum(0.0, 1.0 - ratio), 0.0)
    np.fill_diagonal(rejected, 0.0)
    P[np.diag_indices(n)] = np.diag(Q) + rejected.sum(axis=1)

    logger.debug(f"Built frozen kernel on {n} states")
    return TransitionMatrix(entries=P, stationary=a)


def stationary_distribution(P) -> np.ndarray:
    """Stationary distribution of a row-stochastic matrix (left eigenvector for 1)."""
    P = np.asarray(getattr(P, "entries", P), dtype=float)
    values, vectors = linalg.eig(P.T)
    k = int(np.argmin(np.abs(values - 1.0)))
    if abs(values[k] - 1.0) > 1e-8:
        raise ValueError(f"Matrix has no eigenvalue 1 (closest {values[k]!r}); is it row-stochastic?")
    pi = np.real(vectors[:, k])
    pi = pi / pi.sum()
    pi[np.abs(pi) < PROB_ATOL] = 0.0
    return pi / pi.sum()


def rejection_probabilities(P, Q) -> np.ndarray:
    """Probability of staying put through a rejected proposal, per state.

    Equals ``P(k, k) - Q_k`` for an independent proposal ``Q``.
    """
    P = np.asarray(getattr(P, "entries", P), dtype=float)
    Q = np.asarray(Q, dtype=float)
    return np.diag(P) - Q


def _check_distinct(profile: ImportanceProfile):
    w = profile.sorted_weights
    if (w[0] - w[-1]) / w[0] < TIE_RTOL:
        # All ratios equal: P = 1 a is rank one and the closed forms give lambda_k = 0
        return
    gaps = (w[:-1] - w[1:]) / w[:-1]
    ties = np.flatnonzero(gaps < TIE_RTOL)
    if ties.size:
        r = int(ties[0])
        pair = (int(profile.order[r]) + 1, int(profile.order[r + 1]) + 1)
        raise NonDiagonalisableError(
            f"non-diagonalisable case out of scope: states {pair[0]} and {pair[1]} have tied importance "
            f"ratios ({w[r]!r} and {w[r + 1]!r})", pair
        )


def _sorted_lambdas(a_s: np.ndarray, Q_s: np.ndarray, w_s: np.ndarray) -> np.ndarray:
    n = a_s.size
    lambdas = np.ones(n)
    for k in range(1, n):
        # 1-based k: sum_{d >= k} (Q_d - a_d / w_k)
        lambdas[k] = np.sum(Q_s[k - 1:] - a_s[k - 1:] / w_s[k - 1])
    return lambdas


def _sorted_vectors(a_s: np.ndarray) -> np.ndarray:
    n = a_s.size
    vectors = np.zeros((n, n))
    vectors[0] = a_s
    for k in range(1, n):
        vectors[k, k - 1] = -a_s[k:].sum()
        vectors[k, k:] = a_s[k:]
    return vectors


def expansion_coefficients(vectors: np.ndarray, p0) -> np.ndarray:
    """Solve ``p0 = sum_k theta_k v_k`` for ``theta``."""
    p0 = as_distribution(p0, name="initial distribution", atol=1e-9)
    if p0.size != vectors.shape[0]:
        raise ValueError(f"initial distribution has {p0.size} states, expected {vectors.shape[0]}")
    return np.linalg.solve(vectors.T, p0)


def closed_form_spectrum(a_m, Q, p0=None) -> SpectralReport:
    """Closed-form eigenvalues and left eigenvectors of the frozen kernel.

    Parameters
    ----------
    a_m : sequence of float
        Normalized approximation, strictly positive.
    Q : sequence of float
        Independent proposal masses, strictly positive.
    p0 : sequence of float, optional
        Initial distribution to expand on the eigenvectors.

    Raises
    ------
    NonDiagonalisableError
        If two importance ratios are tied within a relative ``1e-9`` while
        others differ. When every ratio is tied (``a_m = Q``) the kernel
        draws independently from ``a_m`` and all ``lambda_k``, ``k >= 1``, are 0.
    """
    profile = importance_profile(a_m, Q)
    _check_distinct(profile)
    a = as_distribution(a_m, name="approximation", strictly_positive=True)
    Q = as_distribution(Q, name="proposal", strictly_positive=True)
    order = profile.order

    lambdas = _sorted_lambdas(a[order], Q[order], profile.sorted_weights)
    vectors = np.zeros((a.size, a.size))
    vectors[:, order] = _sorted_vectors(a[order])

    kernel = build_kernel(a, Q)
    residuals = vectors @ kernel.entries - lambdas[:, None] * vectors
    max_residual = float(np.max(np.abs(residuals)))
    oracle = np.sort(np.real(linalg.eigvals(kernel.entries)))[::-1]
    thetas = None if p0 is None else expansion_coefficients(vectors, p0)

    logger.debug(f"Closed-form spectrum on {a.size} states: lambda_1={lambdas[1]:.6g}, residual={max_residual:.3g}")
    return SpectralReport(approx=a, proposal=Q, kernel=kernel, profile=profile, lambdas=lambdas,
                          vectors=vectors, thetas=thetas, oracle_lambdas=oracle, max_residual=max_residual)


def eigenvalue_forms_agree(a_m, Q, atol: float = 1e-12) -> bool:
    """Whether ``sum_{d>=k} (Q_d - a_d/w_k)`` equals ``sum_{d>=k} (a_d/w_d - a_d/w_k)``."""
    profile = importance_profile(a_m, Q)
    a = np.asarray(a_m, dtype=float)[profile.order]
    Q = np.asarray(Q, dtype=float)[profile.order]
    w = profile.sorted_weights
    first = _sorted_lambdas(a, Q, w)
    second = _sorted_lambdas(a, a / w, w)
    return bool(np.max(np.abs(first - second)) <= atol)


def _bound_constant(report: SpectralReport, thetas: np.ndarray) -> float:
    # |theta_k v_k| read as |theta_k| * (half L1 of v_k), the TV convention
    half_l1 = 0.5 * np.abs(report.vectors[1:]).sum(axis=1)
    return float(np.sum(np.abs(thetas[1:]) * half_l1))


def tv_decay_curves(report: SpectralReport, p0, horizon: int) -> Tuple[np.ndarray, np.ndarray]:
    """Bound and exact total variation for ``N = 0..horizon``.

    Returns
    -------
    bound, exact : np.ndarray
        Arrays of length ``horizon + 1``.
    """
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    thetas = expansion_coefficients(report.vectors, p0)
    constant = _bound_constant(report, thetas)
    bound = constant * report.lambda_1 ** np.arange(horizon + 1)

    P = report.kernel.entries
    p = np.asarray(p0, dtype=float)
    exact = np.empty(horizon + 1)
    for N in range(horizon + 1):
        exact[N] = 0.5 * np.abs(p - report.approx).sum()
        p = p @ P
    return bound, exact


def tv_decay_bound(report: SpectralReport, p0, N: int) -> Tuple[float, float]:
    """``(bound, exact_tv)`` after ``N`` steps from ``p0``.

    ``bound = (sum_k |theta_k| * |v_k|_TV) * lambda_1 ** N`` and ``exact_tv``
    is ``|p0 P^N - a|_TV`` computed by repeated matrix-vector products.
    """
    bound, exact = tv_decay_curves(report, p0, N)
    return float(bound[-1]), float(exact[-1])
