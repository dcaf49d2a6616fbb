"""Metropolis-Hastings and Moving Target Monte Carlo sampling loops.

Both loops draw the candidate first and then exactly one uniform for the
accept/reject decision, so that with identical densities they consume the
random stream identically. Metropolis-Hastings evaluates the true target
at every candidate; the moving-target sampler decides with its current
approximation and evaluates the true target only on acceptance.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, NamedTuple, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .approx import ApproximationState
from .core import RngStream, ZeroDensityError, accept_ratio_mh, as_point, bernoulli_accept, write_csv
from .proposals import Proposal
from .targets import TargetDensity

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

MH = "mh"
MTMC = "mtmc"


@dataclass
class EvaluationLedger:
    """Accounting of expensive (true) and cheap (approximate) evaluations."""
    true_evals: int = 0
    approx_evals: int = 0
    iterations: int = 0
    work_units: float = 0.0

    def charge_true(self, target: TargetDensity):
        self.true_evals += 1
        self.work_units += target.cost_per_eval

    def charge_approx(self, cost: float):
        self.approx_evals += 1
        self.work_units += cost


class MHStep(NamedTuple):
    next: np.ndarray
    p_next: float
    accepted: bool
    alpha: float
    candidate: np.ndarray
    density_current: float
    density_candidate: float


class MTMCStep(NamedTuple):
    """``density_current`` and ``density_candidate`` are ``a_n`` values, not true ones."""
    next: np.ndarray
    approx: ApproximationState
    accepted: bool
    alpha: float
    candidate: np.ndarray
    density_current: float
    density_candidate: float


@dataclass
class ChainRun:
    """Result of one sampler execution.

    Row ``n`` of every per-step array describes the step that produced
    ``x^n``; row 0 is the initial point (not accepted, NaN ``alpha``,
    candidate and densities). ``density_current`` and ``density_candidate``
    are the two densities the acceptance ratio used: true target values for
    MH, approximation values ``a_n`` for MTMC.
    """
    kind: str
    seed: int
    trace: np.ndarray
    accepted: np.ndarray
    alphas: np.ndarray
    generations: np.ndarray
    true_evals_cumulative: np.ndarray
    ledger: EvaluationLedger
    candidates: np.ndarray = field(default_factory=lambda: np.empty((0, 1)))
    density_current: np.ndarray = field(default_factory=lambda: np.empty(0))
    density_candidate: np.ndarray = field(default_factory=lambda: np.empty(0))
    approx: Optional[ApproximationState] = None
    history: List[ApproximationState] = field(default_factory=list)

    @property
    def n_samples(self) -> int:
        return self.trace.shape[0]

    @property
    def n_accepted(self) -> int:
        return int(self.accepted.sum())

    @property
    def acceptance_rate(self) -> float:
        steps = self.n_samples - 1
        return self.n_accepted / steps if steps else 0.0

    def snapshot(self, generation: int) -> ApproximationState:
        """The approximation as it was at ``generation``."""
        if not self.history:
            raise ValueError(f"A {self.kind} run keeps no approximation history")
        first = self.history[0].generation
        return self.history[min(max(generation - first, 0), len(self.history) - 1)]


def mh_step(rng: RngStream, target: TargetDensity, proposal: Proposal, current: np.ndarray,
            p_current: float, ledger: Optional[EvaluationLedger] = None) -> MHStep:
    """One Metropolis-Hastings transition.

    The candidate is always evaluated under the true target.
    """
    ledger = EvaluationLedger() if ledger is None else ledger
    candidate = proposal.sample(rng, current)
    q_fwd = proposal.density(current, candidate)
    q_bwd = proposal.density(candidate, current)
    p_candidate = target.evaluate(candidate)
    ledger.charge_true(target)
    ledger.iterations += 1

    alpha = accept_ratio_mh(p_current, p_candidate, q_fwd, q_bwd)
    if bernoulli_accept(rng, alpha):
        return MHStep(candidate, p_candidate, True, alpha, candidate, p_current, p_candidate)
    return MHStep(current, p_current, False, alpha, candidate, p_current, p_candidate)


def mtmc_step(rng: RngStream, target: TargetDensity, proposal: Proposal, approx: ApproximationState,
              current: np.ndarray, ledger: Optional[EvaluationLedger] = None,
              approx_cost: float = 0.0) -> MTMCStep:
    """One Moving Target Monte Carlo transition.

    The acceptance probability only uses ``approx``; the true target is
    evaluated (and archived) only when the candidate is accepted. A
    candidate outside the prior support has zero approximate density.

    Raises
    ------
    ZeroDensityError
        If the approximation vanishes at the current state.
    """
    ledger = EvaluationLedger() if ledger is None else ledger
    candidate = proposal.sample(rng, current)
    q_fwd = proposal.density(current, candidate)
    q_bwd = proposal.density(candidate, current)

    a_current = approx.evaluate(current)
    ledger.charge_approx(approx_cost)
    if a_current <= 0:
        raise ZeroDensityError(f"zero approximation at current state {np.asarray(current).tolist()}")
    a_candidate = approx.evaluate(candidate) if target.in_support(candidate) else 0.0
    ledger.charge_approx(approx_cost)
    ledger.iterations += 1

    alpha = accept_ratio_mh(a_current, a_candidate, q_fwd, q_bwd)
    if bernoulli_accept(rng, alpha):
        value = target.evaluate(candidate)
        ledger.charge_true(target)
        return MTMCStep(candidate, approx.update(candidate, value), True, alpha, candidate, a_current, a_candidate)
    return MTMCStep(current, approx, False, alpha, candidate, a_current, a_candidate)


def run_chain(kind: str, target: TargetDensity, proposal: Proposal, initial, n_samples: int,
              seed: Union[int, RngStream] = 0, approx: Optional[ApproximationState] = None,
              fallback: float = 1.0, approx_cost: float = 0.0) -> ChainRun:
    """Run a sampler for ``n_samples`` points (``n_samples - 1`` transitions).

    Parameters
    ----------
    kind : {'mh', 'mtmc'}
    target : TargetDensity
    proposal : Proposal
    initial : point
        Starting point, must have positive density.
    n_samples : int
        Length of the returned trace (>= 1).
    seed : int or RngStream
    approx : ApproximationState, optional
        Initial approximation for ``'mtmc'`` (e.g. pre-loaded or warm-started).
        The initial point is always evaluated and archived.
    fallback : float
        Value of an empty approximation.
    approx_cost : float
        Work units charged per approximate evaluation.

    Returns
    -------
    ChainRun
    """
    if kind not in (MH, MTMC):
        raise ValueError(f"Unknown sampler kind {kind!r}, expected '{MH}' or '{MTMC}'")
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    rng = seed if isinstance(seed, RngStream) else RngStream(seed)
    current = as_point(initial, target.dim)

    ledger = EvaluationLedger()
    p_current = target.evaluate(current)
    ledger.charge_true(target)
    if p_current <= 0:
        raise ZeroDensityError(f"Cannot start a chain at {current.tolist()}: target density is {p_current!r}")

    trace = np.empty((n_samples, target.dim))
    accepted = np.zeros(n_samples, dtype=bool)
    alphas = np.full(n_samples, np.nan)
    generations = np.zeros(n_samples, dtype=int)
    true_evals = np.zeros(n_samples, dtype=int)
    candidates = np.full((n_samples, target.dim), np.nan)
    density_current = np.full(n_samples, np.nan)
    density_candidate = np.full(n_samples, np.nan)
    trace[0] = current
    true_evals[0] = ledger.true_evals

    history: List[ApproximationState] = []
    if kind == MTMC:
        approx = ApproximationState(target.dim, fallback=fallback) if approx is None else approx
        approx = approx.update(current, p_current)
        history.append(approx)
        generations[0] = approx.generation
    else:
        approx = None

    logger.debug(f"Starting {kind} chain: N={n_samples}, seed={rng.seed}, start={current.tolist()}")
    for n in range(1, n_samples):
        if kind == MH:
            step = mh_step(rng, target, proposal, current, p_current, ledger)
            current, p_current = step.next, step.p_next
        else:
            step = mtmc_step(rng, target, proposal, approx, current, ledger, approx_cost)
            current = step.next
            if step.accepted:
                approx = step.approx
                history.append(approx)
            generations[n] = approx.generation
        trace[n] = current
        accepted[n] = step.accepted
        alphas[n] = step.alpha
        candidates[n] = step.candidate
        density_current[n] = step.density_current
        density_candidate[n] = step.density_candidate
        true_evals[n] = ledger.true_evals

    logger.debug(
        f"Finished {kind} chain: true_evals={ledger.true_evals}, approx_evals={ledger.approx_evals}, "
        f"accepted={int(accepted.sum())}/{n_samples - 1}"
    )
    return ChainRun(kind=kind, seed=rng.seed, trace=trace, accepted=accepted, alphas=alphas,
                    generations=generations, true_evals_cumulative=true_evals, ledger=ledger,
                    candidates=candidates, density_current=density_current,
                    density_candidate=density_candidate, approx=approx, history=history)


def write_trace(run: ChainRun, path: Union[str, Path], header: Sequence[str] = ()) -> Path:
    """Write a trace CSV with columns
    ``step, coord_*, accepted, alpha, density_current, density_candidate,
    generation, true_evals_cumulative``.
    """
    frame = pd.DataFrame({"step": np.arange(run.n_samples)})
    for k in range(run.trace.shape[1]):
        frame[f"coord_{k}"] = run.trace[:, k]
    frame["accepted"] = run.accepted.astype(int)
    frame["alpha"] = run.alphas
    frame["density_current"] = run.density_current
    frame["density_candidate"] = run.density_candidate
    frame["generation"] = run.generations
    frame["true_evals_cumulative"] = run.true_evals_cumulative
    return write_csv(frame, path, header)
