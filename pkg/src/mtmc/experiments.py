"""End-to-end experiments driven by a :class:`~mtmc.scenario.Scenario`.

Every experiment writes plain files into the output directory: CSV for
anything plot-shaped and JSON for reports. Each file carries the scenario
name, the seed, the library version and the schema version, and identical
inputs always produce identical bytes.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from . import __version__
from .approx import ApproximationState, load_archive, save_archive
from .core import DiscreteSpace, RngStream, normalize, write_csv
from .coupling import coupled_run, minorisation_certificate, rosenthal_bound
from .diagnostics import (bin_masses, detailed_balance_check, ergodic_average, error_budget,
                          frozen_grid_kernel, generation_gaps, tv_discrete, tv_histogram)
from .samplers import MH, MTMC, ChainRun, run_chain, write_trace
from .scenario import (CouplingConfig, Independent, Kernel, Scenario, binning, build_proposal, build_target,
                       diagnostic_grid, initial_point, observable)
from .spectral import (build_kernel, closed_form_spectrum, eigenvalue_forms_agree,
                       rejection_probabilities, tv_decay_curves)

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())

SCHEMA_VERSION = 1


@dataclass
class ExperimentOutcome:
    report: Dict[str, Any]
    paths: List[Path] = field(default_factory=list)
    run: Optional[ChainRun] = None


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.integer, np.bool_)):
        return value.item()
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if math.isnan(value) or math.isinf(value) else value
    return value


def header_lines(scenario: Scenario, seed: int) -> List[str]:
    return [f"scenario={scenario.name} seed={seed} library=mtmc {__version__} schema_version={SCHEMA_VERSION}"]


def report_header(scenario: Scenario, seed: int, kind: str) -> Dict[str, Any]:
    return {"schema_version": SCHEMA_VERSION, "library": f"mtmc {__version__}", "report": kind,
            "scenario": scenario.name, "seed": seed}


def write_json(payload: Dict[str, Any], path: Union[str, Path]) -> Path:
    """UTF-8 JSON with sorted keys; NaN and infinities become null."""
    path = Path(path)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True, allow_nan=False) + "\n",
                    encoding="utf-8")
    return path


def _output_dir(scenario: Scenario, out_dir) -> Path:
    out = Path(scenario.output.out_dir if out_dir is None else out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def initial_approximation(scenario: Scenario, target) -> Optional[ApproximationState]:
    """Pre-loaded exact archive, a warm-start archive, or None for an empty one."""
    sampler = scenario.sampler
    if sampler.preload_archive:
        states = DiscreteSpace(scenario.space.n).points()
        return ApproximationState.from_target(target, states, fallback=sampler.fallback)
    if sampler.archive_path:
        return load_archive(sampler.archive_path, fallback=sampler.fallback)
    return None


def execute_chain(scenario: Scenario, kind: Optional[str] = None, seed: Optional[int] = None) -> ChainRun:
    """Run the scenario's sampler (or ``kind``) once."""
    sampler = scenario.sampler
    kind = sampler.kind if kind is None else kind
    seed = sampler.seed if seed is None else seed
    target = build_target(scenario)
    approx = initial_approximation(scenario, target) if kind == MTMC else None
    return run_chain(kind, target, build_proposal(scenario), initial_point(scenario), sampler.n_samples,
                     seed=seed, approx=approx, fallback=sampler.fallback, approx_cost=sampler.approx_cost)


def grid_proposal_masses(scenario: Scenario) -> Optional[np.ndarray]:
    """Independent proposal on the diagnostic grid: the scenario's own on finite spaces, else uniform."""
    if scenario.is_discrete and isinstance(scenario.proposal, Independent):
        return normalize(scenario.proposal.masses)
    return None


def chain_diagnostics(scenario: Scenario, run: ChainRun, target) -> Dict[str, Any]:
    """Checkpoint table and generation gaps of a finished run."""
    bins = binning(scenario)
    masses = bin_masses(target, bins)
    e, bound = observable(scenario)
    running = ergodic_average(run.trace, e, bound)
    checkpoints = sorted({c for c in scenario.diagnostics.checkpoints if c <= run.n_samples} | {run.n_samples})

    gaps = {}
    if run.kind == MTMC and len(run.history) >= 2:
        wanted = set(scenario.diagnostics.generations) | {int(run.generations[c - 1]) for c in checkpoints}
        for gap in generation_gaps(run.history, target, diagnostic_grid(scenario), sorted(wanted),
                                   grid_proposal_masses(scenario)):
            gaps[gap.m] = gap

    rows = []
    for c in checkpoints:
        gap = gaps.get(int(run.generations[c - 1]))
        rows.append({
            "step": c,
            "tv_histogram": tv_histogram(run.trace[:c], target, bins, masses).value,
            "delta_m": np.nan if gap is None else gap.delta_m,
            "D_m": np.nan if gap is None else gap.D_m,
            "running_mean_e": running[c - 1],
        })
    requested = [gaps[m] for m in scenario.diagnostics.generations if m in gaps]
    return {
        "table": pd.DataFrame(rows, columns=["step", "tv_histogram", "delta_m", "D_m", "running_mean_e"]),
        "generation_gaps": [{"m": g.m, "delta_m": g.delta_m, "D_m": g.D_m} for g in requested],
        "binning": bins.describe(),
    }


def _ledger(run: ChainRun) -> Dict[str, Any]:
    ledger = run.ledger
    return {"true_evals": ledger.true_evals, "approx_evals": ledger.approx_evals,
            "iterations": ledger.iterations, "work_units": ledger.work_units}


def run_scenario(scenario: Scenario, out_dir=None) -> ExperimentOutcome:
    """Run the sampler, write trace, archive, diagnostics and the run report.

    Spectral and coupling reports are added when the scenario requests them.
    """
    out = _output_dir(scenario, out_dir)
    seed = scenario.sampler.seed
    header = header_lines(scenario, seed)
    target = build_target(scenario)
    run = execute_chain(scenario)
    diagnostics = chain_diagnostics(scenario, run, target)
    paths = []

    if scenario.output.write_trace:
        paths.append(write_trace(run, out / f"{scenario.name}_trace.csv", header))
    if scenario.output.write_archive and run.approx is not None:
        paths.append(save_archive(run.approx, out / f"{scenario.name}_archive.csv", header))
    if scenario.output.write_diagnostics:
        paths.append(write_csv(diagnostics["table"], out / f"{scenario.name}_diagnostics.csv", header))

    table = diagnostics["table"]
    report = {
        **report_header(scenario, seed, "run"),
        "kind": run.kind,
        "n_samples": run.n_samples,
        "ledger": _ledger(run),
        "accepted": run.n_accepted,
        "acceptance_rate": run.acceptance_rate,
        "binning": diagnostics["binning"],
        "checkpoints": table.to_dict(orient="records"),
        "final_tv": float(table["tv_histogram"].iloc[-1]),
        "running_mean_e": float(table["running_mean_e"].iloc[-1]),
        "generation_gaps": diagnostics["generation_gaps"],
        "archive_size": None if run.approx is None else len(run.approx),
    }
    if scenario.is_discrete and run.approx is not None:
        report["detailed_balance_violation"] = detailed_balance_check(*_frozen_finite_kernel(scenario, run.approx))

    outcome = ExperimentOutcome(report=report, paths=paths, run=run)
    if scenario.spectral is not None:
        outcome.paths.extend(spectrum(scenario, out).paths)
    if scenario.coupling is not None:
        outcome.paths.extend(couple(scenario, out).paths)
    report["files"] = sorted(p.name for p in outcome.paths) + [f"{scenario.name}_run.json"]
    outcome.paths.append(write_json(report, out / f"{scenario.name}_run.json"))
    logger.info(f"Scenario '{scenario.name}': wrote {', '.join(p.name for p in outcome.paths)} to {out}")
    return outcome


def _frozen_finite_kernel(scenario: Scenario, approx: ApproximationState):
    kernel = frozen_grid_kernel(approx, diagnostic_grid(scenario), finite_proposal(scenario))
    return kernel, kernel.stationary


def compare_samplers(scenario: Scenario, out_dir=None) -> ExperimentOutcome:
    """Run both samplers with the same seed and compare their evaluation budgets."""
    out = _output_dir(scenario, out_dir)
    seed = scenario.sampler.seed
    target = build_target(scenario)
    bins = binning(scenario)
    masses = bin_masses(target, bins)

    samplers = {}
    for kind in (MH, MTMC):
        run = execute_chain(scenario, kind=kind)
        samplers[kind] = {**_ledger(run), "accepted": run.n_accepted,
                          "final_tv": tv_histogram(run.trace, target, bins, masses).value}
    ratio = samplers[MTMC]["true_evals"] / samplers[MH]["true_evals"]
    report = {**report_header(scenario, seed, "compare"), "n_samples": scenario.sampler.n_samples,
              "binning": bins.describe(), "samplers": samplers, "true_evals_ratio": ratio}
    path = write_json(report, out / f"{scenario.name}_compare.json")
    logger.info(f"Scenario '{scenario.name}': MTMC/MH true evaluations = {ratio:.4f}")
    return ExperimentOutcome(report=report, paths=[path])


def finite_approx(scenario: Scenario) -> np.ndarray:
    if not scenario.is_discrete:
        raise ValueError(f"Scenario '{scenario.name}' has a continuous space; exact analyses need a finite one")
    spectral = scenario.spectral
    masses = scenario.target.masses if spectral is None or spectral.approx is None else spectral.approx
    return normalize(masses, name="approximation masses")


def finite_proposal(scenario: Scenario) -> np.ndarray:
    """Independent masses (vector) or proposal matrix of a finite scenario."""
    spectral = scenario.spectral
    if spectral is not None and spectral.proposal is not None:
        return normalize(spectral.proposal, name="spectral.proposal")
    if isinstance(scenario.proposal, Kernel):
        return np.asarray(scenario.proposal.matrix, dtype=float)
    return normalize(scenario.proposal.masses, name="proposal.masses")


def _point_mass(scenario: Scenario, masses: Optional[Sequence[float]]) -> np.ndarray:
    if masses is not None:
        return normalize(masses, name="initial distribution")
    p0 = np.zeros(scenario.space.n)
    p0[int(initial_point(scenario)[0]) - 1] = 1.0
    return p0


def spectrum(scenario: Scenario, out_dir=None) -> ExperimentOutcome:
    """Closed-form spectrum, decay curves and their cross-checks on a finite scenario."""
    out = _output_dir(scenario, out_dir)
    seed = scenario.sampler.seed
    spectral = scenario.spectral
    horizon = 50 if spectral is None else spectral.horizon
    a, Q = finite_approx(scenario), finite_proposal(scenario)
    p0 = _point_mass(scenario, None if spectral is None else spectral.initial)

    report = closed_form_spectrum(a, Q, p0)
    bound, exact = tv_decay_curves(report, p0, horizon)
    target_probs = build_target(scenario).probabilities
    budget = error_budget(bound[-1], tv_discrete(a, target_probs).value)

    payload = {
        **report_header(scenario, seed, "spectral"),
        "n": report.n,
        "importance_ratios": report.profile.weights,
        "order": report.profile.order + 1,
        "lambdas": report.lambdas,
        "oracle_lambdas": report.oracle_lambdas,
        "oracle_gap": report.oracle_gap,
        "residual": report.max_residual,
        "lambda_forms_agree": eigenvalue_forms_agree(a, Q),
        "rejection_probabilities": rejection_probabilities(report.kernel, Q),
        "vectors": report.vectors,
        "thetas": report.thetas,
        "kernel": report.kernel.entries,
        "detailed_balance_violation": detailed_balance_check(report.kernel, a),
        "initial": p0,
        "horizon": horizon,
        "bound_curve": bound,
        "exact_tv_curve": exact,
        "error_budget": {"mixing": budget.mixing, "model_error": budget.model_error, "total": budget.total},
    }
    header = header_lines(scenario, seed)
    paths = [
        write_json(payload, out / f"{scenario.name}_spectral.json"),
        write_csv(pd.DataFrame({"N": np.arange(horizon + 1), "bound": bound, "exact_tv": exact}),
                  out / f"{scenario.name}_spectral.csv", header),
    ]
    logger.info(f"Scenario '{scenario.name}': lambda_1={report.lambda_1:.6g}, residual={report.max_residual:.3g}")
    return ExperimentOutcome(report=payload, paths=paths)


def couple(scenario: Scenario, out_dir=None) -> ExperimentOutcome:
    """Coupled runs under the minorisation certificate of the frozen kernel."""
    out = _output_dir(scenario, out_dir)
    seed = scenario.sampler.seed
    coupling = CouplingConfig() if scenario.coupling is None else scenario.coupling
    kernel = build_kernel(finite_approx(scenario), finite_proposal(scenario))
    region = [label - 1 for label in coupling.region]
    certificate = minorisation_certificate(kernel, n0=coupling.n0, region=region)
    p0 = _point_mass(scenario, coupling.initial)
    result = coupled_run(RngStream(seed, stream=1), kernel, p0, coupling.steps, coupling.replicates, certificate)

    payload = {
        **report_header(scenario, seed, "coupling"),
        "epsilon": certificate.epsilon,
        "gamma": certificate.gamma,
        "N0": certificate.n0,
        "region": certificate.region + 1,
        "replicates": result.replicates,
        "steps": result.steps,
        "mean_coupling_time": result.mean_coupling_time,
        "coupled_fraction": float(result.coupled.mean()),
        "mean_meeting_time": float(result.meeting_times.mean()),
        "tv_curve": result.tv_curve,
        "bound_curve": result.bound_curve if certificate.is_doeblin else None,
        "survival": result.survival,
        "unmet": result.unmet,
        "empirical_tv": result.empirical_tv,
        "envelope_holds": result.envelope_holds(),
    }
    if not certificate.is_doeblin:
        bound, j = rosenthal_bound(result.z_counts, certificate.epsilon, coupling.j_grid)
        payload["rosenthal"] = {"bound": bound, "j": j, "mean_z": float(result.z_counts.mean())}
    path = write_json(payload, out / f"{scenario.name}_coupling.json")
    logger.info(f"Scenario '{scenario.name}': epsilon={certificate.epsilon:.6g}, "
                f"mean coupling time={result.mean_coupling_time:.4g}")
    return ExperimentOutcome(report=payload, paths=[path])
