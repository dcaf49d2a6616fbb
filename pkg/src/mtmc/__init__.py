__version__ = "0.1.0"

from .core import (DiscreteSpace, InconsistentEvaluationError, MinorisationError, NonDiagonalisableError,
                   RngStream, ZeroDensityError, accept_ratio_mh, bernoulli_accept)
from .targets import (DiscreteTableTarget, FunctionTarget, GaussianTarget, GridTableTarget, MixtureTarget,
                      TargetDensity)
from .proposals import IndependentProposal, KernelProposal, RandomWalkProposal, UniformProposal
from .approx import ApproximationState, load_archive, save_archive, successive_differences, sup_error
from .samplers import ChainRun, EvaluationLedger, mh_step, mtmc_step, run_chain
from .spectral import build_kernel, closed_form_spectrum, stationary_distribution, tv_decay_bound
from .coupling import coupled_run, doeblin_epsilon, maximal_coupling_draw, minorisation_certificate
from .diagnostics import (detailed_balance_check, ergodic_average, generation_gaps, tv_discrete,
                          tv_histogram)
from .parsing import ScenarioError
from .scenario import Scenario, load_scenario

__all__ = [
    # Errors
    "ZeroDensityError",
    "InconsistentEvaluationError",
    "NonDiagonalisableError",
    "MinorisationError",
    "ScenarioError",
    # Building blocks
    "DiscreteSpace",
    "RngStream",
    "accept_ratio_mh",
    "bernoulli_accept",
    "TargetDensity",
    "FunctionTarget",
    "DiscreteTableTarget",
    "GaussianTarget",
    "MixtureTarget",
    "GridTableTarget",
    "RandomWalkProposal",
    "UniformProposal",
    "IndependentProposal",
    "KernelProposal",
    # Moving approximation
    "ApproximationState",
    "sup_error",
    "successive_differences",
    "save_archive",
    "load_archive",
    # Samplers
    "EvaluationLedger",
    "ChainRun",
    "mh_step",
    "mtmc_step",
    "run_chain",
    # Exact analyses
    "build_kernel",
    "closed_form_spectrum",
    "stationary_distribution",
    "tv_decay_bound",
    "maximal_coupling_draw",
    "doeblin_epsilon",
    "minorisation_certificate",
    "coupled_run",
    # Diagnostics
    "tv_discrete",
    "tv_histogram",
    "generation_gaps",
    "ergodic_average",
    "detailed_balance_check",
    # Scenarios
    "Scenario",
    "load_scenario",
]
