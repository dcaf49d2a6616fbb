"""Scenario schema: what to sample, how, and what to measure.

Each category (space, target, proposal) has one subclass per family,
selected by name in scenario files. Field types carry the per-field
constraints (positive masses, ...); :func:`validate_scenario` checks the
constraints that involve several fields.
"""
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import NonNegativeFloat, NonNegativeInt, PositiveFloat, PositiveInt

from .config import ConfigBase
from .core import box_grid, normalize
from .diagnostics import Binning, make_observable
from .parsing import ScenarioError, ScenarioText, load_scenario_file, load_scenario_text
from .proposals import IndependentProposal, KernelProposal, RandomWalkProposal, UniformProposal
from .targets import DiscreteTableTarget, GaussianTarget, GridTableTarget, MixtureTarget

SCENARIO_DIR = Path(__file__).parent / "scenarios"

# Generation gaps cost O(points**2) per generation pair
MAX_GRID_POINTS = 20000


class SpaceConfig(ConfigBase):
    pass


class Continuous(SpaceConfig):
    dim: PositiveInt = 1
    lower: List[float] = [-5.0]
    upper: List[float] = [5.0]


class Discrete(SpaceConfig):
    n: PositiveInt = 2


class TargetConfig(ConfigBase):
    cost_per_eval: NonNegativeFloat = 1.0


class DiscreteTable(TargetConfig):
    _target_class = DiscreteTableTarget
    masses: List[PositiveFloat] = [0.75, 0.25]


class Gaussian(TargetConfig):
    _target_class = GaussianTarget
    mean: List[float] = [0.0]
    scale: List[PositiveFloat] = [1.0]


class Mixture(TargetConfig):
    _target_class = MixtureTarget
    centers: List[List[float]] = [[-2.0], [2.0]]
    widths: List[PositiveFloat] = [0.5, 0.5]
    weights: List[PositiveFloat] = [1.0, 1.0]


class GridTable(TargetConfig):
    _target_class = GridTableTarget
    shape: List[PositiveInt] = [4]
    values: List[PositiveFloat] = [1.0, 2.0, 2.0, 1.0]


class ProposalConfig(ConfigBase):
    pass


class RandomWalk(ProposalConfig):
    _target_class = RandomWalkProposal
    scale: List[PositiveFloat] = [1.0]


class Independent(ProposalConfig):
    """Independent proposal on a finite space; masses are normalized."""
    masses: List[PositiveFloat] = [0.5, 0.5]

    def instantiate(self):
        return IndependentProposal(normalize(self.masses, name="proposal.masses"))


class Uniform(ProposalConfig):
    _target_class = UniformProposal


class Kernel(ProposalConfig):
    _target_class = KernelProposal
    matrix: List[List[NonNegativeFloat]] = [[0.5, 0.5], [0.5, 0.5]]


class SamplerConfig(ConfigBase):
    """Which sampler to run and from where.

    ``initial`` defaults to state 1 on finite spaces and to the center of
    the box otherwise. ``preload_archive`` archives the exact target at
    every state before the run (finite spaces only); ``archive_path`` warm
    starts from a saved archive.
    """
    kind: Literal["mh", "mtmc"] = "mtmc"
    n_samples: PositiveInt = 10000
    seed: NonNegativeInt = 0
    initial: Optional[List[float]] = None
    fallback: NonNegativeFloat = 1.0
    preload_archive: bool = False
    archive_path: Optional[str] = None
    approx_cost: NonNegativeFloat = 0.0


class DiagnosticsConfig(ConfigBase):
    grid_size: PositiveInt = 101
    bins: PositiveInt = 20
    checkpoints: List[PositiveInt] = [100, 1000, 10000]
    generations: List[NonNegativeInt] = [5, 20, 80]
    observable: str = "identity"
    observable_bound: Optional[PositiveFloat] = None


class SpectralConfig(ConfigBase):
    """Exact analysis inputs; unset masses come from the target and proposal."""
    _config_name = "spectral"
    approx: Optional[List[PositiveFloat]] = None
    proposal: Optional[List[PositiveFloat]] = None
    initial: Optional[List[NonNegativeFloat]] = None
    horizon: PositiveInt = 50


class CouplingConfig(ConfigBase):
    """Coupled-chain experiment; ``region`` holds 1-based labels, empty for the whole space."""
    _config_name = "coupling"
    n0: PositiveInt = 1
    replicates: PositiveInt = 10000
    steps: PositiveInt = 30
    region: List[PositiveInt] = []
    j_grid: List[PositiveInt] = [1, 2, 4, 8, 16]
    initial: Optional[List[NonNegativeFloat]] = None


class OutputConfig(ConfigBase):
    out_dir: str = "results"
    write_trace: bool = True
    write_archive: bool = True
    write_diagnostics: bool = True


class Scenario(ConfigBase):
    name: str = "scenario"
    space: SpaceConfig = Continuous()
    target: TargetConfig = Gaussian()
    proposal: ProposalConfig = RandomWalk()
    sampler: SamplerConfig = SamplerConfig()
    diagnostics: DiagnosticsConfig = DiagnosticsConfig()
    spectral: Optional[SpectralConfig] = None
    coupling: Optional[CouplingConfig] = None
    output: OutputConfig = OutputConfig()

    @property
    def is_discrete(self) -> bool:
        return isinstance(self.space, Discrete)

    @property
    def dim(self) -> int:
        return 1 if self.is_discrete else self.space.dim


def _fail(field: str, message: str, text: Optional[ScenarioText]):
    raise ScenarioError(field, message, None if text is None else text.line_of(field))


def validate_scenario(scenario: Scenario, text: Optional[ScenarioText] = None) -> Scenario:
    """Check the constraints spanning several fields.

    Raises
    ------
    ScenarioError
        Naming the first inconsistent field.
    """
    space, target, proposal = scenario.space, scenario.target, scenario.proposal
    d = scenario.dim

    if scenario.is_discrete:
        n = space.n
        if n < 2:
            _fail("space.n", f"a finite space needs at least 2 states, got {n}", text)
        if not isinstance(target, DiscreteTable):
            _fail("target", f"a discrete space needs a discretetable target, got {target._config_name}", text)
        if len(target.masses) != n:
            _fail("target.masses", f"expected {n} masses, got {len(target.masses)}", text)
        if isinstance(proposal, Independent):
            if len(proposal.masses) != n:
                _fail("proposal.masses", f"expected {n} masses, got {len(proposal.masses)}", text)
        elif isinstance(proposal, Kernel):
            matrix = np.asarray(proposal.matrix, dtype=float)
            if matrix.shape != (n, n):
                _fail("proposal.matrix", f"expected a {n}x{n} matrix, got shape {matrix.shape}", text)
            if np.any(np.abs(matrix.sum(axis=1) - 1.0) > 1e-9):
                _fail("proposal.matrix", "every row must sum to 1", text)
        else:
            _fail("proposal", f"a discrete space needs an independent or kernel proposal, got {proposal._config_name}", text)
    else:
        if len(space.lower) != d or len(space.upper) != d:
            _fail("space.lower", f"lower and upper must have {d} entries", text)
        if any(hi <= lo for lo, hi in zip(space.lower, space.upper)):
            _fail("space.upper", "every upper bound must exceed its lower bound", text)
        if isinstance(target, DiscreteTable):
            _fail("target", "a discretetable target needs a discrete space", text)
        if isinstance(target, Gaussian):
            if len(target.mean) != d:
                _fail("target.mean", f"expected {d} coordinates, got {len(target.mean)}", text)
            if len(target.scale) not in (1, d):
                _fail("target.scale", f"expected 1 or {d} scales, got {len(target.scale)}", text)
        if isinstance(target, Mixture):
            if any(len(c) != d for c in target.centers):
                _fail("target.centers", f"every center needs {d} coordinates", text)
            if not len(target.widths) == len(target.weights) == len(target.centers):
                _fail("target.widths", "centers, widths and weights must have the same length", text)
        if isinstance(target, GridTable):
            if len(target.shape) != d:
                _fail("target.shape", f"expected {d} axes, got {len(target.shape)}", text)
            if len(target.values) != int(np.prod(target.shape)):
                _fail("target.values", f"expected {int(np.prod(target.shape))} values, got {len(target.values)}", text)
        if isinstance(proposal, RandomWalk):
            if len(proposal.scale) not in (1, d):
                _fail("proposal.scale", f"expected 1 or {d} scales, got {len(proposal.scale)}", text)
        elif not isinstance(proposal, Uniform):
            _fail("proposal", f"a continuous space needs a randomwalk or uniform proposal, got {proposal._config_name}", text)
        if scenario.sampler.preload_archive:
            _fail("sampler.preload_archive", "pre-loading the exact target needs a finite space", text)
        points = scenario.diagnostics.grid_size ** d
        if points > MAX_GRID_POINTS:
            _fail("diagnostics.grid_size", f"a {d}-D grid of size {scenario.diagnostics.grid_size} has {points} points, "
                  f"at most {MAX_GRID_POINTS} are supported", text)

    initial = scenario.sampler.initial
    if initial is not None:
        if len(initial) != d:
            _fail("sampler.initial", f"expected {d} coordinates, got {len(initial)}", text)
        if scenario.is_discrete and initial[0] not in range(1, space.n + 1):
            _fail("sampler.initial", f"{initial[0]} is not a state label in 1..{space.n}", text)

    for section in ("spectral", "coupling"):
        if getattr(scenario, section) is not None and not scenario.is_discrete:
            _fail(section, "exact analyses need a discrete space", text)
    if scenario.spectral is not None:
        spectral = scenario.spectral
        for name in ("approx", "proposal", "initial"):
            value = getattr(spectral, name)
            if value is not None and len(value) != space.n:
                _fail(f"spectral.{name}", f"expected {space.n} masses, got {len(value)}", text)
        if spectral.proposal is None and not isinstance(proposal, Independent):
            _fail("spectral.proposal", "needed unless the scenario proposal is independent", text)
    if scenario.coupling is not None:
        coupling = scenario.coupling
        if any(label > space.n for label in coupling.region):
            _fail("coupling.region", f"labels must be in 1..{space.n}", text)
        if coupling.initial is not None and len(coupling.initial) != space.n:
            _fail("coupling.initial", f"expected {space.n} masses, got {len(coupling.initial)}", text)
    return scenario


def resolve_scenario_path(name_or_path) -> Path:
    """A scenario file path, or the name of a bundled scenario such as ``two-state``."""
    path = Path(name_or_path)
    if path.exists() or path.suffix:
        return path
    return SCENARIO_DIR / f"{name_or_path}.cfg"


def load_scenario(name_or_path, overrides=None) -> Scenario:
    """Load, override and validate a scenario."""
    path = resolve_scenario_path(name_or_path)
    scenario, text = load_scenario_file(path, Scenario, overrides)
    return validate_scenario(scenario, text)


def scenario_from_text(text: str, overrides=None) -> Scenario:
    scenario, parsed = load_scenario_text(text, Scenario, overrides)
    return validate_scenario(scenario, parsed)


def support_box(scenario: Scenario) -> Tuple[np.ndarray, np.ndarray]:
    if scenario.is_discrete:
        return np.array([1.0]), np.array([float(scenario.space.n)])
    return np.asarray(scenario.space.lower, dtype=float), np.asarray(scenario.space.upper, dtype=float)


def build_target(scenario: Scenario):
    if scenario.is_discrete:
        return scenario.target.instantiate()
    lower, upper = support_box(scenario)
    return scenario.target.instantiate(lower=lower, upper=upper)


def build_proposal(scenario: Scenario):
    proposal = scenario.proposal
    if isinstance(proposal, RandomWalk):
        return proposal.instantiate(dim=scenario.dim)
    if isinstance(proposal, Uniform):
        lower, upper = support_box(scenario)
        return proposal.instantiate(lower=lower, upper=upper)
    return proposal.instantiate()


def initial_point(scenario: Scenario) -> np.ndarray:
    if scenario.sampler.initial is not None:
        return np.asarray(scenario.sampler.initial, dtype=float)
    if scenario.is_discrete:
        return np.array([1.0])
    lower, upper = support_box(scenario)
    return (lower + upper) / 2


def diagnostic_grid(scenario: Scenario) -> np.ndarray:
    if scenario.is_discrete:
        return np.arange(1, scenario.space.n + 1, dtype=float).reshape(-1, 1)
    lower, upper = support_box(scenario)
    return box_grid(lower, upper, scenario.diagnostics.grid_size)


def binning(scenario: Scenario) -> Binning:
    if scenario.is_discrete:
        return Binning.discrete(scenario.space.n)
    lower, upper = support_box(scenario)
    return Binning.uniform(lower, upper, scenario.diagnostics.bins)


def observable(scenario: Scenario):
    """The observable and its declared bound (the box radius when undeclared)."""
    diagnostics = scenario.diagnostics
    e = make_observable(diagnostics.observable)
    bound = diagnostics.observable_bound
    if bound is None:
        lower, upper = support_box(scenario)
        bound = 1.0 if diagnostics.observable.startswith("indicator:") else float(np.max(np.abs([lower, upper])))
    return e, bound
