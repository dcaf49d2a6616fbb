import numpy as np
import pytest
from scipy import integrate, stats

from ..approx import ApproximationState
from ..core import box_grid
from ..diagnostics import (EXACT_DISCRETE, HISTOGRAM_BINNED, Binning, batch_means_stderr, bin_masses,
                           detailed_balance_check, ergodic_average, error_budget, frozen_grid_kernel,
                           generation_gaps, kernel_change, make_observable, tv_by_subsets, tv_discrete,
                           tv_histogram)
from ..proposals import IndependentProposal, RandomWalkProposal
from ..samplers import MH, MTMC, run_chain
from ..spectral import build_kernel
from ..targets import DiscreteTableTarget, GaussianTarget, GridTableTarget


def test_tv_discrete():
    assert tv_discrete([0.5, 0.5], [0.5, 0.5]).value == 0.0
    assert tv_discrete([1.0, 0.0], [0.0, 1.0]).value == 1.0
    estimate = tv_discrete([0.75, 0.25], [0.5, 0.5])
    assert estimate.value == pytest.approx(0.25)
    assert estimate.scheme == EXACT_DISCRETE
    with pytest.raises(ValueError, match="different spaces"):
        tv_discrete([0.5, 0.5], [0.2, 0.3, 0.5])


def test_tv_discrete_is_a_metric():
    rng = np.random.default_rng(2)
    for _ in range(100):
        n = int(rng.integers(2, 30))
        p, q, r = (rng.dirichlet(np.ones(n)) for _ in range(3))
        pq = tv_discrete(p, q).value
        assert 0.0 <= pq <= 1.0
        assert pq == tv_discrete(q, p).value
        assert tv_discrete(p, p).value == 0.0
        assert pq <= tv_discrete(p, r).value + tv_discrete(r, q).value + 1e-12


def test_tv_matches_subset_definition():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(2, 12))
        p, q = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
        assert tv_discrete(p, q).value == pytest.approx(tv_by_subsets(p, q), abs=1e-12)
    with pytest.raises(ValueError, match="limited to 20 states"):
        tv_by_subsets(np.ones(21) / 21, np.ones(21) / 21)


def test_tv_histogram_discrete_iid():
    target = DiscreteTableTarget([0.1, 0.2, 0.3, 0.4])
    rng = np.random.default_rng(1)
    trace = rng.choice([1.0, 2.0, 3.0, 4.0], size=(100000, 1), p=target.probabilities)
    assert tv_histogram(trace, target, Binning.discrete(4)).value < 0.01


def test_tv_histogram_single_sample():
    target = GaussianTarget([0.0], [1.0], lower=[-5.0], upper=[5.0])
    binning = Binning.uniform([-5.0], [5.0], 20)
    masses = bin_masses(target, binning)
    estimate = tv_histogram(np.array([[0.1]]), target, binning, masses=masses)
    assert estimate.scheme == HISTOGRAM_BINNED
    assert estimate.n_samples == 1
    assert estimate.value == pytest.approx(1.0 - masses[10])


def test_bin_masses_one_dimensional():
    target = GaussianTarget([0.5], [1.0], lower=[-5.0], upper=[5.0])
    binning = Binning.uniform([-5.0], [5.0], 20)
    edges = binning.edges[0]
    cdf = stats.norm.cdf(edges, loc=0.5, scale=1.0)
    expected = np.diff(cdf) / (cdf[-1] - cdf[0])
    np.testing.assert_allclose(bin_masses(target, binning), expected, atol=1e-6)


def test_bin_masses_two_dimensional():
    target = GridTableTarget([0.0, 0.0], [1.0, 1.0], [1, 1], [1.0])
    masses = bin_masses(target, Binning.uniform([0.0, 0.0], [1.0, 1.0], [2, 3]))
    np.testing.assert_allclose(masses, np.full(6, 1 / 6))


def test_binning():
    assert Binning.uniform([0.0], [1.0], 4).n_bins == 4
    assert Binning.discrete(3).describe() == {"kind": "labels", "n": 3}
    with pytest.raises(ValueError, match="at least one bin"):
        Binning.uniform([0.0], [1.0], 0)


def test_generation_gaps():
    target = GaussianTarget([0.0], [1.0], lower=[-3.0], upper=[3.0])
    grid = box_grid([-3.0], [3.0], 11)
    exact = ApproximationState.from_target(target, grid)
    repeated = exact.update(grid[0], target.evaluate(grid[0]))
    gaps = generation_gaps([exact, repeated], target, grid)
    assert [g.m for g in gaps] == [11, 12]
    assert gaps[0].delta_m == 0.0 and gaps[0].D_m == 0.0
    assert np.isnan(gaps[1].D_m)

    coarse = ApproximationState.from_target(target, [[0.0]])
    finer = coarse.update([2.0], target.evaluate([2.0]))
    gaps = generation_gaps([coarse, finer], target, grid, generations=[1, 5])
    assert len(gaps) == 1
    a = np.full(11, 1 / 11)
    p = target.evaluate_many(grid) / target.evaluate_many(grid).sum()
    assert gaps[0].delta_m == pytest.approx(0.5 * np.abs(a - p).sum())
    assert gaps[0].D_m > 0.0

    with pytest.raises(ValueError, match="at least 2 snapshots"):
        generation_gaps([coarse], target, grid)


def test_kernel_change_matches_dense_kernels():
    rng = np.random.default_rng(7)
    for _ in range(20):
        a0, a1, Q = (rng.dirichlet(np.ones(11)) for _ in range(3))
        dense = np.max(0.5 * np.abs(build_kernel(a1, Q).entries - build_kernel(a0, Q).entries).sum(axis=1))
        assert kernel_change(a0, a1, Q, block_rows=3) == pytest.approx(dense, abs=1e-14)
    uniform = np.full(11, 1 / 11)
    dense = np.max(0.5 * np.abs(build_kernel(a1, uniform).entries - build_kernel(a0, uniform).entries).sum(axis=1))
    assert kernel_change(a0, a1) == pytest.approx(dense, abs=1e-14)
    assert kernel_change(a0, a0) == 0.0
    with pytest.raises(ValueError, match="different spaces"):
        kernel_change(a0, a1[:5] / a1[:5].sum())


def test_detailed_balance():
    P = build_kernel([0.75, 0.25], [0.5, 0.5])
    assert detailed_balance_check(P, [0.75, 0.25]) < 1e-12

    perturbed = P.entries.copy()
    perturbed[0, 1] += 0.01
    perturbed[0] /= perturbed[0].sum()
    assert detailed_balance_check(perturbed, [0.75, 0.25]) > 1e-3


def test_frozen_kernels_are_reversible():
    """Every frozen generation of a finite MTMC run is reversible w.r.t. its own approximation."""
    target = DiscreteTableTarget([1.0, 2.0, 3.0, 4.0, 5.0])
    proposal = IndependentProposal([0.2] * 5)
    grid = target.space.points()
    for seed in range(20):
        run = run_chain(MTMC, target, proposal, [3], 100, seed=seed)
        for state in run.history:
            kernel = frozen_grid_kernel(state, grid, proposal.masses)
            assert detailed_balance_check(kernel, kernel.stationary) < 1e-12


def test_observables():
    identity = make_observable("identity")
    indicator = make_observable("indicator:1")
    assert identity(np.array([2.5, 1.0])) == 2.5
    assert indicator(np.array([1.0])) == 1.0
    assert indicator(np.array([2.0])) == 0.0
    with pytest.raises(ValueError, match="Unknown observable"):
        make_observable("square")


def test_ergodic_average():
    means = ergodic_average(np.array([[1.0], [3.0], [2.0]]), make_observable("identity"), bound=5.0)
    np.testing.assert_allclose(means, [1.0, 2.0, 2.0])
    with pytest.raises(ValueError, match="unbounded on the trace"):
        ergodic_average(np.array([[10.0]]), make_observable("identity"), bound=5.0)


def test_array_and_run_inputs_agree():
    """Diagnostics accept a ChainRun or its trace array interchangeably."""
    target = DiscreteTableTarget([0.75, 0.25])
    run = run_chain(MTMC, target, IndependentProposal([0.5, 0.5]), [1], 500, seed=4)
    binning = Binning.discrete(2)
    assert tv_histogram(run, target, binning).value == tv_histogram(run.trace, target, binning).value
    indicator = make_observable("indicator:1")
    np.testing.assert_array_equal(ergodic_average(run, indicator, bound=1.0),
                                  ergodic_average(run.trace, indicator, bound=1.0))
    assert tv_histogram(run.trace, target, binning).n_samples == 500


def test_two_state_ergodic_average():
    target = DiscreteTableTarget([0.75, 0.25])
    run = run_chain(MH, target, IndependentProposal([0.5, 0.5]), [2], 100000, seed=0)
    means = ergodic_average(run, make_observable("indicator:1"), bound=1.0)
    assert abs(means[-1] - 0.75) < 0.01


def test_continuous_ergodic_average():
    target = GaussianTarget([0.5], [1.0], lower=[-5.0], upper=[5.0])
    weight = integrate.quad(lambda t: target.evaluate([t]), -5.0, 5.0)[0]
    exact = integrate.quad(lambda t: t * target.evaluate([t]), -5.0, 5.0)[0] / weight
    identity = make_observable("identity")

    within = 0
    for seed in range(5):
        run = run_chain(MH, target, RandomWalkProposal(1.5), [0.5], 20000, seed=seed)
        values = run.trace[:, 0]
        within += abs(ergodic_average(run, identity, 5.0)[-1] - exact) < 2 * batch_means_stderr(values)
    assert within >= 3

    for seed in range(3):
        run = run_chain(MTMC, target, RandomWalkProposal(1.5), [0.5], 20000, seed=seed)
        assert abs(ergodic_average(run, identity, 5.0)[-1] - exact) < 0.1


def test_batch_means_stderr():
    values = np.tile([0.0, 1.0], 50)
    assert batch_means_stderr(values, n_batches=10) == 0.0
    with pytest.raises(ValueError, match="Need at least 20 values"):
        batch_means_stderr(np.ones(5))


def test_error_budget():
    budget = error_budget(np.array([0.2, 0.1]), 0.05)
    assert budget.mixing == 0.2
    assert budget.total == pytest.approx(0.25)
    assert error_budget(0.9, 0.5).total == 1.0
    with pytest.raises(ValueError, match="delta_m"):
        error_budget(0.1, 1.5)
