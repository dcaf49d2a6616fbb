import numpy as np
import pytest
from scipy import linalg

from ..core import NonDiagonalisableError
from ..spectral import (build_kernel, closed_form_spectrum, eigenvalue_forms_agree, importance_profile,
                        rejection_probabilities, stationary_distribution, tv_decay_bound, tv_decay_curves)


def random_instance(rng, n):
    a = rng.uniform(0.5, 2.0, n)
    Q = rng.uniform(0.5, 2.0, n)
    return a / a.sum(), Q / Q.sum()


def test_two_state_kernel():
    P = build_kernel([0.75, 0.25], [0.5, 0.5])
    np.testing.assert_allclose(P.entries, [[5 / 6, 1 / 6], [0.5, 0.5]], atol=1e-12)
    np.testing.assert_allclose(stationary_distribution(P), [0.75, 0.25], atol=1e-12)


def test_kernel_is_reversible_and_stochastic():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, Q = random_instance(rng, int(rng.integers(2, 9)))
        P = build_kernel(a, Q).entries
        np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_allclose(a @ P, a, atol=1e-12)
        flows = a[:, None] * P
        np.testing.assert_allclose(flows, flows.T, atol=1e-12)


def test_kernel_with_proposal_matrix():
    Q = np.array([[0.2, 0.8], [0.6, 0.4]])
    P = build_kernel([0.5, 0.5], Q).entries
    # accept 1 -> 2 with min(1, 0.6 / 0.8)
    assert P[0, 1] == pytest.approx(0.8 * 0.75)
    assert P[1, 0] == pytest.approx(0.6)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
    with pytest.raises(ValueError, match="Proposal must be"):
        build_kernel([0.5, 0.5], np.ones((3, 3)) / 3)


def test_exact_approximation_gives_independent_draws():
    """With a equal to Q every proposal is accepted and the chain mixes in one step."""
    a = np.array([0.1, 0.2, 0.3, 0.4])
    P = build_kernel(a, a).entries
    np.testing.assert_allclose(P, np.tile(a, (4, 1)), atol=1e-12)
    eigenvalues = np.sort(np.abs(linalg.eigvals(P)))[::-1]
    np.testing.assert_allclose(eigenvalues, [1.0, 0.0, 0.0, 0.0], atol=1e-12)

    report = closed_form_spectrum(a, a, p0=[0.0, 0.0, 1.0, 0.0])
    np.testing.assert_allclose(report.lambdas, [1.0, 0.0, 0.0, 0.0], atol=1e-12)
    assert report.oracle_gap < 1e-10
    assert report.max_residual < 1e-12
    np.testing.assert_allclose(report.thetas @ report.vectors, [0.0, 0.0, 1.0, 0.0], atol=1e-12)
    bound, exact = tv_decay_curves(report, [0.0, 0.0, 1.0, 0.0], 3)
    np.testing.assert_allclose(exact, [0.7, 0.0, 0.0, 0.0], atol=1e-12)
    assert np.all(exact <= bound + 1e-12)


def test_two_state_spectrum():
    report = closed_form_spectrum([0.75, 0.25], [0.5, 0.5], p0=[0.0, 1.0])
    np.testing.assert_allclose(report.lambdas, [1.0, 1 / 3], atol=1e-12)
    np.testing.assert_allclose(report.vectors[1], [-0.25, 0.25], atol=1e-12)
    np.testing.assert_allclose(report.thetas, [1.0, 3.0], atol=1e-12)
    assert report.max_residual < 1e-10
    assert report.oracle_gap < 1e-12


def test_random_spectra_match_dense_solver():
    rng = np.random.default_rng(42)
    for _ in range(100):
        n = int(rng.integers(2, 9))
        a, Q = random_instance(rng, n)
        report = closed_form_spectrum(a, Q)
        assert report.oracle_gap < 1e-9
        assert report.max_residual < 1e-10
        assert np.all(np.diff(report.lambdas) <= 1e-12)
        assert np.all(report.lambdas >= 0) and report.lambdas[0] == 1.0
        np.testing.assert_allclose(report.vectors[1:].sum(axis=1), 0.0, atol=1e-12)
        np.testing.assert_allclose(report.vectors[0], a, atol=1e-15)
        assert eigenvalue_forms_agree(a, Q)


def test_lambdas_are_rejection_probabilities():
    """lambda_k is the rejection probability of the state ranked k."""
    rng = np.random.default_rng(7)
    for _ in range(20):
        a, Q = random_instance(rng, 6)
        report = closed_form_spectrum(a, Q)
        rejection = rejection_probabilities(report.kernel, Q)
        order = report.profile.order
        np.testing.assert_allclose(rejection[order[:-1]], report.lambdas[1:], atol=1e-12)
        assert abs(rejection[order[-1]]) < 1e-12


def test_tied_ratios():
    with pytest.raises(NonDiagonalisableError, match="non-diagonalisable case out of scope") as excinfo:
        closed_form_spectrum([0.2, 0.4, 0.4], [0.5, 0.25, 0.25])
    assert excinfo.value.pair == (2, 3)


def test_invalid_inputs():
    with pytest.raises(ValueError, match="strictly positive"):
        closed_form_spectrum([1.0, 0.0], [0.5, 0.5])
    with pytest.raises(ValueError, match="sum to 1"):
        closed_form_spectrum([0.5, 0.6], [0.5, 0.5])
    with pytest.raises(ValueError, match="3 states"):
        importance_profile([0.2, 0.3, 0.5], [0.5, 0.5])


def test_two_state_tv_decay():
    report = closed_form_spectrum([0.75, 0.25], [0.5, 0.5])
    for p0, constant in (([1.0, 0.0], 0.25), ([0.0, 1.0], 0.75)):
        bound, exact = tv_decay_curves(report, p0, 40)
        expected = constant * (1 / 3) ** np.arange(41)
        np.testing.assert_allclose(exact, expected, atol=1e-12)
        np.testing.assert_allclose(bound, expected, atol=1e-12)

    bound, exact = tv_decay_bound(report, [0.75, 0.25], 10)
    assert exact < 1e-12 and bound < 1e-12


def test_tv_envelope_on_random_instances():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(2, 7))
        a, Q = random_instance(rng, n)
        p0 = np.zeros(n)
        p0[rng.integers(n)] = 1.0
        report = closed_form_spectrum(a, Q)
        bound, exact = tv_decay_curves(report, p0, 100)
        assert np.all(exact <= bound + 1e-12)


def test_tv_decays_at_rate_lambda_1():
    a = np.array([0.6, 0.15, 0.1, 0.08, 0.05, 0.02])
    Q = np.full(6, 1 / 6)
    report = closed_form_spectrum(a, Q)
    p0 = np.zeros(6)
    p0[report.profile.order[0]] = 1.0
    _, exact = tv_decay_curves(report, p0, 60)
    steps = np.arange(10, 61)
    slope = np.polyfit(steps, np.log(exact[10:]), 1)[0]
    assert slope == pytest.approx(np.log(report.lambda_1), rel=0.02)
