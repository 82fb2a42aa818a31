"""Vandermonde decomposition, phase recovery, and DOA error metrics."""

import numpy as np
import numpy.testing as npt
import pytest

from smartdoa.model import SourceEnsemble, random_ensemble, synthesize, toeplitz_truth
from smartdoa.retrieval import (
    DegeneratePhaseWarning,
    estimate_parameters,
    match_rmse,
    matched_differences,
    recover_phases,
    resolved,
    vandermonde_decompose,
)


def test_decompose_single_source_broadside():
    ens = SourceEnsemble(theta=np.array([0.0]), b=np.array([3.0]), phi=np.zeros((1, 1)))
    theta, b = vandermonde_decompose(toeplitz_truth(ens, 5), 1)
    npt.assert_allclose(theta, [0.0], atol=1e-12)
    npt.assert_allclose(b, [3.0], rtol=1e-12)


def test_decompose_two_sources_exact():
    ens = SourceEnsemble(theta=np.deg2rad([-40.0, 30.0]), b=np.array([2.0, 8.0]),
                         phi=np.zeros((2, 1)))
    theta, b = vandermonde_decompose(toeplitz_truth(ens, 7), 2)
    npt.assert_allclose(theta, np.deg2rad([-40.0, 30.0]), atol=1e-8)
    npt.assert_allclose(b, [2.0, 8.0], atol=1e-8)


def test_decompose_roundtrip_random():
    rng = np.random.default_rng(5)
    for _ in range(30):
        n = int(rng.integers(4, 10))
        k = int(rng.integers(1, n))
        ens = random_ensemble(rng, k, 1, 2 * n - 1)
        theta, b = vandermonde_decompose(toeplitz_truth(ens, n), k)
        order = np.argsort(ens.theta)
        npt.assert_allclose(theta, ens.theta[order], atol=1e-8)
        npt.assert_allclose(b, ens.b[order], atol=1e-8)


def test_decompose_scaling_invariance():
    rng = np.random.default_rng(7)
    ens = random_ensemble(rng, 3, 1, 11)
    t = toeplitz_truth(ens, 6)
    theta1, b1 = vandermonde_decompose(t, 3)
    theta2, b2 = vandermonde_decompose(2.5 * t, 3)
    npt.assert_allclose(theta1, theta2, atol=1e-10)
    npt.assert_allclose(2.5 * b1, b2, rtol=1e-9)


def test_decompose_dimension_error():
    with pytest.raises(ValueError):
        vandermonde_decompose(np.ones(4, dtype=complex), 4)
    with pytest.raises(ValueError):
        vandermonde_decompose(np.ones(4, dtype=complex), 0)


def test_recover_phases_exact_model():
    rng = np.random.default_rng(9)
    ens = random_ensemble(rng, 3, 5, 11)
    x = synthesize(ens, 11, 5)
    phi = recover_phases(x, ens.theta, ens.b)
    npt.assert_allclose(phi, np.exp(1j * ens.phi), atol=1e-10)
    assert np.max(np.abs(np.abs(phi) - 1.0)) <= 5e-16


def test_recover_phases_single_source():
    ens = SourceEnsemble(theta=np.array([0.0]), b=np.array([2.0]),
                         phi=np.array([[0.7, 0.7, 0.7]]))
    x = synthesize(ens, 5, 3)
    phi = recover_phases(x, ens.theta, ens.b)
    npt.assert_allclose(phi, np.full((1, 3), np.exp(0.7j)), atol=1e-12)


def test_recover_phases_degenerate_entry():
    x = np.zeros((5, 2), dtype=complex)  # no signal at all
    with pytest.warns(DegeneratePhaseWarning):
        phi = recover_phases(x, np.array([0.1]), np.array([1.0]))
    npt.assert_array_equal(phi, np.ones((1, 2), dtype=complex))


def test_estimate_parameters_end_to_end():
    rng = np.random.default_rng(11)
    ens = random_ensemble(rng, 2, 4, 9)
    x = synthesize(ens, 9, 4)
    result = estimate_parameters(x, toeplitz_truth(ens, 5), 2)
    assert result.fit_residual < 1e-7 * np.linalg.norm(x)
    assert np.all(np.diff(result.theta_hat) > 0)
    order = np.argsort(ens.theta)
    npt.assert_allclose(result.theta_hat, ens.theta[order], atol=1e-8)
    npt.assert_allclose(result.phi_hat, np.exp(1j * ens.phi)[order], atol=1e-6)


def test_match_rmse_basic():
    v = np.deg2rad([-10.0, 5.0, 40.0])
    assert match_rmse(v, v) == 0.0
    assert match_rmse(v[::-1], v) == 0.0  # permutation invariant
    rng = np.random.default_rng(13)
    for _ in range(10):
        perm = rng.permutation(3)
        assert match_rmse(v[perm], v) == 0.0


def test_match_rmse_hand_computed():
    theta = np.deg2rad([-2.0, 1.0])
    theta_hat = np.deg2rad([-1.0, 2.0])
    npt.assert_allclose(match_rmse(theta_hat, theta), 1.0, rtol=1e-12)


def test_match_rmse_length_mismatch():
    with pytest.raises(ValueError):
        match_rmse(np.zeros(2), np.zeros(3))


def test_resolved_rules():
    theta = np.deg2rad([-2.0, 1.0])
    assert resolved(theta, theta)
    # |2.6 - 1| = 1.6 >= 3/2
    assert not resolved(np.deg2rad([-2.0, 2.6]), theta)
    assert resolved(np.deg2rad([-2.0, 2.4]), theta)
    # single source: vacuous neighbor rule, anything within 90 degrees
    assert resolved(np.deg2rad([44.0]), np.deg2rad([-44.0]))
    assert not resolved(np.deg2rad([50.0]), np.deg2rad([-50.0]))
    with pytest.raises(ValueError):
        resolved(theta, theta[::-1])  # unsorted truth


def test_resolved_three_sources_neighbor_gaps():
    theta = np.deg2rad([-2.0, 1.0, 30.0])
    good = np.deg2rad([-1.0, 0.0, 32.0])
    assert resolved(good, theta)
    # middle source limited by min(3, 29)/2 = 1.5 degrees
    assert not resolved(np.deg2rad([-2.0, 2.6, 30.0]), theta)


def test_matched_differences_alignment():
    theta = np.deg2rad([-30.0, 10.0])
    theta_hat = np.deg2rad([12.0, -31.0])
    d = matched_differences(theta_hat, theta)
    npt.assert_allclose(np.degrees(d), [-1.0, 2.0], atol=1e-12)
