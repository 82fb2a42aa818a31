"""Signal synthesis, masking, noise injection, and the Toeplitz oracle."""

from pathlib import Path

import numpy as np
import numpy.testing as npt
import pytest

from smartdoa.model import (
    ArrayGeometry,
    Observation,
    Scenario,
    SourceEnsemble,
    add_noise,
    apply_mask,
    load_scenario,
    make_observation,
    random_ensemble,
    save_scenario,
    steering_matrix,
    steering_vector,
    synthesize,
    toeplitz_truth,
)
from smartdoa.structured import assemble_block, hankel_lift, toeplitz_lift

DATA = Path(__file__).parent / "data"


def paired_fixture():
    return SourceEnsemble(
        theta=np.deg2rad([-2.0, 1.0]),
        b=np.array([1.79, 2.62]),
        phi=np.array([[-2.4, -1.52, 1.90], [-1.45, -1.58, 1.22]]),
    )


def test_steering_vector_examples():
    npt.assert_array_equal(steering_vector(0.0, 4), np.ones(4))
    npt.assert_allclose(steering_vector(-np.pi / 2, 2), [1, -1], atol=1e-12)
    npt.assert_allclose(steering_vector(np.deg2rad(30), 3), [1, 1j, -1], atol=1e-12)
    assert np.all(np.abs(steering_vector(0.7, 9)) == 1.0)


def test_steering_vector_domain():
    with pytest.raises(ValueError):
        steering_vector(np.pi / 2, 3)
    with pytest.raises(ValueError):
        steering_vector(-2.0, 3)


def test_synthesize_single_source_constant():
    ens = SourceEnsemble(theta=np.array([0.0]), b=np.array([2.0]), phi=np.zeros((1, 3)))
    npt.assert_allclose(synthesize(ens, 4, 3), np.full((4, 3), 2.0 + 0j))


def test_synthesize_column_norm_bound():
    ens = SourceEnsemble(theta=np.deg2rad([-10.0, 25.0]), b=np.array([1.5, 0.7]),
                         phi=np.array([[0.4], [2.2]]))
    x = synthesize(ens, 6, 1)
    assert np.linalg.norm(x[:, 0]) <= np.sqrt(6) * (1.5 + 0.7) + 1e-12


def test_synthesize_fixture_matches_elementwise_oracle():
    ens = paired_fixture()
    x = synthesize(ens, 15, 3)
    oracle = np.zeros((15, 3), dtype=complex)
    for m in range(15):
        for l in range(3):
            for k in range(2):
                oracle[m, l] += ens.b[k] * np.exp(
                    1j * (np.pi * m * np.sin(ens.theta[k]) + ens.phi[k, l]))
    npt.assert_allclose(x, oracle, rtol=1e-13)


def test_synthesize_snapshot_mismatch():
    ens = paired_fixture()
    with pytest.raises(ValueError):
        synthesize(ens, 15, 5)


def test_constant_modulus_rows():
    ens = random_ensemble(np.random.default_rng(3), 4, 6, 15)
    sig = ens.signal()
    npt.assert_allclose(np.abs(sig), np.tile(ens.b[:, None], (1, 6)), rtol=1e-13)


def test_apply_mask():
    x = np.arange(12, dtype=float).reshape(4, 3)
    npt.assert_array_equal(apply_mask(x, range(4)), x)
    only_first = apply_mask(np.ones((3, 2)), [0])
    npt.assert_array_equal(only_first, [[1, 1], [0, 0], [0, 0]])


def test_apply_mask_sparse_fixture():
    omega = tuple(q - 1 for q in (1, 2, 3, 5, 6, 7, 8, 9, 10, 15))
    x = np.ones((15, 2))
    masked = apply_mask(x, omega)
    zeroed = sorted(set(range(15)) - set(omega))
    assert zeroed == [3, 10, 11, 12, 13]
    npt.assert_array_equal(masked[zeroed], 0)
    npt.assert_array_equal(masked[list(omega)], 1)


def test_apply_mask_out_of_range():
    with pytest.raises(IndexError):
        apply_mask(np.ones((3, 2)), [0, 5])


def test_add_noise_exact_snr():
    rng = np.random.default_rng(5)
    ens = random_ensemble(rng, 2, 4, 9)
    x = synthesize(ens, 9, 4)
    omega = range(9)
    for snr in (0.0, 17.3, 40.0):
        y = add_noise(x, snr, omega, 123)
        measured = 10 * np.log10(np.linalg.norm(x) ** 2 / np.linalg.norm(y - x) ** 2)
        npt.assert_allclose(measured, snr, atol=1e-12)


def test_add_noise_noiseless_sentinel_and_zero_signal():
    x = np.ones((3, 2), dtype=complex)
    npt.assert_array_equal(add_noise(x, np.inf, range(3), 0), x)
    with pytest.raises(ZeroDivisionError):
        add_noise(np.zeros((3, 2)), 10.0, range(3), 0)


def test_add_noise_masked_rows_stay_zero():
    omega = (0, 2)
    x = apply_mask(np.ones((4, 3), dtype=complex), omega)
    y = add_noise(x, 10.0, omega, 7)
    npt.assert_array_equal(y[[1, 3]], 0)
    assert np.all(y[[0, 2]] != x[[0, 2]])


def test_add_noise_golden_reproducibility():
    # pinned output of the seeded generator; guards the rng contract
    ens = SourceEnsemble(theta=np.deg2rad([10.0]), b=np.array([1.5]),
                         phi=np.array([[0.3, -1.1]]))
    x = synthesize(ens, 4, 2)
    y = add_noise(x, 20.0, range(4), 42)
    golden = np.load(DATA / "noise_seed42.npy")
    assert y.tobytes() == golden.tobytes()


def test_toeplitz_truth_examples():
    ens1 = SourceEnsemble(theta=np.array([0.0]), b=np.array([3.0]), phi=np.zeros((1, 1)))
    npt.assert_allclose(toeplitz_truth(ens1, 5), np.full(5, 3.0 + 0j))

    theta = 0.62
    ens2 = SourceEnsemble(theta=np.array([theta]), b=np.array([1.3]), phi=np.zeros((1, 1)))
    expected = 1.3 * np.exp(1j * np.pi * np.arange(4) * np.sin(theta))
    npt.assert_allclose(toeplitz_truth(ens2, 4), expected, rtol=1e-13)


def test_toeplitz_truth_two_sources_rank():
    theta = np.deg2rad([-25.0, 40.0])
    ens = SourceEnsemble(theta=theta, b=np.array([1.0, 1.0]), phi=np.zeros((2, 1)))
    t = toeplitz_truth(ens, 6)
    expected = np.exp(1j * np.pi * np.arange(6)[:, None] * np.sin(theta)).sum(axis=1)
    npt.assert_allclose(t, expected, rtol=1e-13)
    vals = np.linalg.eigvalsh(toeplitz_lift(t))
    assert np.sum(vals > 1e-10 * vals[-1]) == 2
    a = steering_matrix(theta, 6)
    npt.assert_allclose(toeplitz_lift(t), a @ a.conj().T, rtol=1e-12)


def test_block_membership_random_ensembles():
    # Hankel-Toeplitz blocks of true signals are PSD with rank <= K
    rng = np.random.default_rng(11)
    for _ in range(20):
        k = int(rng.integers(1, 5))
        l = int(rng.integers(1, 5))
        ens = random_ensemble(rng, k, l, 15)
        x = synthesize(ens, 15, l)
        t = toeplitz_truth(ens, 8)
        for col in range(l):
            vals = np.linalg.eigvalsh(assemble_block(x[:, col], t))
            lam1 = vals[-1]
            assert vals[0] >= -1e-10 * lam1
            assert vals[-(k + 1)] <= 1e-10 * lam1


def test_schur_identity():
    rng = np.random.default_rng(13)
    ens = random_ensemble(rng, 3, 4, 15)
    b = np.diag(ens.b)
    sig = ens.signal()
    for l in range(4):
        lhs = b - np.diag(sig[:, l].conj()) @ np.linalg.inv(b) @ np.diag(sig[:, l])
        assert np.linalg.norm(lhs) < 1e-12 * np.linalg.norm(b)


def test_hankel_factorization_identity():
    rng = np.random.default_rng(17)
    ens = random_ensemble(rng, 3, 2, 13)
    x = synthesize(ens, 13, 2)
    a_n = steering_matrix(ens.theta, 7)
    sig = ens.signal()
    for l in range(2):
        lifted = hankel_lift(x[:, l])
        factored = a_n @ np.diag(sig[:, l]) @ a_n.T
        assert np.linalg.norm(lifted - factored) < 1e-12 * np.linalg.norm(lifted)


def test_ensemble_validation():
    with pytest.raises(ValueError):
        SourceEnsemble(theta=np.array([0.1, 0.1]), b=np.array([1, 1]), phi=np.zeros((2, 2)))
    with pytest.raises(ValueError):
        SourceEnsemble(theta=np.array([0.1, 0.2]), b=np.array([1, 0]), phi=np.zeros((2, 2)))
    with pytest.raises(ValueError):
        SourceEnsemble(theta=np.array([0.1]), b=np.array([1.0]), phi=np.zeros((2, 2)))


def test_geometry_validation():
    with pytest.raises(ValueError):
        ArrayGeometry(4, (0, 1))  # even aperture
    with pytest.raises(ValueError):
        ArrayGeometry(5, ())
    with pytest.raises(ValueError):
        ArrayGeometry(5, (3, 1))
    with pytest.raises(ValueError):
        ArrayGeometry(5, (0, 7))
    geom = ArrayGeometry(7, (0, 2, 6))
    assert geom.n_half == 4 and not geom.is_full


def test_observation_zero_rows_enforced():
    geom = ArrayGeometry(5, (0, 1))
    with pytest.raises(ValueError):
        Observation(y=np.ones((5, 2)), geometry=geom)


def test_random_ensemble_separation():
    rng = np.random.default_rng(19)
    for _ in range(20):
        ens = random_ensemble(rng, 4, 2, 15)
        sines = np.sort(np.sin(ens.theta))
        assert np.min(np.diff(sines)) >= 2.0 / 15


def test_even_aperture_embedding():
    sc = Scenario(n_sensors=6, k=1, theta_deg=np.array([5.0]), b=np.array([1.0]), l=2)
    geom = sc.geometry
    assert geom.n_virtual == 7 and geom.omega == tuple(range(6))


def test_scenario_roundtrip(tmp_path):
    sc = Scenario(n_sensors=15, k=2, theta_deg=np.array([-2.0, 1.0]),
                  b=np.array([0.54, 1.30]), l=5, seed=9, snr_db=30.0,
                  omega=tuple(q - 1 for q in (1, 2, 3, 5, 6, 7, 8, 9, 10, 15)),
                  phi=np.array([[-0.63, 0.70, 2.45, 2.54, 0.83],
                                [2.32, -1.38, 1.52, 0.61, -0.36]]))
    path = tmp_path / "scenario.cfg"
    save_scenario(sc, path)
    text = path.read_text()
    assert "omega = 1,2,3,5,6,7,8,9,10,15" in text  # files are 1-based
    back = load_scenario(path)
    assert back.n_sensors == sc.n_sensors and back.k == sc.k and back.l == sc.l
    npt.assert_array_equal(back.theta_deg, sc.theta_deg)
    npt.assert_array_equal(back.b, sc.b)
    assert back.omega == sc.omega and back.seed == sc.seed
    npt.assert_allclose(back.phi, sc.phi)
    assert back.snr_db == sc.snr_db


def test_scenario_file_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("n = 15\nk = 2\n")  # missing keys
    with pytest.raises(ValueError):
        load_scenario(bad)
    bad.write_text("this is not a key value line\n")
    with pytest.raises(ValueError):
        load_scenario(bad)


def test_make_observation_deterministic():
    sc = Scenario(n_sensors=9, k=2, theta_deg=np.array([-5.0, 20.0]),
                  b=np.array([1.0, 2.0]), l=3, seed=21, snr_db=15.0)
    obs1, ens1 = make_observation(sc)
    obs2, ens2 = make_observation(sc)
    npt.assert_array_equal(obs1.y, obs2.y)
    npt.assert_array_equal(ens1.phi, ens2.phi)
