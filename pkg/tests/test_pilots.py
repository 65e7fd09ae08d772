import numpy as np
import pytest

from mcmimo.channel import ArrayGeometry, correlation_matrix, sample_channels
from mcmimo.pilots import (
    composite_channel,
    composite_estimator_matrix,
    despread,
    estimate_block,
    make_pilots,
    mmse_composite_estimate,
    mmse_user_estimate,
    ul_pilot_observation,
)


def test_pilot_gram_is_scaled_identity():
    book = make_pilots(8)
    gram = book.matrix.conj().T @ book.matrix
    assert np.allclose(gram, 8.0 * np.eye(8), atol=1e-12)
    assert book.tau_p == 8


def test_make_pilots_rejects_nonpositive():
    with pytest.raises(ValueError):
        make_pilots(0)


def test_noiseless_observation_despreads_to_scaled_channel():
    rng = np.random.default_rng(0)
    book = make_pilots(3)
    h = (rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))) / np.sqrt(2)
    assignment = np.array([0, 1, 2])
    Y = ul_pilot_observation(h, assignment, book, q=1.0, sigma2=0.0, rng=rng)
    for g in range(3):
        y = despread(Y, book.matrix[:, g])
        assert np.allclose(y, 3.0 * h[g], atol=1e-12)


def test_despread_cross_group_leakage_vanishes():
    book = make_pilots(4)
    h = np.ones(5, dtype=complex)
    Y = np.outer(h, book.matrix[:, 2])
    leak = despread(Y, book.matrix[:, 0])
    assert np.abs(leak).max() < 1e-12


def test_observation_zero_power_is_noise_with_variance_sigma2():
    rng = np.random.default_rng(1)
    book = make_pilots(2)
    h = np.zeros((2, 3), dtype=complex)
    sigma2 = 0.7
    samples = np.stack([
        ul_pilot_observation(h, np.array([0, 1]), book, q=0.0, sigma2=sigma2, rng=rng)
        for _ in range(10_000)
    ])
    var = samples.var()
    assert var == pytest.approx(sigma2, rel=0.05)


def test_despread_noise_covariance_is_tau_p_sigma2():
    rng = np.random.default_rng(2)
    tau_p, m, sigma2 = 3, 2, 0.5
    book = make_pilots(tau_p)
    draws = []
    for _ in range(10_000):
        noise = np.sqrt(sigma2 / 2) * (rng.standard_normal((m, tau_p)) + 1j * rng.standard_normal((m, tau_p)))
        draws.append(despread(noise, book.matrix[:, 1]))
    draws = np.array(draws)
    cov = draws.T @ draws.conj() / len(draws)
    assert np.allclose(cov, tau_p * sigma2 * np.eye(m), atol=0.05 * tau_p * sigma2)


def test_scalar_user_estimate_matches_closed_form():
    # with M = 1 the estimator reduces to sqrt(q)*beta*y / (tau_p*q*beta + sigma2)
    beta, q, sigma2, tau_p = 1.8, 0.9, 0.4, 3
    R = np.array([[beta]], dtype=complex)
    y = np.array([2.0 - 1.0j])
    got = mmse_user_estimate(R, q, [R], [q], y, sigma2, tau_p)
    want = np.sqrt(q) * beta * y / (tau_p * q * beta + sigma2)
    assert np.allclose(got, want, atol=1e-12)


def test_user_estimate_noiseless_full_rank_recovers_channel():
    geom = ArrayGeometry(4, 0.5)
    R = correlation_matrix(0.8, np.deg2rad(20.0), 1.3, geom)
    rng = np.random.default_rng(3)
    h = sample_channels(R, rng, 1)[0]
    tau_p, q = 2, 1.0
    y = np.sqrt(q) * tau_p * h  # noiseless despread observation of a lone user
    got = mmse_user_estimate(R, q, [R], [q], y, 0.0, tau_p)
    assert np.allclose(got, h, atol=1e-9)


def test_user_estimate_vanishes_for_huge_noise():
    R = np.eye(3, dtype=complex)
    y = np.array([1.0, 2.0, 3.0], dtype=complex)
    got = mmse_user_estimate(R, 1.0, [R], [1.0], y, 1e12, 2)
    assert np.abs(got).max() < 1e-10


def test_user_estimate_rejects_singular_system():
    a = np.ones(2, dtype=complex)
    R = np.outer(a, a.conj())  # rank one, so sigma2 = 0 leaves a singular system
    with pytest.raises(np.linalg.LinAlgError):
        mmse_user_estimate(R, 1.0, [R], [1.0], np.ones(2, dtype=complex), 0.0, 2)


def test_composite_single_user_scales_user_estimate():
    geom = ArrayGeometry(5, 0.5)
    R = correlation_matrix(0.2, np.deg2rad(15.0), 0.7, geom)
    y = np.linspace(1, 5, 5) + 1j * np.linspace(-1, 1, 5)
    q, sigma2, tau_p = 0.6, 0.3, 4
    comp = mmse_composite_estimate([R], [q], y, sigma2, tau_p)
    user = mmse_user_estimate(R, q, [R], [q], y, sigma2, tau_p)
    assert np.allclose(comp, tau_p * np.sqrt(q) * user, atol=1e-12)


def test_composite_two_equal_covariances_estimator_matrix():
    R = np.diag([2.0, 1.0]).astype(complex)
    q, sigma2, tau_p = 1.0, 0.5, 2
    T = composite_estimator_matrix([R, R], [q, q], sigma2, tau_p)
    A = 2 * tau_p * q * R + sigma2 * np.eye(2)
    want = tau_p * (2 * q * R) @ np.linalg.inv(A)
    assert np.allclose(T, want, atol=1e-12)


def test_estimator_is_linear_in_observation():
    R = np.diag([1.0, 3.0]).astype(complex)
    y1 = np.array([1.0 + 1j, 2.0])
    y2 = np.array([-0.5j, 1.0 - 2j])
    one = mmse_composite_estimate([R], [1.0], y1, 0.2, 2)
    two = mmse_composite_estimate([R], [1.0], y2, 0.2, 2)
    both = mmse_composite_estimate([R], [1.0], y1 + y2, 0.2, 2)
    assert np.allclose(both, one + two, atol=1e-12)


def _composite_mc(sigma2, n_trials, seed):
    """Monte Carlo joint draws of (composite channel, composite estimate)."""
    geom = ArrayGeometry(4, 0.5)
    R1 = correlation_matrix(0.4, np.deg2rad(10.0), 1.0, geom)
    R2 = correlation_matrix(0.9, np.deg2rad(10.0), 0.5, geom)
    q = [1.0, 1.0]
    tau_p = 2
    book = make_pilots(tau_p)
    psi = book.matrix[:, 0]
    rng = np.random.default_rng(seed)
    T = composite_estimator_matrix([R1, R2], q, sigma2, tau_p)
    h_c = np.empty((n_trials, 4), dtype=complex)
    h_hat = np.empty((n_trials, 4), dtype=complex)
    for t in range(n_trials):
        h = np.stack([sample_channels(R1, rng, 1)[0], sample_channels(R2, rng, 1)[0]])
        Y = ul_pilot_observation(h, np.array([0, 0]), book, q=1.0, sigma2=sigma2, rng=rng)
        y = despread(Y, psi)
        h_c[t] = composite_channel(h, q, tau_p)
        h_hat[t] = T @ y
    return h_c, h_hat


def test_composite_estimate_orthogonal_to_error():
    h_c, h_hat = _composite_mc(sigma2=2.0, n_trials=10_000, seed=7)
    err = h_c - h_hat
    cross = h_hat.T @ err.conj() / h_hat.shape[0]
    scale = np.linalg.norm(h_hat.T @ h_hat.conj() / h_hat.shape[0])
    assert np.linalg.norm(cross) <= 0.03 * scale


def test_estimation_error_shrinks_with_noise():
    mses = []
    for sigma2 in (4.0, 0.5, 0.05):
        h_c, h_hat = _composite_mc(sigma2, n_trials=3_000, seed=11)
        mses.append(np.mean(np.abs(h_c - h_hat) ** 2))
    assert mses[0] > mses[1] > mses[2]


def test_estimate_block_composite_consistent_with_user_estimates():
    geom = ArrayGeometry(4, 0.5)
    rng = np.random.default_rng(9)
    Rs = [correlation_matrix(phi, np.deg2rad(10.0), b, geom)
          for phi, b in [(0.3, 1.0), (0.5, 2.0), (2.1, 0.8)]]
    assignment = np.array([0, 0, 1])
    h = np.stack([sample_channels(R, rng, 1)[0] for R in Rs])
    book = make_pilots(2)
    est = estimate_block(h, assignment, [r for r in Rs], book, q=1.0, sigma2=0.4, rng=rng)
    assert est.h_hat_user.shape == (3, 4)
    assert est.h_hat_composite.shape == (2, 4)
    # the composite estimate is exactly tau_p * sum(sqrt(q) * user estimates)
    for g in range(2):
        members = np.flatnonzero(assignment == g)
        stacked = 2 * np.sum(np.sqrt(1.0) * est.h_hat_user[members], axis=0)
        assert np.allclose(est.h_hat_composite[g], stacked, atol=1e-10)
