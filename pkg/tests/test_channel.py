import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from mcmimo.channel import (
    ArrayGeometry,
    channel_factor,
    correlation_matrix,
    draw_realizations,
    large_scale_coefficient,
    path_loss_db,
    sample_channel,
    sample_channels,
    sample_shadowing,
    steering_vector,
)

# Direct evaluations of the distance-power law, frozen from the closed form
# 32.4 + 20*log10(f_GHz) + 37.6*log10(d_m).
PL_2GHZ_100M = 113.62059991327962
PL_2GHZ_200M = 124.93932775024533


def oracle_correlation_entry(m, n, nominal_angle, asd, spacing):
    """Independent quadrature oracle for one covariance entry (unit large-scale gain).

    Integrates exp(j*2*pi*spacing*(m-n)*cos(angle)) against a Gaussian angular
    density truncated at +/- 4 standard deviations.
    """
    lo, hi = -4.0 * asd, 4.0 * asd
    pdf = lambda x: np.exp(-0.5 * (x / asd) ** 2)
    norm = quad(pdf, lo, hi)[0]
    re = quad(lambda x: np.cos(2 * np.pi * spacing * (m - n) * np.cos(nominal_angle + x)) * pdf(x), lo, hi, limit=200)[0]
    im = quad(lambda x: np.sin(2 * np.pi * spacing * (m - n) * np.cos(nominal_angle + x)) * pdf(x), lo, hi, limit=200)[0]
    return (re + 1j * im) / norm


def test_steering_broadside_all_ones():
    # at pi/2 the cosine vanishes, every element has zero phase
    a = steering_vector(np.pi / 2, ArrayGeometry(4, 0.5))
    assert np.allclose(a, np.ones(4), atol=1e-12)


def test_steering_endfire_alternates():
    a = steering_vector(0.0, ArrayGeometry(2, 0.5))
    assert np.allclose(a, [1.0, -1.0], atol=1e-12)
    # element m carries phase 2*pi*spacing*m*cos(phi)
    a8 = steering_vector(0.3, ArrayGeometry(8, 0.25))
    expect = np.exp(1j * 2 * np.pi * 0.25 * np.arange(8) * np.cos(0.3))
    assert np.allclose(a8, expect, atol=1e-12)


@given(phi=st.floats(-10.0, 10.0), m=st.integers(1, 32))
@settings(max_examples=60, deadline=None)
def test_steering_unit_modulus_and_mirror(phi, m):
    geom = ArrayGeometry(m, 0.5)
    a = steering_vector(phi, geom)
    assert np.allclose(np.abs(a), 1.0, atol=1e-12)
    # cos(2*pi - phi) == cos(phi): mirrored azimuth is indistinguishable
    assert np.allclose(a, steering_vector(2 * np.pi - phi, geom), atol=1e-9)


def test_steering_rejects_nonfinite():
    with pytest.raises(ValueError):
        steering_vector(np.nan, ArrayGeometry(4))


def test_path_loss_values():
    assert path_loss_db(2.0, 100.0) == pytest.approx(PL_2GHZ_100M, abs=1e-9)
    assert path_loss_db(2.0, 200.0) == pytest.approx(PL_2GHZ_200M, abs=1e-9)


def test_path_loss_rejects_nonpositive():
    with pytest.raises(ValueError):
        path_loss_db(0.0, 100.0)
    with pytest.raises(ValueError):
        path_loss_db(2.0, -1.0)


def test_correlation_matches_quadrature_oracle():
    geom = ArrayGeometry(8, 0.5)
    asd = np.deg2rad(10.0)
    beta = 2.5
    R = correlation_matrix(0.7, asd, beta, geom)
    for m, n in [(0, 1), (0, 4), (0, 7), (2, 5)]:
        want = beta * oracle_correlation_entry(m, n, 0.7, asd, 0.5)
        assert abs(R[m, n] - want) <= 1e-2 * abs(want) + 1e-9 * beta


def test_correlation_offdiag_decays_from_endfire():
    # stated behaviour at nominal angle 0: first-row magnitudes strictly decrease
    geom = ArrayGeometry(8, 0.5)
    R = correlation_matrix(0.0, np.deg2rad(10.0), 1.0, geom)
    mags = np.abs(R[0, :])
    assert np.all(np.diff(mags) < 0)


def test_correlation_basic_invariants():
    geom = ArrayGeometry(16, 0.5)
    beta = 3.7e-12
    R = correlation_matrix(1.1, np.deg2rad(10.0), beta, geom)
    assert np.allclose(R, R.conj().T, atol=1e-16 * beta)
    evals = np.linalg.eigvalsh(R)
    assert evals.min() >= -1e-10 * beta
    assert np.trace(R).real / 16 == pytest.approx(beta, rel=1e-9)
    # every diagonal entry equals the large-scale coefficient
    assert np.allclose(np.diag(R).real, beta, rtol=1e-9)
    assert large_scale_coefficient(R) == pytest.approx(beta, rel=1e-9)


def test_correlation_zero_spread_is_rank_one():
    geom = ArrayGeometry(8, 0.5)
    R = correlation_matrix(0.9, 0.0, 2.0, geom)
    a = steering_vector(0.9, geom)
    assert np.allclose(R, 2.0 * np.outer(a, a.conj()), atol=1e-12)
    evals = np.linalg.eigvalsh(R)
    assert evals[-1] == pytest.approx(2.0 * 8, rel=1e-12)
    assert np.all(evals[:-1] < 1e-10)


def test_correlation_rejects_bad_inputs():
    geom = ArrayGeometry(4)
    with pytest.raises(ValueError):
        correlation_matrix(0.0, 0.1, -1.0, geom)
    with pytest.raises(ValueError):
        correlation_matrix(np.inf, 0.1, 1.0, geom)
    with pytest.raises(ValueError):
        correlation_matrix(0.0, 0.1, 1.0, geom, n_rays=0)


def test_sample_shadowing_statistics():
    rng = np.random.default_rng(7)
    cluster_ids = np.repeat([0, 1], 2)
    n_trials = 20000
    draws = np.array([sample_shadowing(cluster_ids, 10.0, 0.99, rng) for _ in range(n_trials)])
    cov = np.cov(draws.T)
    corr = cov / np.sqrt(np.outer(np.diag(cov), np.diag(cov)))
    assert np.allclose(np.diag(cov), 10.0, rtol=0.05)
    assert corr[0, 1] == pytest.approx(0.99, abs=0.02)
    assert abs(corr[0, 2]) < 0.03
    assert abs(corr[1, 3]) < 0.03


def test_sample_shadowing_full_correlation_shares_draw():
    rng = np.random.default_rng(3)
    s = sample_shadowing(np.zeros(5, dtype=int), 10.0, 1.0, rng)
    assert np.allclose(s, s[0], atol=1e-12)


def test_sample_shadowing_rejects_bad_corr():
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        sample_shadowing(np.zeros(2, dtype=int), 10.0, 1.5, rng)
    with pytest.raises(ValueError):
        sample_shadowing(np.zeros(2, dtype=int), -1.0, 0.5, rng)


def test_sample_channel_covariance_converges():
    geom = ArrayGeometry(4, 0.5)
    R = correlation_matrix(0.4, np.deg2rad(10.0), 1.0, geom)
    rng = np.random.default_rng(11)
    draws = sample_channels(R, rng, 100_000)
    emp = draws.T @ draws.conj() / draws.shape[0]
    err = np.linalg.norm(emp - R) / np.linalg.norm(R)
    assert err <= 0.03


def test_sample_channel_zero_mean():
    geom = ArrayGeometry(4, 0.5)
    R = correlation_matrix(0.4, np.deg2rad(10.0), 2.0, geom)
    rng = np.random.default_rng(5)
    draws = sample_channels(R, rng, 100_000)
    assert np.abs(draws.mean(axis=0)).max() < 0.05


def test_sample_channel_rank_one_stays_on_line():
    geom = ArrayGeometry(6, 0.5)
    a = steering_vector(1.3, geom)
    R = 0.5 * np.outer(a, a.conj())
    rng = np.random.default_rng(2)
    h = sample_channel(R, rng)
    # draw must be proportional to the steering direction
    coef = (a.conj() @ h) / (a.conj() @ a)
    assert np.allclose(h, coef * a, atol=1e-10)


def test_channel_factor_reproduces_covariance():
    geom = ArrayGeometry(8, 0.5)
    R = correlation_matrix(0.2, np.deg2rad(10.0), 3.0, geom)
    F = channel_factor(R)
    assert np.allclose(F @ F.conj().T, R, atol=1e-10 * 3.0)


def test_channel_factor_rejects_indefinite():
    R = np.diag([1.0, -0.5]).astype(complex)
    with pytest.raises(ValueError):
        channel_factor(R)


def test_draw_realizations_indexed_and_reproducible():
    geom = ArrayGeometry(4, 0.5)
    R = correlation_matrix(0.4, np.deg2rad(10.0), 1.0, geom)
    reals = draw_realizations(R, 3, seed=123)
    again = draw_realizations(R, 3, seed=123)
    assert [r.realization_index for r in reals] == [0, 1, 2]
    for r, s in zip(reals, again):
        assert np.array_equal(r.h, s.h)
        assert r.rng_seed == s.rng_seed
