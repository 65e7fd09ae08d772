"""Spatially correlated Rayleigh channel synthesis for a uniform linear array downlink."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array: antenna count and element spacing in wavelengths."""

    n_antennas: int
    spacing: float = 0.5

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ValueError("n_antennas must be >= 1")
        if not np.isfinite(self.spacing) or self.spacing <= 0:
            raise ValueError("spacing must be a positive finite number")


@dataclass
class UserProfile:
    """Large-scale description of one user as seen from the array."""

    position: np.ndarray        # (2,) metres, array at the origin
    nominal_angle: float        # radians
    asd: float                  # angular standard deviation, radians
    shadowing_db: float
    beta: float                 # average channel gain, linear
    R: np.ndarray               # (M, M) covariance of the fading vector
    cluster: int = 0            # index of the geographic cluster the user came from


@dataclass
class ChannelRealization:
    """One small-scale fading draw, tagged with its index and seed for replay."""

    h: np.ndarray
    realization_index: int
    rng_seed: int


def steering_vector(azimuth: float, geometry: ArrayGeometry) -> np.ndarray:
    """Array response of the ULA toward ``azimuth``; element m has phase 2*pi*spacing*m*cos(azimuth)."""
    if not np.isfinite(azimuth):
        raise ValueError("azimuth must be finite")
    m = np.arange(geometry.n_antennas)
    return np.exp(2j * np.pi * geometry.spacing * m * np.cos(azimuth))


def path_loss_db(f_ghz: float, d_m: float) -> float:
    """Distance power law 32.4 + 20*log10(f_GHz) + 37.6*log10(d_m) in dB."""
    if f_ghz <= 0 or d_m <= 0:
        raise ValueError("carrier frequency and distance must be positive")
    return 32.4 + 20.0 * np.log10(f_ghz) + 37.6 * np.log10(d_m)


def large_scale_coefficient(R: np.ndarray) -> float:
    """Average channel gain of a covariance matrix, trace(R)/M."""
    return float(np.trace(R).real) / R.shape[0]


def correlation_matrix(nominal_angle: float, asd: float, beta: float,
                       geometry: ArrayGeometry, n_rays: int = 200) -> np.ndarray:
    """Covariance of the fading vector under a local-scattering ring of rays.

    Ray angles follow a Gaussian around ``nominal_angle`` with standard
    deviation ``asd``, truncated at four standard deviations and averaged over
    ``n_rays`` deterministic quadrature nodes.  The diagonal equals ``beta``
    exactly because each steering vector has unit-modulus entries.

    Args:
        nominal_angle: centre azimuth in radians.
        asd: angular standard deviation in radians (0 collapses to rank one).
        beta: average channel gain, linear scale.
        geometry: array layout.
        n_rays: number of quadrature nodes.

    Returns:
        (M, M) Hermitian PSD complex matrix with trace M*beta.
    """
    if not (np.isfinite(nominal_angle) and np.isfinite(asd) and np.isfinite(beta)):
        raise ValueError("nominal_angle, asd and beta must be finite")
    if beta <= 0:
        raise ValueError("beta must be positive")
    if asd < 0:
        raise ValueError("asd must be non-negative")
    if n_rays < 1:
        raise ValueError("n_rays must be >= 1")
    if asd == 0 or n_rays == 1:
        a = steering_vector(nominal_angle, geometry)
        return beta * np.outer(a, a.conj())
    # midpoint nodes over the +/- 4 sigma window, Gaussian weighted
    edges = np.linspace(-4.0 * asd, 4.0 * asd, n_rays + 1)
    offsets = 0.5 * (edges[:-1] + edges[1:])
    weights = np.exp(-0.5 * (offsets / asd) ** 2)
    weights /= weights.sum()
    m = np.arange(geometry.n_antennas)
    rays = np.exp(2j * np.pi * geometry.spacing
                  * np.outer(np.cos(nominal_angle + offsets), m))  # (n_rays, M)
    R = (weights[:, None] * rays).T @ rays.conj()
    R *= beta
    return 0.5 * (R + R.conj().T)


def sample_shadowing(cluster_ids: np.ndarray, var_db: float, intra_corr: float,
                     rng: np.random.Generator) -> np.ndarray:
    """Jointly Gaussian shadowing in dB: variance ``var_db`` per user,
    correlation ``intra_corr`` inside a cluster, zero across clusters."""
    if var_db < 0:
        raise ValueError("var_db must be non-negative")
    if not 0.0 <= intra_corr <= 1.0:
        raise ValueError("intra_corr must lie in [0, 1]")
    cluster_ids = np.asarray(cluster_ids)
    labels, inverse = np.unique(cluster_ids, return_inverse=True)
    common = rng.standard_normal(labels.size)[inverse]
    own = rng.standard_normal(cluster_ids.size)
    std = np.sqrt(var_db)
    return std * (np.sqrt(intra_corr) * common + np.sqrt(1.0 - intra_corr) * own)


def channel_factor(R: np.ndarray) -> np.ndarray:
    """Square-root factor F with F F^H = R, tolerating rank-deficient covariances.

    Eigenvalues below -1e-10 * trace(R)/M indicate a genuinely indefinite
    input and raise; small negative rounding noise is clamped to zero.
    """
    beta = large_scale_coefficient(R)
    evals, evecs = np.linalg.eigh(R)
    if evals.min() < -1e-10 * beta:
        raise ValueError("covariance is not PSD within tolerance")
    evals = np.clip(evals, 0.0, None)
    return evecs * np.sqrt(evals)


def sample_channels(R: np.ndarray, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` circularly symmetric complex Gaussian vectors with covariance R, shape (n, M)."""
    F = channel_factor(R)
    m = R.shape[0]
    z = (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / np.sqrt(2.0)
    return z @ F.T


def sample_channel(R: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Single fading draw with covariance R."""
    return sample_channels(R, rng, 1)[0]


def draw_realizations(R: np.ndarray, n: int, seed: int) -> list[ChannelRealization]:
    """Indexed fading draws; realization i uses the child stream (seed, i) so any
    single draw can be replayed in isolation."""
    out = []
    F = channel_factor(R)
    m = R.shape[0]
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        z = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2.0)
        out.append(ChannelRealization(h=F @ z, realization_index=i, rng_seed=seed))
    return out
