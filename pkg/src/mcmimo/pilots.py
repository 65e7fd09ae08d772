"""Shared-pilot uplink training and MMSE channel estimation.

All users of a subgroup transmit the same pilot sequence, so the base station
can only estimate each user's channel from the superposition it receives, and
the sum (composite) channel of the subgroup is what the precoder will see.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve


@dataclass(frozen=True)
class PilotBook:
    """Columns are per-subgroup pilot sequences with gram matrix tau_p * I."""

    matrix: np.ndarray  # (tau_p, n_groups)

    @property
    def tau_p(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_groups(self) -> int:
        return self.matrix.shape[1]


@dataclass
class EstimateSet:
    """Per-user and per-subgroup MMSE estimates for one coherence block."""

    h_hat_user: np.ndarray       # (K, M)
    h_hat_composite: np.ndarray  # (G, M)
    q: np.ndarray                # (K,) pilot powers
    sigma2: float


def make_pilots(n_groups: int) -> PilotBook:
    """DFT pilot family: tau_p = n_groups mutually orthogonal unit-modulus sequences."""
    if n_groups < 1:
        raise ValueError("n_groups must be >= 1")
    t = np.arange(n_groups)
    matrix = np.exp(-2j * np.pi * np.outer(t, t) / n_groups)
    return PilotBook(matrix)


def ul_pilot_observation(h: np.ndarray, assignment: np.ndarray, pilots: PilotBook,
                         q, sigma2: float, rng: np.random.Generator) -> np.ndarray:
    """Received M x tau_p pilot block: sum of sqrt(q)*h*psi^T over users plus AWGN.

    ``q`` may be a scalar or per-user vector of pilot powers (watts).
    """
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    h = np.asarray(h)
    n_users, m = h.shape
    q = np.broadcast_to(np.asarray(q, dtype=float), (n_users,))
    if np.any(q < 0):
        raise ValueError("pilot powers must be non-negative")
    seqs = pilots.matrix[:, np.asarray(assignment)]          # (tau_p, K)
    Y = (np.sqrt(q) * h.T) @ seqs.T                          # (M, tau_p)
    if sigma2 > 0:
        Y = Y + np.sqrt(sigma2 / 2) * (rng.standard_normal((m, pilots.tau_p))
                                       + 1j * rng.standard_normal((m, pilots.tau_p)))
    return Y


def despread(Y: np.ndarray, pilot: np.ndarray) -> np.ndarray:
    """Correlate the received block against one pilot: Y @ conj(pilot)."""
    return Y @ pilot.conj()


def composite_channel(h_group: np.ndarray, q_group, tau_p: int) -> np.ndarray:
    """Effective subgroup channel tau_p * sum_k sqrt(q_k) h_k."""
    h_group = np.asarray(h_group)
    q = np.broadcast_to(np.asarray(q_group, dtype=float), (h_group.shape[0],))
    return tau_p * (np.sqrt(q) @ h_group)


def _despread_gram(R_group, q_group, sigma2: float, tau_p: int):
    """Cholesky factor of tau_p * sum_k q_k R_k + sigma2 * I and the weighted sum itself."""
    R_group = [np.asarray(R) for R in R_group]
    m = R_group[0].shape[0]
    q = np.broadcast_to(np.asarray(q_group, dtype=float), (len(R_group),))
    weighted = np.zeros((m, m), dtype=complex)
    for qk, Rk in zip(q, R_group):
        weighted += qk * Rk
    A = tau_p * weighted + sigma2 * np.eye(m)
    try:
        factor = cho_factor(A)
    except Exception as exc:  # scipy raises its own LinAlgError subclass
        raise np.linalg.LinAlgError(str(exc)) from exc
    # LAPACK tolerates pivots at rounding-noise level; treat those as singular
    pivots = np.abs(np.diag(factor[0]))
    if pivots.min() <= 1e-6 * pivots.max():
        raise np.linalg.LinAlgError(
            "despread covariance is numerically singular; a positive sigma2 is required")
    return factor, weighted


def mmse_user_estimate(R_k: np.ndarray, q_k: float, R_group, q_group,
                       y_g: np.ndarray, sigma2: float, tau_p: int) -> np.ndarray:
    """MMSE estimate of one user's channel from the subgroup's despread observation.

    Computes sqrt(q_k) * R_k @ inv(tau_p * sum_k' q_k' R_k' + sigma2 I) @ y_g
    through a Hermitian solve; the inverse is never formed.
    """
    factor, _ = _despread_gram(R_group, q_group, sigma2, tau_p)
    return np.sqrt(q_k) * (np.asarray(R_k) @ cho_solve(factor, y_g))


def mmse_composite_estimate(R_group, q_group, y_g: np.ndarray,
                            sigma2: float, tau_p: int) -> np.ndarray:
    """MMSE estimate of the composite subgroup channel from the despread observation."""
    factor, weighted = _despread_gram(R_group, q_group, sigma2, tau_p)
    return tau_p * (weighted @ cho_solve(factor, y_g))


def composite_estimator_matrix(R_group, q_group, sigma2: float, tau_p: int) -> np.ndarray:
    """Linear map T with T @ y_g == mmse_composite_estimate(...); precompute it when
    the same statistics serve many coherence blocks."""
    factor, weighted = _despread_gram(R_group, q_group, sigma2, tau_p)
    # T = tau_p * weighted @ inv(A); both factors Hermitian, so solve then conjugate
    return tau_p * cho_solve(factor, weighted).conj().T


def estimate_block(h: np.ndarray, assignment: np.ndarray, R_all, pilots: PilotBook,
                   q, sigma2: float, rng: np.random.Generator) -> EstimateSet:
    """Run one pilot phase and return per-user and composite MMSE estimates.

    Args:
        h: (K, M) true channels for this coherence block.
        assignment: (K,) subgroup index per user.
        R_all: length-K list of per-user covariance matrices.
        pilots: pilot book with one column per subgroup.
        q: scalar or (K,) pilot powers.
        sigma2: noise power (watts).
        rng: randomness source for the additive noise.
    """
    h = np.asarray(h)
    assignment = np.asarray(assignment)
    n_users, m = h.shape
    q = np.broadcast_to(np.asarray(q, dtype=float), (n_users,)).copy()
    Y = ul_pilot_observation(h, assignment, pilots, q, sigma2, rng)
    h_hat_user = np.empty_like(h)
    h_hat_comp = np.empty((pilots.n_groups, m), dtype=complex)
    for g in range(pilots.n_groups):
        members = np.flatnonzero(assignment == g)
        y_g = despread(Y, pilots.matrix[:, g])
        R_group = [R_all[k] for k in members]
        q_group = q[members]
        factor, weighted = _despread_gram(R_group, q_group, sigma2, pilots.tau_p)
        solved = cho_solve(factor, y_g)
        for k in members:
            h_hat_user[k] = np.sqrt(q[k]) * (R_all[k] @ solved)
        h_hat_comp[g] = pilots.tau_p * (weighted @ solved)
    return EstimateSet(h_hat_user=h_hat_user, h_hat_composite=h_hat_comp, q=q, sigma2=sigma2)
