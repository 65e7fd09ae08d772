"""Max-min fairness power control across multicast subgroups.

The downlink SINR of user k in subgroup g is driven by hardening-style
coefficients estimated over fading realizations:

    a_k  = |mean(h_k^H w_g)|^2          useful-signal gain toward the user
    b_kj = mean(|h_k^H w_j|^2)          power received from subgroup j's beam
           (own subgroup: minus a_k, the non-hardened residual)

so sinr_k(p) = p_g a_k / (sum_j p_j b_kj + sigma2_k).  The max-min problem is
solved by bisection on the common target, each step a monotone fixed-point
feasibility check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_FP_MAX_ITER = 10_000
_FP_RTOL = 1e-10


@dataclass
class SinrCoefficients:
    """Hardening-bound SINR coefficients for one drop and one co-scheduled set."""

    a: np.ndarray          # (K,)
    b: np.ndarray          # (K, G)
    sigma2: float          # noise power, scalar or (K,)
    assignment: np.ndarray  # (K,) subgroup index per user
    n_samples: int

    @property
    def n_groups(self) -> int:
        return self.b.shape[1]

    def sigma2_vector(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.sigma2, dtype=float), self.a.shape)


@dataclass
class PowerAllocation:
    """Result of the max-min solve."""

    p: np.ndarray          # (G,) watts
    gamma_star: float      # achieved worst-user SINR, linear
    converged: bool
    iterations: int        # bisection steps taken


def estimate_coefficients(h: np.ndarray, W: np.ndarray, assignment: np.ndarray,
                          sigma2) -> SinrCoefficients:
    """Sample-mean SINR coefficients from stacked realizations.

    Args:
        h: (T, K, M) true channels per realization.
        W: (T, M, G) unit-norm precoders per realization.
        assignment: (K,) subgroup index per user.
        sigma2: noise power, scalar or per user.
    """
    h = np.asarray(h)
    W = np.asarray(W)
    assignment = np.asarray(assignment)
    if h.ndim != 3 or W.ndim != 3 or h.shape[0] != W.shape[0]:
        raise ValueError("h must be (T, K, M) and W must be (T, M, G)")
    inner = np.einsum("tkm,tmg->tkg", h.conj(), W)
    mean = inner.mean(axis=0)
    msq = np.square(np.abs(inner)).mean(axis=0)
    k = h.shape[1]
    own = np.abs(mean[np.arange(k), assignment]) ** 2
    b = msq.copy()
    b[np.arange(k), assignment] -= own
    np.clip(b, 0.0, None, out=b)  # variance of the own beam cannot be negative
    return SinrCoefficients(a=own, b=b, sigma2=sigma2, assignment=assignment,
                            n_samples=h.shape[0])


def sinr_from_powers(coeffs: SinrCoefficients, p: np.ndarray, active=None) -> np.ndarray:
    """Per-user SINR at group powers ``p``; ``active`` restricts the transmitting
    subgroups (users of silent subgroups get SINR 0)."""
    p = np.asarray(p, dtype=float)
    if active is not None:
        mask = np.zeros(coeffs.n_groups, dtype=bool)
        mask[np.asarray(active)] = True
        p = np.where(mask, p, 0.0)
    den = coeffs.b @ p + coeffs.sigma2_vector()
    return p[coeffs.assignment] * coeffs.a / den


def feasibility_check(gamma: float, coeffs: SinrCoefficients, p_total: float):
    """Minimal powers meeting SINR target ``gamma``, or a certificate of infeasibility.

    Iterates the monotone map p_g <- gamma * max_{k in g} (b_k . p + sigma2_k)/a_k
    from p = 0.  The iterates increase toward the minimal fixed point, so the
    target is feasible within the budget iff the iteration converges with
    sum(p) <= p_total; once the running sum exceeds the budget it can never
    return, which gives an early exit.

    Returns:
        (True, p) with p the minimal feasible powers, or (False, None).
    """
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    n_groups = coeffs.n_groups
    if gamma == 0.0:
        return True, np.zeros(n_groups)
    a = coeffs.a
    if np.any(a <= 0.0):
        return False, None  # a zero-gain user can never reach a positive target
    sigma2 = coeffs.sigma2_vector()
    assignment = coeffs.assignment
    p = np.zeros(n_groups)
    for _ in range(_FP_MAX_ITER):
        need = gamma * (coeffs.b @ p + sigma2) / a
        p_new = np.zeros(n_groups)
        np.maximum.at(p_new, assignment, need)
        if p_new.sum() > p_total * (1.0 + 1e-9):
            return False, None
        if np.all(np.abs(p_new - p) <= _FP_RTOL * np.maximum(p_new, 1e-300)):
            return True, p_new
        p = p_new
    return False, None  # no convergence within the iteration cap


def max_min_power(coeffs: SinrCoefficients, p_total: float, eps: float = 1e-4) -> PowerAllocation:
    """Bisection on the common SINR target over [0, min_k p_total*a_k/sigma2_k].

    Each midpoint runs the fixed-point feasibility check; the last feasible
    power vector is kept and finally scaled onto the full budget (scaling up
    only ever raises SINRs, and at the optimum the budget binds).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if p_total <= 0:
        raise ValueError("p_total must be positive")
    n_groups = coeffs.n_groups
    sigma2 = coeffs.sigma2_vector()
    gamma_hi = float(np.min(p_total * coeffs.a / sigma2))
    if gamma_hi <= 0.0:
        return PowerAllocation(p=np.zeros(n_groups), gamma_star=0.0,
                               converged=False, iterations=0)
    gamma_lo = 0.0
    p_best = None
    iterations = 0
    while gamma_hi - gamma_lo > eps and iterations < 10_000:
        mid = 0.5 * (gamma_lo + gamma_hi)
        ok, p = feasibility_check(mid, coeffs, p_total)
        if ok:
            gamma_lo, p_best = mid, p
        else:
            gamma_hi = mid
        iterations += 1
    if p_best is None or p_best.sum() <= 0.0:
        return PowerAllocation(p=np.zeros(n_groups), gamma_star=0.0,
                               converged=False, iterations=iterations)
    p_star = p_best * (p_total / p_best.sum())
    gamma_star = float(sinr_from_powers(coeffs, p_star).min())
    return PowerAllocation(p=p_star, gamma_star=gamma_star,
                           converged=True, iterations=iterations)


def se_from_sinr(gamma: float, tau_p: int, tau_c: int) -> float:
    """Spectral efficiency (1 - tau_p/tau_c) * log2(1 + gamma) in bit/s/Hz."""
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    if not 0 < tau_p < tau_c:
        raise ValueError("need 0 < tau_p < tau_c")
    return (1.0 - tau_p / tau_c) * float(np.log2(1.0 + gamma))


def group_se(se: np.ndarray, assignment: np.ndarray) -> np.ndarray:
    """Multicast rate of each subgroup: the worst member's spectral efficiency."""
    se = np.asarray(se, dtype=float)
    assignment = np.asarray(assignment)
    n_groups = int(assignment.max()) + 1
    return np.array([se[assignment == g].min() for g in range(n_groups)])
