"""Per-drop evaluation chain: pilot training, ZF precoding, SINR coefficients, power control.

One co-scheduled set of subgroups at a time: every subgroup in the set trains
in the same pilot block (pilot length = number of subgroups) and receives a
zero-forcing beam, so the set is also the interference environment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import channel_factor
from .pilots import (
    composite_estimator_matrix,
    despread,
    make_pilots,
    mmse_user_estimate,
    ul_pilot_observation,
)
from .power import (
    PowerAllocation,
    SinrCoefficients,
    estimate_coefficients,
    group_se,
    max_min_power,
    sinr_from_powers,
)
from .precoding import RankDeficientError, zf_precoders


@dataclass
class PipelineParams:
    """Knobs shared by every evaluation within a drop."""

    q: float               # per-user pilot power, watts
    sigma2: float          # noise power, watts
    p_total: float         # downlink budget per scheduling interval, watts
    tau_c: int             # coherence block length, symbols
    n_realizations: int = 10
    eps: float = 1e-4      # bisection tolerance of the power control


@dataclass
class ChannelBatch:
    """Stacked per-realization quantities for one co-scheduled set."""

    h: np.ndarray                   # (T, K, M) true channels
    W: np.ndarray                   # (T, M, G) unit-norm precoders
    h_hat_composite: np.ndarray     # (T, G, M) composite MMSE estimates
    h_hat_user: np.ndarray | None = None  # (T, K, M), only on request


@dataclass
class CochannelResult:
    """Outcome of evaluating one co-scheduled set of subgroups."""

    feasible: bool
    tau_p: int
    assignment: np.ndarray
    sizes: np.ndarray            # (G,) users per subgroup
    group_min_sinr: np.ndarray   # (G,)
    group_se: np.ndarray         # (G,) worst-user spectral efficiency
    sinr_user: np.ndarray        # (K,)
    se_user: np.ndarray          # (K,)
    sum_power: float
    coeffs: SinrCoefficients | None = None
    alloc: PowerAllocation | None = None

    def sum_rate(self) -> float:
        """Users-weighted multicast sum spectral efficiency of this set."""
        return float(self.sizes @ self.group_se)


def _group_members(assignment: np.ndarray, n_groups: int):
    return [np.flatnonzero(assignment == g) for g in range(n_groups)]


def simulate_batch(R_all, assignment, params: PipelineParams, rng: np.random.Generator,
                   include_user_estimates: bool = False) -> ChannelBatch:
    """Draw fading, run the pilot phase and build ZF precoders for every realization.

    Raises RankDeficientError when the composite estimates cannot be zero-forced
    (more subgroups than antennas, or numerically dependent estimates).
    """
    assignment = np.asarray(assignment)
    n_users = len(R_all)
    m = np.asarray(R_all[0]).shape[0]
    n_groups = int(assignment.max()) + 1
    if n_groups > m:
        raise RankDeficientError(f"{n_groups} subgroups cannot be zero-forced with {m} antennas")
    tau_p = n_groups
    pilots = make_pilots(n_groups)
    members = _group_members(assignment, n_groups)
    if any(len(idx) == 0 for idx in members):
        raise ValueError("every subgroup must contain at least one user")

    factors = np.stack([channel_factor(np.asarray(R)) for R in R_all])  # (K, M, M)
    estimators = [
        composite_estimator_matrix([R_all[k] for k in idx],
                                   np.full(len(idx), params.q), params.sigma2, tau_p)
        for idx in members
    ]

    t_real = params.n_realizations
    z = (rng.standard_normal((t_real, n_users, m))
         + 1j * rng.standard_normal((t_real, n_users, m))) / np.sqrt(2.0)
    h = np.einsum("kmn,tkn->tkm", factors, z)

    W = np.empty((t_real, m, n_groups), dtype=complex)
    h_hat_comp = np.empty((t_real, n_groups, m), dtype=complex)
    h_hat_user = np.empty((t_real, n_users, m), dtype=complex) if include_user_estimates else None
    for t in range(t_real):
        Y = ul_pilot_observation(h[t], assignment, pilots, params.q, params.sigma2, rng)
        c_hat = np.empty((m, n_groups), dtype=complex)
        for g in range(n_groups):
            y_g = despread(Y, pilots.matrix[:, g])
            c_hat[:, g] = estimators[g] @ y_g
            if include_user_estimates:
                group_rs = [R_all[k] for k in members[g]]
                group_q = np.full(len(members[g]), params.q)
                for k in members[g]:
                    h_hat_user[t, k] = mmse_user_estimate(
                        R_all[k], params.q, group_rs, group_q, y_g, params.sigma2, tau_p)
        h_hat_comp[t] = c_hat.T
        W[t] = zf_precoders(c_hat).W
    return ChannelBatch(h=h, W=W, h_hat_composite=h_hat_comp, h_hat_user=h_hat_user)


def _infeasible_result(assignment: np.ndarray, tau_p: int) -> CochannelResult:
    assignment = np.asarray(assignment)
    n_groups = int(assignment.max()) + 1
    k = assignment.size
    return CochannelResult(
        feasible=False, tau_p=tau_p, assignment=assignment,
        sizes=np.bincount(assignment, minlength=n_groups),
        group_min_sinr=np.zeros(n_groups), group_se=np.zeros(n_groups),
        sinr_user=np.zeros(k), se_user=np.zeros(k), sum_power=0.0)


def evaluate_cochannel(R_all, assignment, params: PipelineParams,
                       rng: np.random.Generator) -> CochannelResult:
    """Full chain for one co-scheduled set; infeasible sets come back with zero rates
    instead of raising, so callers can keep scanning configurations."""
    assignment = np.asarray(assignment)
    n_groups = int(assignment.max()) + 1
    if n_groups >= params.tau_c:
        return _infeasible_result(assignment, n_groups)  # pilots would fill the block
    try:
        batch = simulate_batch(R_all, assignment, params, rng)
    except RankDeficientError:
        return _infeasible_result(assignment, n_groups)
    coeffs = estimate_coefficients(batch.h, batch.W, assignment, params.sigma2)
    alloc = max_min_power(coeffs, params.p_total, params.eps)
    sinr_user = sinr_from_powers(coeffs, alloc.p)
    prelog = 1.0 - n_groups / params.tau_c
    se_user = prelog * np.log2(1.0 + sinr_user)
    se_groups = group_se(se_user, assignment)
    min_sinr = np.array([sinr_user[assignment == g].min() for g in range(n_groups)])
    return CochannelResult(
        feasible=bool(alloc.converged), tau_p=n_groups, assignment=assignment,
        sizes=np.bincount(assignment, minlength=n_groups),
        group_min_sinr=min_sinr, group_se=se_groups,
        sinr_user=sinr_user, se_user=se_user,
        sum_power=float(alloc.p.sum()), coeffs=coeffs, alloc=alloc)
