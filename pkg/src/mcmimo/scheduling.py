"""One-interval vs two-interval schedule comparison and aggregate spectral efficiency.

Serving all subgroups at once spends one pilot block and splits the power
budget across every beam; serving strong and weak subgroups in separate
intervals halves the interference each side sees at the cost of a resource
fraction theta.  This module evaluates both and reports the better one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import large_scale_coefficient
from .grouping import GroupingPlan, schedule_split
from .pipeline import PipelineParams, evaluate_cochannel
from .power import max_min_power, sinr_from_powers

THETA_GRID = tuple(np.round(np.arange(1, 10) * 0.1, 1))


def ase(plan: GroupingPlan, min_sinr_per_group, tau_p: int, tau_c: int) -> float:
    """Aggregate downlink spectral efficiency of a multicast schedule, bits/s/Hz.

    Weighted sum over subgroups of resource share x size x worst-user rate,
    scaled by the pilot overhead prelog.
    """
    gamma = np.asarray(min_sinr_per_group, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("SINRs must be nonnegative")
    if not 0 < tau_p < tau_c:
        raise ValueError("pilot length must be positive and below the block length")
    sizes = np.bincount(plan.assignment, minlength=plan.n_groups)
    if gamma.size != plan.n_groups:
        raise ValueError("one SINR per subgroup expected")
    prelog = 1.0 - tau_p / tau_c
    return float(prelog * np.sum(plan.theta_hat() * sizes * np.log2(1.0 + gamma)))


@dataclass
class ScheduleEvaluation:
    """Side-by-side outcome of the one-interval and two-interval configurations."""

    ase_one: float
    ase_two: float
    theta_used: float
    chosen: str                 # "one" or "two"
    schedule: np.ndarray        # (G,) interval per subgroup under the split
    per_group_se: list          # rows (config, group, interval, theta_hat, size, min_sinr, se)
    feasible_one: bool
    feasible_two: bool
    sum_power_one: float = 0.0  # downlink power spent when co-scheduled
    sum_power_two: float = 0.0  # largest per-interval power spent under the split

    @property
    def ase_best(self) -> float:
        return max(self.ase_one, self.ase_two)

    def min_effective_se(self, config: str | None = None) -> float:
        """Worst per-group spectral efficiency (resource share applied) of a config."""
        config = config or self.chosen
        vals = [theta * se for cfg, _, _, theta, _, _, se in self.per_group_se if cfg == config]
        return min(vals) if vals else 0.0


def _interval_subproblem(R_all, assignment, schedule, interval):
    groups = np.flatnonzero(schedule == interval)
    local = {g: i for i, g in enumerate(groups)}
    users = np.flatnonzero(np.isin(assignment, groups))
    sub_R = [R_all[k] for k in users]
    sub_assign = np.array([local[assignment[k]] for k in users])
    return groups, sub_R, sub_assign


def evaluate_schedules(R_all, assignment, params: PipelineParams,
                       rng: np.random.Generator, group_betas=None,
                       theta_policy: str = "grid",
                       budget_mode: str = "full") -> ScheduleEvaluation:
    """Run the full chain once co-scheduled and once split into two intervals.

    The split places each subgroup by its worst-user channel gain; every
    interval trains with its own pilot block and, under budget_mode "full",
    spends the whole downlink budget ("split" divides it theta : 1 - theta).
    theta comes from a grid search unless theta_policy is "fixed" (0.5).
    """
    if theta_policy not in ("grid", "fixed"):
        raise ValueError(f"unknown theta policy {theta_policy!r}")
    if budget_mode not in ("full", "split"):
        raise ValueError(f"unknown budget mode {budget_mode!r}")
    assignment = np.asarray(assignment)
    n_groups = int(assignment.max()) + 1
    sizes = np.bincount(assignment, minlength=n_groups)

    res_one = evaluate_cochannel(R_all, assignment, params, rng)
    ase_one = res_one.sum_rate()
    rows = [("one", g, 0, 1.0, int(sizes[g]),
             float(res_one.group_min_sinr[g]), float(res_one.group_se[g]))
            for g in range(n_groups)]

    if n_groups == 1:
        return ScheduleEvaluation(
            ase_one=ase_one, ase_two=0.0, theta_used=1.0, chosen="one",
            schedule=np.zeros(1, dtype=int), per_group_se=rows,
            feasible_one=res_one.feasible, feasible_two=False,
            sum_power_one=res_one.sum_power)

    if group_betas is None:
        betas = np.array([large_scale_coefficient(R) for R in R_all])
        group_betas = np.array([betas[assignment == g].min() for g in range(n_groups)])
    schedule = schedule_split(group_betas)

    interval_results = []
    interval_groups = []
    for interval in (0, 1):
        groups, sub_R, sub_assign = _interval_subproblem(R_all, assignment, schedule, interval)
        interval_groups.append(groups)
        interval_results.append(evaluate_cochannel(sub_R, sub_assign, params, rng))

    thetas = THETA_GRID if theta_policy == "grid" else (0.5,)
    best_theta = None
    best_ase = -1.0
    best_terms = None
    best_power = 0.0
    for theta in thetas:
        shares = (theta, 1.0 - theta)
        total = 0.0
        terms = []  # (global group, interval, theta_hat, min_sinr, se)
        spent = 0.0
        for interval, res in enumerate(interval_results):
            tau_p = len(interval_groups[interval])
            prelog = 1.0 - tau_p / params.tau_c
            if budget_mode == "split":
                budget = shares[interval] * params.p_total
                min_sinr = _reallocated_min_sinr(res, budget, params.eps)
            else:
                budget = params.p_total
                min_sinr = res.group_min_sinr if res.feasible else np.zeros(res.sizes.size)
            if res.feasible:
                spent = max(spent, budget)
            se = prelog * np.log2(1.0 + min_sinr)
            for i, g in enumerate(interval_groups[interval]):
                terms.append((int(g), interval, shares[interval],
                              float(min_sinr[i]), float(se[i])))
                total += shares[interval] * sizes[g] * se[i]
        if total > best_ase:
            best_ase = total
            best_theta = theta
            best_terms = terms
            best_power = spent
    ase_two = max(best_ase, 0.0)

    for g, interval, theta_hat, min_sinr, se in sorted(best_terms):
        rows.append(("two", g, interval, theta_hat, int(sizes[g]), min_sinr, se))
    chosen = "one" if ase_one >= ase_two else "two"
    return ScheduleEvaluation(
        ase_one=ase_one, ase_two=ase_two, theta_used=float(best_theta), chosen=chosen,
        schedule=schedule, per_group_se=rows,
        feasible_one=res_one.feasible,
        feasible_two=all(r.feasible for r in interval_results),
        sum_power_one=res_one.sum_power, sum_power_two=best_power)


def _reallocated_min_sinr(res, budget: float, eps: float) -> np.ndarray:
    """Per-group worst SINR after re-solving power control at a different budget."""
    n = res.sizes.size
    if not res.feasible or res.coeffs is None or budget <= 0:
        return np.zeros(n)
    alloc = max_min_power(res.coeffs, budget, eps)
    if not alloc.converged:
        return np.zeros(n)
    sinr = sinr_from_powers(res.coeffs, alloc.p)
    return np.array([sinr[res.assignment == g].min() for g in range(n)])
