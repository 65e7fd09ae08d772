"""Scenario generation and the Monte Carlo experiment loop.

A scenario drops user clusters uniformly in a disc cell, builds per-user
covariances from geometry, and runs the grouping / estimation / precoding /
power-control / scheduling chain over many independent drops.  Drops are the
unit of parallelism; each owns a child RNG stream spawned from the experiment
seed, so results are bit-reproducible for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .channel import (
    ArrayGeometry,
    UserProfile,
    correlation_matrix,
    path_loss_db,
    sample_shadowing,
)
from .grouping import cluster_users, optimal_group_count, similarity_matrix
from .pipeline import PipelineParams
from .scheduling import evaluate_schedules

STRATEGIES = ("single", "clusters", "unicast", "optimal", "fixed")
SCHEDULES = ("one", "two", "best")


def noise_power(psd_dbm_hz: float, bandwidth_hz: float, nf_db: float) -> float:
    """Receiver noise power in watts from PSD (dBm/Hz), bandwidth and noise figure."""
    if bandwidth_hz <= 0:
        raise ValueError("bandwidth must be positive")
    return 10.0 ** ((psd_dbm_hz + 10.0 * math.log10(bandwidth_hz) + nf_db - 30.0) / 10.0)


@dataclass
class ScenarioConfig:
    """Everything a Monte Carlo experiment needs, with desk-scale defaults."""

    M: int = 64                      # BS antennas
    n_clusters: int = 2
    users_per_cluster: int = 10
    cell_radius_m: float = 200.0
    cluster_radius_m: float = 2.0
    min_bs_dist_m: float = 10.0
    asd_deg: float = 10.0
    f_ghz: float = 2.0
    bandwidth_hz: float = 2e7
    noise_psd_dbm_hz: float = -174.0
    noise_figure_db: float = 7.0
    p_dl_w: float = 2.0
    pilot_power_w: float = 1.0
    tau_c: int = 200
    shadowing_var_db: float = 10.0
    shadowing_intra_corr: float = 0.99
    delta: float = 0.5               # antenna spacing in wavelengths
    n_rays: int = 200
    n_drops: int = 10
    n_realizations: int = 10
    G_candidates: Optional[tuple] = None   # for the optimal strategy
    G: Optional[int] = None                # forced group count for the fixed strategy
    strategy: str = "clusters"
    schedule: str = "best"
    theta_policy: str = "grid"
    budget_mode: str = "full"
    eps: float = 1e-4
    seed: int = 0

    @property
    def K(self) -> int:
        return self.n_clusters * self.users_per_cluster

    @property
    def noise_power_w(self) -> float:
        return noise_power(self.noise_psd_dbm_hz, self.bandwidth_hz, self.noise_figure_db)

    def validate(self) -> "ScenarioConfig":
        """Raises ValueError naming the offending field; returns self when clean."""
        positive = ("M", "n_clusters", "users_per_cluster", "cell_radius_m",
                    "cluster_radius_m", "bandwidth_hz", "p_dl_w", "pilot_power_w",
                    "tau_c", "n_rays", "n_drops", "n_realizations", "delta")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        for name in ("min_bs_dist_m", "asd_deg", "shadowing_var_db", "eps"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)!r}")
        for name in ("M", "n_clusters", "users_per_cluster", "tau_c", "n_rays",
                     "n_drops", "n_realizations"):
            if int(getattr(self, name)) != getattr(self, name):
                raise ValueError(f"{name} must be an integer, got {getattr(self, name)!r}")
        if not 0 <= self.shadowing_intra_corr <= 1:
            raise ValueError("shadowing_intra_corr must lie in [0, 1]")
        if self.min_bs_dist_m >= self.cell_radius_m:
            raise ValueError("min_bs_dist_m must be below cell_radius_m")
        if self.tau_c < 2:
            raise ValueError("tau_c must leave room for at least one data symbol")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if self.theta_policy not in ("grid", "fixed"):
            raise ValueError(f"theta_policy must be grid or fixed, got {self.theta_policy!r}")
        if self.budget_mode not in ("full", "split"):
            raise ValueError(f"budget_mode must be full or split, got {self.budget_mode!r}")
        if self.strategy == "fixed":
            if self.G is None or not 1 <= self.G <= self.K:
                raise ValueError("fixed strategy needs G in [1, K]")
        if self.G_candidates is not None:
            cand = tuple(self.G_candidates)
            if not cand or any(int(g) != g or not 1 <= g <= self.K for g in cand):
                raise ValueError("G_candidates must be integers in [1, K]")
        return self

    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry(self.M, self.delta)

    def pipeline_params(self) -> PipelineParams:
        return PipelineParams(q=self.pilot_power_w, sigma2=self.noise_power_w,
                              p_total=self.p_dl_w, tau_c=self.tau_c,
                              n_realizations=self.n_realizations, eps=self.eps)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, tuple):
                val = list(val)
            out[f.name] = val
        return out


def generate_drop(config: ScenarioConfig, rng: np.random.Generator) -> list:
    """One random spatial placement: clustered users with gains and covariances."""
    geom = config.geometry()
    asd = math.radians(config.asd_deg)
    centers = np.empty((config.n_clusters, 2))
    for c in range(config.n_clusters):
        while True:
            r = config.cell_radius_m * math.sqrt(rng.uniform())
            if r >= config.min_bs_dist_m:
                break
        psi = rng.uniform(0.0, 2.0 * math.pi)
        centers[c] = r * math.cos(psi), r * math.sin(psi)

    cluster_ids = np.repeat(np.arange(config.n_clusters), config.users_per_cluster)
    offsets = np.empty((config.K, 2))
    for k in range(config.K):
        rr = config.cluster_radius_m * math.sqrt(rng.uniform())
        psi = rng.uniform(0.0, 2.0 * math.pi)
        offsets[k] = rr * math.cos(psi), rr * math.sin(psi)
    positions = centers[cluster_ids] + offsets

    shadow_db = sample_shadowing(cluster_ids, config.shadowing_var_db,
                                 config.shadowing_intra_corr, rng)
    profiles = []
    for k in range(config.K):
        x, y = positions[k]
        dist = math.hypot(x, y)
        angle = math.atan2(y, x)
        beta = 10.0 ** ((-path_loss_db(config.f_ghz, dist) + shadow_db[k]) / 10.0)
        R = correlation_matrix(angle, asd, beta, geom, config.n_rays)
        profiles.append(UserProfile(position=(x, y), nominal_angle=angle, asd=asd,
                                    shadowing_db=float(shadow_db[k]), beta=beta,
                                    R=R, cluster=int(cluster_ids[k])))
    return profiles


def _choose_grouping(config: ScenarioConfig, R_all, betas, params, rng) -> np.ndarray:
    k = len(R_all)
    if config.strategy == "single":
        return np.zeros(k, dtype=int)
    if config.strategy == "unicast":
        return np.arange(k)
    if config.strategy == "fixed":
        if config.G == 1:
            return np.zeros(k, dtype=int)
        if config.G == k:
            return np.arange(k)
        return cluster_users(similarity_matrix(R_all, betas), config.G, rng)
    if config.strategy == "clusters":
        return cluster_users(similarity_matrix(R_all, betas), config.n_clusters, rng)
    candidates = config.G_candidates or default_candidates(k, config.M, config.n_clusters)
    return optimal_group_count(R_all, params, candidates, rng, betas=betas).assignment


def default_candidates(k: int, m: int, n_clusters: int) -> tuple:
    """Powers of two up to min(K, M), plus the cluster count and the unicast limit."""
    cap = min(k, m)
    cand = {1, cap}
    g = 2
    while g < cap:
        cand.add(g)
        g *= 2
    if n_clusters <= cap:
        cand.add(n_clusters)
    return tuple(sorted(cand))


@dataclass
class DropRecord:
    """One drop's outcome, already reduced to the reported schedule policy."""

    drop: int
    n_groups: int
    theta: float
    chosen: str
    ase: float           # headline value under the configured schedule policy
    ase_one: float
    ase_two: float
    ase_best: float
    min_se: float
    min_se_one: float = 0.0
    min_se_two: float = 0.0
    sum_power_w: float = 0.0
    feasible: bool = False
    feasible_one: bool = False
    feasible_two: bool = False
    error: str = ""


@dataclass
class ExperimentResult:
    config: ScenarioConfig
    records: list

    def _vals(self, attr):
        return np.array([getattr(r, attr) for r in self.records], dtype=float)

    @property
    def mean_ase(self) -> float:
        return float(self._vals("ase").mean())

    @property
    def std_ase(self) -> float:
        return float(self._vals("ase").std())

    @property
    def mean_ase_one(self) -> float:
        return float(self._vals("ase_one").mean())

    @property
    def mean_ase_two(self) -> float:
        return float(self._vals("ase_two").mean())

    @property
    def mean_ase_best(self) -> float:
        return float(self._vals("ase_best").mean())

    @property
    def mean_min_se(self) -> float:
        return float(self._vals("min_se").mean())

    @property
    def infeasible_rate(self) -> float:
        return float(np.mean([not r.feasible for r in self.records]))

    @property
    def n_errors(self) -> int:
        return sum(1 for r in self.records if r.error)

    def summary(self) -> dict:
        return {
            "mean_ase": self.mean_ase,
            "std_ase": self.std_ase,
            "mean_ase_one": self.mean_ase_one,
            "mean_ase_two": self.mean_ase_two,
            "mean_ase_best": self.mean_ase_best,
            "mean_min_se": self.mean_min_se,
            "infeasible_rate": self.infeasible_rate,
            "n_drops": len(self.records),
            "n_errors": self.n_errors,
        }


def run_drop(config: ScenarioConfig, drop_index: int) -> DropRecord:
    """Evaluate one spatial drop end to end; failures are recorded, not raised."""
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(drop_index,)))
    try:
        profiles = generate_drop(config, rng)
        R_all = [p.R for p in profiles]
        betas = np.array([p.beta for p in profiles])
        params = config.pipeline_params()
        assignment = _choose_grouping(config, R_all, betas, params, rng)
        n_groups = int(assignment.max()) + 1
        group_betas = np.array([betas[assignment == g].min() for g in range(n_groups)])
        ev = evaluate_schedules(R_all, assignment, params, rng,
                                group_betas=group_betas if n_groups > 1 else None,
                                theta_policy=config.theta_policy,
                                budget_mode=config.budget_mode)
    except Exception as exc:
        return DropRecord(drop=drop_index, n_groups=0, theta=1.0, chosen="one",
                          ase=0.0, ase_one=0.0, ase_two=0.0, ase_best=0.0,
                          min_se=0.0, error=f"{type(exc).__name__}: {exc}")

    min_one, min_two = ev.min_effective_se("one"), ev.min_effective_se("two")
    if config.schedule == "one":
        headline, min_se, feasible, used = ev.ase_one, min_one, ev.feasible_one, "one"
    elif config.schedule == "two":
        headline, min_se, feasible, used = ev.ase_two, min_two, ev.feasible_two, "two"
    else:
        used = ev.chosen
        headline = ev.ase_best
        min_se = min_one if used == "one" else min_two
        feasible = ev.feasible_one if used == "one" else ev.feasible_two
    theta = ev.theta_used if used == "two" else 1.0
    sum_power = ev.sum_power_one if used == "one" else ev.sum_power_two
    return DropRecord(drop=drop_index, n_groups=n_groups, theta=float(theta),
                      chosen=used, ase=float(headline),
                      ase_one=float(ev.ase_one), ase_two=float(ev.ase_two),
                      ase_best=float(ev.ase_best), min_se=float(min_se),
                      min_se_one=float(min_one), min_se_two=float(min_two),
                      sum_power_w=float(sum_power), feasible=bool(feasible),
                      feasible_one=bool(ev.feasible_one), feasible_two=bool(ev.feasible_two))


def run_experiment(config: ScenarioConfig, workers: int = 1) -> ExperimentResult:
    """All drops of one scenario; drop order in the result is by index."""
    config.validate()
    indices = list(range(config.n_drops))
    if workers <= 1:
        records = [run_drop(config, d) for d in indices]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_drop, [config] * len(indices), indices))
    records.sort(key=lambda r: r.drop)
    return ExperimentResult(config=config, records=records)
