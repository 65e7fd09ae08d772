"""Spatial subgrouping of multicast users and the one-vs-two interval split.

Users whose covariances point the array the same way belong together: the
similarity metric trace(R_a R_b) / (M^2 beta_a beta_b) is 1 for identical
rank-one covariances and falls toward 1/M as the subspaces decouple.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pipeline import PipelineParams, evaluate_cochannel
from .power import se_from_sinr

_KMEDOIDS_RESTARTS = 10
_KMEDOIDS_MAX_SWEEPS = 100


@dataclass
class GroupingPlan:
    """A partition of users into subgroups plus its time-interval schedule."""

    assignment: np.ndarray   # (K,) subgroup index per user
    schedule: np.ndarray     # (G,) interval index in {0, 1} per subgroup
    theta: float = 1.0       # fraction of resources given to interval 0

    @property
    def n_groups(self) -> int:
        return int(self.assignment.max()) + 1

    def theta_hat(self) -> np.ndarray:
        """Resource fraction per subgroup: 1 on a single interval, else theta / 1 - theta."""
        if np.all(self.schedule == 0):
            return np.ones(self.n_groups)
        return np.where(self.schedule == 0, self.theta, 1.0 - self.theta)


@dataclass
class GroupSearchResult:
    g_star: int
    assignment: np.ndarray
    table: list  # (candidate G, one-interval sum SE, feasible) rows


def orthogonality_metric(R_a: np.ndarray, R_b: np.ndarray,
                         beta_a: float | None = None, beta_b: float | None = None) -> float:
    """Normalized covariance alignment trace(R_a R_b) / (M^2 beta_a beta_b) in (0, 1]."""
    R_a = np.asarray(R_a)
    R_b = np.asarray(R_b)
    m = R_a.shape[0]
    if beta_a is None:
        beta_a = np.trace(R_a).real / m
    if beta_b is None:
        beta_b = np.trace(R_b).real / m
    if beta_a <= 0 or beta_b <= 0:
        raise ValueError("average channel gains must be positive")
    # both matrices Hermitian: trace(R_a R_b) = <vec R_a, vec R_b>
    val = float(np.vdot(R_b, R_a).real)
    return val / (m * m * beta_a * beta_b)


def similarity_matrix(R_all, betas=None) -> np.ndarray:
    """Pairwise alignment metric for all users; one BLAS product on vectorized covariances."""
    R_stack = np.asarray(R_all)
    k, m, _ = R_stack.shape
    if betas is None:
        betas = np.einsum("kii->k", R_stack).real / m
    betas = np.asarray(betas, dtype=float)
    if np.any(betas <= 0):
        raise ValueError("average channel gains must be positive")
    vecs = R_stack.reshape(k, m * m)
    S = (vecs @ vecs.conj().T).real / (m * m * np.outer(betas, betas))
    return 0.5 * (S + S.T)


def _relabel_by_first_occurrence(labels: np.ndarray) -> np.ndarray:
    mapping = {}
    out = np.empty_like(labels)
    for i, lab in enumerate(labels):
        if lab not in mapping:
            mapping[lab] = len(mapping)
        out[i] = mapping[lab]
    return out


def _fill_empty_clusters(labels: np.ndarray, medoids: np.ndarray, d: np.ndarray,
                         n_groups: int) -> None:
    """Re-seed empty clusters in place with the worst-assigned movable point.

    Only points whose current cluster has at least two members are movable, so
    filling one empty cluster can never empty another.  With n_groups <= K a
    movable point always exists while any cluster is empty.
    """
    n_users = labels.shape[0]
    idx = np.arange(n_users)
    for g in range(n_groups):
        if np.any(labels == g):
            continue
        counts = np.bincount(labels, minlength=n_groups)
        residual = np.where(counts[labels] > 1, d[idx, medoids[labels]], -np.inf)
        worst = int(np.argmax(residual))
        labels[worst] = g
        medoids[g] = worst


def cluster_users(S: np.ndarray, n_groups: int, rng: np.random.Generator) -> np.ndarray:
    """K-medoids partition on distance 1 - S with best-of-10 random restarts.

    Returns a (K,) label array with groups numbered by first occurrence, so a
    given similarity matrix and seed always produce the same labelling.
    """
    S = np.asarray(S)
    n_users = S.shape[0]
    if not 1 <= n_groups <= n_users:
        raise ValueError("n_groups must lie in [1, number of users]")
    if n_groups == 1:
        return np.zeros(n_users, dtype=int)
    if n_groups == n_users:
        return np.arange(n_users)
    d = 1.0 - S
    best_cost, best_labels = np.inf, None
    for _ in range(_KMEDOIDS_RESTARTS):
        medoids = rng.choice(n_users, size=n_groups, replace=False)
        for _ in range(_KMEDOIDS_MAX_SWEEPS):
            labels = np.argmin(d[:, medoids], axis=1)
            _fill_empty_clusters(labels, medoids, d, n_groups)
            new_medoids = medoids.copy()
            for g in range(n_groups):
                members = np.flatnonzero(labels == g)
                within = d[np.ix_(members, members)].sum(axis=1)
                new_medoids[g] = members[int(np.argmin(within))]
            if np.array_equal(np.sort(new_medoids), np.sort(medoids)):
                break
            medoids = new_medoids
        labels = np.argmin(d[:, medoids], axis=1)
        _fill_empty_clusters(labels, medoids, d, n_groups)
        cost = d[np.arange(n_users), medoids[labels]].sum()
        if cost < best_cost:
            best_cost, best_labels = cost, labels
    return _relabel_by_first_occurrence(best_labels)


def schedule_split(group_betas: np.ndarray) -> np.ndarray:
    """Exact two-means split of subgroups by log-domain channel gain.

    Scans every threshold in sorted order (the optimal one-dimensional two-way
    partition is always contiguous) and returns interval indices per subgroup:
    0 for the stronger side, 1 for the weaker.  Ties prefer the most balanced
    split, which puts the threshold at the median when all gains are equal.
    """
    group_betas = np.asarray(group_betas, dtype=float)
    n = group_betas.size
    if n < 2:
        raise ValueError("need at least two subgroups to split")
    if np.any(group_betas <= 0):
        raise ValueError("channel gains must be positive")
    x = np.sort(np.log10(group_betas))
    order = np.argsort(np.log10(group_betas), kind="stable")
    prefix = np.concatenate([[0.0], np.cumsum(x)])
    prefix2 = np.concatenate([[0.0], np.cumsum(x * x)])

    def within_ss(lo, hi):  # half-open [lo, hi)
        cnt = hi - lo
        s = prefix[hi] - prefix[lo]
        s2 = prefix2[hi] - prefix2[lo]
        return s2 - s * s / cnt

    best = None
    for i in range(1, n):
        cost = within_ss(0, i) + within_ss(i, n)
        imbalance = abs(2 * i - n)
        key = (cost, imbalance, i)
        if best is None or key < best[0]:
            best = (key, i)
    split_at = best[1]
    intervals = np.empty(n, dtype=int)
    intervals[order[:split_at]] = 1   # weaker groups wait for interval 1
    intervals[order[split_at:]] = 0
    return intervals


def optimal_group_count(R_all, params: PipelineParams, candidates,
                        rng: np.random.Generator, betas=None) -> GroupSearchResult:
    """Scan candidate subgroup counts with the full chain and keep the best.

    Each candidate G is clustered on the similarity matrix, evaluated as a
    single co-scheduled interval, and scored by the users-weighted sum of
    worst-member spectral efficiencies.  Candidates that cannot be zero-forced
    score zero.  Ties go to the smaller G (candidates are scanned ascending).
    """
    n_users = len(R_all)
    candidates = sorted(set(int(g) for g in candidates))
    if not candidates:
        raise ValueError("no candidate group counts supplied")
    if candidates[0] < 1 or candidates[-1] > n_users:
        raise ValueError("candidate group counts must lie in [1, number of users]")
    S = similarity_matrix(R_all, betas)
    table = []
    best = None
    for g in candidates:
        labels = cluster_users(S, g, rng)
        result = evaluate_cochannel(R_all, labels, params, rng)
        score = result.sum_rate() if result.feasible else 0.0
        table.append((g, score, result.feasible))
        if best is None or score > best[0]:
            best = (score, g, labels)
    return GroupSearchResult(g_star=best[1], assignment=best[2], table=table)
