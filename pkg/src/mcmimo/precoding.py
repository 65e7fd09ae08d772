"""Zero-forcing precoding across multicast subgroups."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

# singular-value spread beyond which the composite channels are treated as dependent
_COND_LIMIT = 1e12


class RankDeficientError(np.linalg.LinAlgError):
    """Composite channel matrix cannot be zero-forced; reduce the number of
    co-scheduled subgroups or change the schedule."""


@dataclass
class PrecoderSet:
    """Unit-norm precoding vectors, one column per co-scheduled subgroup."""

    W: np.ndarray  # (M, G)


def zf_precoders(c_hat: np.ndarray) -> PrecoderSet:
    """Zero-forcing directions from stacked composite channel estimates.

    Columns of the pseudo-inverse direction matrix C (C^H C)^-1 are normalized
    to unit power, so w_g points where every other subgroup's estimate is
    nulled.  Computed from a QR factorization; the gram matrix is never formed.

    Raises:
        RankDeficientError: more columns than antennas, or the ratio of extreme
            singular values exceeds 1e12.
    """
    c_hat = np.asarray(c_hat)
    if c_hat.ndim != 2:
        raise ValueError("c_hat must be an (antennas, groups) matrix")
    m, g = c_hat.shape
    if g > m:
        raise RankDeficientError(f"{g} subgroups cannot be zero-forced with {m} antennas")
    svals = np.linalg.svd(c_hat, compute_uv=False)
    if svals[-1] <= 0 or svals[0] / svals[-1] > _COND_LIMIT:
        raise RankDeficientError("composite channel estimates are numerically dependent")
    q, r = np.linalg.qr(c_hat)
    # C = Q R gives C (C^H C)^-1 = Q R^{-H}
    r_inv_h = solve_triangular(r, np.eye(g, dtype=c_hat.dtype), lower=False).conj().T
    v = q @ r_inv_h
    return PrecoderSet(W=v / np.linalg.norm(v, axis=0))
