"""Closed-form regret bounds for the history/cluster-aware policies.

Logarithms are natural. The classical bounds count expected plays of
suboptimal arms and clusters; since rewards lie in (0, 1) these counts also
bound the regret.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np


def _tail_term(h: float) -> float:
    return math.pi ** 2 * (1 + 6 * h) / (6 * (2 * h + 1) ** 2)


def exploration_length(T: float, gap: float, h: float) -> float:
    """``max(0, 8 ln(T + h) / gap^2 - h)``."""
    return max(0.0, 8.0 * math.log(T + h) / gap ** 2 - h)


def hucb_plays_bound(T: float, gap: float, H_k: float = 0, H_kstar: float = 0) -> float:
    """Upper bound on the expected online plays of a suboptimal arm under HUCB.

    ``gap`` is the arm's shortfall against the best arm of its cluster, and
    ``H_k``, ``H_kstar`` the historical counts of the arm and of that best arm.
    """
    if not gap > 0:
        raise ValueError(f"gap must be positive, got {gap!r}")
    if T < 1:
        raise ValueError("T must be >= 1")
    if H_k < 0 or H_kstar < 0:
        raise ValueError("historical counts must be nonnegative")
    return 1.0 + exploration_length(T, gap, H_k) + _tail_term(H_k) + _tail_term(H_kstar)


def hucbc_tight_regret_bound(T: float, cluster_gaps: Sequence[float],
                             cluster_hist: Sequence[float], optimal_cluster_hist: float,
                             arm_gaps: Sequence[float] = (), arm_hist: Sequence[float] = (),
                             best_arm_hist: float = 0) -> float:
    """HUCBC regret bound when the clustering is tight.

    ``cluster_gaps[j]`` is the separation between suboptimal cluster ``j``'s
    reward interval and the optimal cluster's, with ``cluster_hist[j]`` its
    historical count; ``optimal_cluster_hist`` is the optimal cluster's.
    ``arm_gaps``/``arm_hist`` describe the suboptimal arms of the optimal
    cluster and ``best_arm_hist`` the history of the best arm.
    """
    if len(cluster_gaps) != len(cluster_hist):
        raise ValueError("cluster_gaps and cluster_hist differ in length")
    if len(arm_gaps) != len(arm_hist):
        raise ValueError("arm_gaps and arm_hist differ in length")
    total = 0.0
    for gap, h in zip(cluster_gaps, cluster_hist):
        total += hucb_plays_bound(T, gap, h, optimal_cluster_hist)
    for gap, h in zip(arm_gaps, arm_hist):
        total += hucb_plays_bound(T, gap, h, best_arm_hist)
    return total


def hucbc_prime_regret_bound(T: float, cluster_arm_gaps: Sequence[Sequence[float]],
                             r: float, s: float, arm_gaps: Sequence[float] = (),
                             arm_hist: Sequence[float] = (), best_arm_hist: float = 0) -> float:
    """HUCBC' regret bound for an arbitrary clustering.

    ``cluster_arm_gaps[j]`` lists the gaps of every arm in suboptimal cluster
    ``j`` (the largest per-cluster term is taken). ``r`` and ``s`` are the
    constants of the drifting-arm UCB analysis; they have no default.
    """
    if r is None or s is None:
        raise ValueError("the drifting-arm constants r and s must be supplied")
    if T <= 1:
        raise ValueError("T must be > 1")
    if len(arm_gaps) != len(arm_hist):
        raise ValueError("arm_gaps and arm_hist differ in length")
    total = 0.0
    for gaps in cluster_arm_gaps:
        g = np.asarray(gaps, dtype=float)
        if g.size == 0 or np.any(g <= 0):
            raise ValueError("every suboptimal-cluster arm needs a positive gap")
        total += float(np.max(16 * r * math.log(T) / (g / 2) ** 2 + 2 * s + math.pi / 3))
    for gap, h in zip(arm_gaps, arm_hist):
        total += hucb_plays_bound(T, gap, h, best_arm_hist)
    return total


def hlinucb_regret_bound(T: float, d: int, sigma: float, delta: float, phi: float,
                         theta_norm: float, logdet_A: float, logdet_H: float = 0.0) -> float:
    """High-probability HLINUCB regret bound.

    Takes log-determinants of the final design matrix and of the history
    matrix (see :func:`logdet`); ``logdet_H = 0`` gives the LINUCB shape.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not (sigma > 0 and phi > 0):
        raise ValueError("sigma and phi must be positive")
    if logdet_H < -1e-12:
        raise ValueError("det(H) must be >= 1")
    ratio = logdet_A - logdet_H
    if ratio < -1e-12:
        raise ValueError("det(A_T) must be >= det(H)")
    ratio = max(ratio, 0.0)
    conf = sigma * (math.sqrt(d * (0.5 * ratio - math.log(delta))) + theta_norm / math.sqrt(phi))
    return conf * math.sqrt(8.0 * T * ratio)


def logdet(M) -> float:
    """Log-determinant of a symmetric positive-definite matrix (Cholesky)."""
    L = np.linalg.cholesky(np.asarray(M, dtype=float))
    return 2.0 * float(np.log(np.diag(L)).sum())
