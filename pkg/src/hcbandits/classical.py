"""Index policies for the classical (context-free) bandit with history and
pre-clustered arms: UCB, HUCB, UCBC, HUCBC and HUCBC'.

All indices share one formula, the pooled mean plus
``sqrt(2 ln(t + H) / (n + H))``, where ``H`` is the number of historical
observations and ``n`` the number of online plays. Entries that were never
observed get ``+inf`` so that they are played first.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .core import ArmStats, ClusterMap

UCB = "ucb"
HUCB = "hucb"
UCBC = "ucbc"
HUCBC = "hucbc"
HUCBC_PRIME = "hucbc_prime"
KINDS = (UCB, HUCB, UCBC, HUCBC, HUCBC_PRIME)

# kind -> (two-level, history at cluster level, history at arm level)
_LAYOUT = {
    UCB: (False, False, False),
    HUCB: (False, False, True),
    UCBC: (True, False, False),
    HUCBC: (True, True, True),
    HUCBC_PRIME: (True, False, True),
}


def hucb_index(stats: ArmStats, t: int) -> float:
    """Optimistic reward estimate of one arm at online round ``t``."""
    if t < 1:
        raise ValueError("t must be >= 1")
    n = stats.total_count
    if n == 0:
        return math.inf
    return stats.total_sum / n + math.sqrt(2.0 * math.log(t + stats.hist_count) / n)


def hucbc_cluster_index(cstats: ArmStats, t: int) -> float:
    """Cluster-level index; the arm formula applied to cluster aggregates."""
    return hucb_index(cstats, t)


def ucb_index(stats: ArmStats, t: int) -> float:
    """Plain UCB1 index: history is ignored."""
    return hucb_index(ArmStats(0, 0.0, stats.online_count, stats.online_sum), t)


def _indices(sums, counts, hist, t):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = sums / counts + np.sqrt(2.0 * np.log(t + hist) / counts)
    out[counts == 0] = np.inf
    return out


class ClassicalPolicy:
    """One of the five classical index policies.

    ``history`` is an optional per-arm sequence of historical rewards. Kinds
    that do not use history at some level still keep the tallies so the
    state can be inspected uniformly.

    Arms and clusters are 0-based; ties go to the lowest id.
    """

    contextual = False

    def __init__(self, kind: str, cmap: ClusterMap,
                 history: Sequence[Sequence[float]] | None = None):
        if kind not in _LAYOUT:
            raise ValueError(f"unknown classical policy kind {kind!r}")
        self.kind = kind
        self.map = cmap
        k = cmap.num_arms
        self._assign = cmap.as_array()
        self._members = [np.asarray(cmap.members(i), dtype=np.intp)
                         for i in range(cmap.num_clusters)]
        self._two_level, self._cluster_hist, self._arm_hist = _LAYOUT[kind]

        self.hist_n = np.zeros(k)
        self.hist_s = np.zeros(k)
        if history is not None:
            if len(history) != k:
                raise ValueError(f"history has {len(history)} entries for {k} arms")
            for a, rewards in enumerate(history):
                r = np.asarray(rewards, dtype=float)
                if not np.all(np.isfinite(r)):
                    raise ValueError(f"non-finite historical reward for arm {a}")
                self.hist_n[a] = r.size
                self.hist_s[a] = r.sum()
        self.on_n = np.zeros(k)
        self.on_s = np.zeros(k)

        c = cmap.num_clusters
        self.c_hist_n = np.bincount(self._assign, self.hist_n, minlength=c)
        self.c_hist_s = np.bincount(self._assign, self.hist_s, minlength=c)
        self.c_on_n = np.zeros(c)
        self.c_on_s = np.zeros(c)
        self.t = 0

    # ---- inspection -------------------------------------------------------

    def arm_stats(self, arm: int) -> ArmStats:
        return ArmStats(int(self.hist_n[arm]), float(self.hist_s[arm]),
                        int(self.on_n[arm]), float(self.on_s[arm]))

    def cluster_stats(self, cluster: int) -> ArmStats:
        return ArmStats(int(self.c_hist_n[cluster]), float(self.c_hist_s[cluster]),
                        int(self.c_on_n[cluster]), float(self.c_on_s[cluster]))

    @property
    def per_arm(self) -> list:
        return [self.arm_stats(a) for a in range(self.map.num_arms)]

    @property
    def per_cluster(self) -> list:
        return [self.cluster_stats(i) for i in range(self.map.num_clusters)]

    # ---- indices ----------------------------------------------------------

    def arm_indices(self, arms=None) -> np.ndarray:
        t = max(self.t, 1)
        sl = slice(None) if arms is None else arms
        if self._arm_hist:
            h = self.hist_n[sl]
            return _indices(self.hist_s[sl] + self.on_s[sl], h + self.on_n[sl], h, t)
        return _indices(self.on_s[sl], self.on_n[sl], 0.0, t)

    def cluster_indices(self) -> np.ndarray:
        t = max(self.t, 1)
        if self._cluster_hist:
            h = self.c_hist_n
            return _indices(self.c_hist_s + self.c_on_s, h + self.c_on_n, h, t)
        return _indices(self.c_on_s, self.c_on_n, 0.0, t)

    # ---- policy protocol --------------------------------------------------

    def select(self, x=None) -> int:
        if self._two_level:
            arms = self._members[int(np.argmax(self.cluster_indices()))]
            return int(arms[int(np.argmax(self.arm_indices(arms)))])
        return int(np.argmax(self.arm_indices()))

    def update(self, arm: int, reward: float, x=None) -> None:
        reward = float(reward)
        if not math.isfinite(reward):
            raise ValueError(f"reward must be finite, got {reward!r}")
        c = self._assign[arm]
        self.on_n[arm] += 1
        self.on_s[arm] += reward
        self.c_on_n[c] += 1
        self.c_on_s[c] += reward
        self.t += 1


def cluster_deviation_paths(means: Sequence[float], sampler, schedule: Sequence[int],
                            n_reps: int, rng: np.random.Generator) -> np.ndarray:
    """Cumulative reward deviation of a cluster along a fixed play schedule.

    ``schedule[l]`` is the arm behind the cluster's ``l+1``-th play (the
    historical plays first, then the online ones; both follow the same law).
    ``sampler(arms, rng)`` draws one reward per entry of ``arms``. Returns an
    ``(n_reps, len(schedule))`` array whose row ``r`` is the path
    ``z(1), ..., z(L)`` of replication ``r``.
    """
    arms = np.asarray(schedule, dtype=np.intp)
    mu = np.asarray(means, dtype=float)[arms]
    flat = np.tile(arms, n_reps)
    rewards = np.asarray(sampler(flat, rng), dtype=float).reshape(n_reps, arms.size)
    return np.cumsum(rewards - mu, axis=1)
