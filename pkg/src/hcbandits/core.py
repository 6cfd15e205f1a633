"""Shared domain types: per-arm reward tallies, cluster maps and RNG streams."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

HISTORICAL = "historical"
ONLINE = "online"

#: Identifier recorded in run manifests for the project-wide generator choice.
RNG_ALGORITHM = "numpy.PCG64 via SeedSequence(seed, spawn_key=stream_id)"


class UndefinedMeanError(ValueError):
    """Raised when a mean is requested for an entry with no observations."""


@dataclass(frozen=True)
class ArmStats:
    """Reward tallies for one arm (or one cluster), kept separately for
    historical and online observations.

    Sums rather than running means are stored so that pooling history with
    online plays, and aggregating arms into clusters, stay exact.
    """

    hist_count: int = 0
    hist_sum: float = 0.0
    online_count: int = 0
    online_sum: float = 0.0

    def __post_init__(self):
        if self.hist_count < 0 or self.online_count < 0:
            raise ValueError("counts must be nonnegative")

    @property
    def total_count(self) -> int:
        return self.hist_count + self.online_count

    @property
    def total_sum(self) -> float:
        return self.hist_sum + self.online_sum

    def __add__(self, other: "ArmStats") -> "ArmStats":
        return ArmStats(
            self.hist_count + other.hist_count,
            self.hist_sum + other.hist_sum,
            self.online_count + other.online_count,
            self.online_sum + other.online_sum,
        )


def record(stats: ArmStats, reward: float, phase: str = ONLINE) -> ArmStats:
    """Return ``stats`` with one more observation of ``reward`` in ``phase``."""
    reward = float(reward)
    if not math.isfinite(reward):
        raise ValueError(f"reward must be finite, got {reward!r}")
    if phase == HISTORICAL:
        return ArmStats(stats.hist_count + 1, stats.hist_sum + reward,
                        stats.online_count, stats.online_sum)
    if phase == ONLINE:
        return ArmStats(stats.hist_count, stats.hist_sum,
                        stats.online_count + 1, stats.online_sum + reward)
    raise ValueError(f"unknown phase {phase!r}")


def pooled_mean(stats: ArmStats) -> float:
    """Mean over historical and online observations together."""
    n = stats.total_count
    if n == 0:
        raise UndefinedMeanError("no historical or online observations")
    return stats.total_sum / n


@dataclass(frozen=True)
class ClusterMap:
    """Fixed assignment of arms ``0..K-1`` to clusters ``0..C-1``."""

    assignment: tuple

    def __init__(self, assignment: Sequence[int], num_clusters: int | None = None):
        a = tuple(int(c) for c in assignment)
        if not a:
            raise ValueError("a cluster map needs at least one arm")
        if min(a) < 0:
            raise ValueError("cluster ids must be nonnegative")
        c = max(a) + 1 if num_clusters is None else int(num_clusters)
        if max(a) >= c:
            raise ValueError(f"cluster id {max(a)} out of range for {c} clusters")
        missing = sorted(set(range(c)) - set(a))
        if missing:
            raise ValueError(f"clusters without arms: {missing}")
        object.__setattr__(self, "assignment", a)
        object.__setattr__(self, "_members", tuple(
            tuple(k for k, ck in enumerate(a) if ck == i) for i in range(c)))

    @property
    def num_arms(self) -> int:
        return len(self.assignment)

    @property
    def num_clusters(self) -> int:
        return len(self._members)

    def cluster_of(self, arm: int) -> int:
        return self.assignment[arm]

    def members(self, cluster: int) -> tuple:
        """Arm ids of ``cluster`` in increasing order."""
        if not 0 <= cluster < self.num_clusters:
            raise ValueError(f"unknown cluster id {cluster}")
        return self._members[cluster]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.assignment, dtype=np.intp)

    @classmethod
    def single(cls, num_arms: int) -> "ClusterMap":
        return cls([0] * num_arms)

    @classmethod
    def singletons(cls, num_arms: int) -> "ClusterMap":
        return cls(range(num_arms))


def cluster_stats(cmap: ClusterMap, per_arm: Sequence[ArmStats], cluster: int) -> ArmStats:
    """Componentwise sum of the stats of every arm in ``cluster``."""
    if len(per_arm) != cmap.num_arms:
        raise ValueError("per_arm length does not match the cluster map")
    total = ArmStats()
    for k in cmap.members(cluster):
        total = total + per_arm[k]
    return total


@dataclass(frozen=True)
class RngStream:
    """Named, reproducible random stream.

    The same ``(seed, stream_id)`` always produces the same draws; different
    stream ids give independent streams (SeedSequence spawn keys).
    """

    seed: int
    stream_id: tuple = ()

    def __post_init__(self):
        sid = self.stream_id
        if isinstance(sid, (int, np.integer)):
            sid = (int(sid),)
        object.__setattr__(self, "stream_id", tuple(int(s) for s in sid))
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id + tuple(ids))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=self.stream_id)
        return np.random.Generator(np.random.PCG64(ss))
