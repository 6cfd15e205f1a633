"""META: a two-armed UCB that picks, every round, which of two complete
bandit policies (one using clustering, one not) gets to choose the arm."""

from __future__ import annotations

import logging
import math

import numpy as np

from .core import ArmStats, record
from .classical import ucb_index

log = logging.getLogger(__name__)

A, B = 0, 1


class MetaPolicy:
    """UCB over two sub-policies.

    Only the sub-policy that was played sees the round's feedback unless
    ``share_feedback`` is set, in which case both are updated with the
    played arm's reward. Meta-level statistics record rewards normalised to
    ``[0, 1]`` through ``reward_range``; out-of-range rewards are clamped.
    """

    def __init__(self, sub_a, sub_b, reward_range=(0.0, 1.0), share_feedback=False):
        if sub_a.contextual != sub_b.contextual:
            raise ValueError("sub-policies must both be classical or both contextual")
        lo, hi = (float(v) for v in reward_range)
        if not hi > lo:
            raise ValueError(f"empty reward range {reward_range!r}")
        self.subs = (sub_a, sub_b)
        self.contextual = sub_a.contextual
        self.reward_range = (lo, hi)
        self.share_feedback = share_feedback
        self.meta_stats = [ArmStats(), ArmStats()]
        self.t = 0
        self.clamped = 0
        self.last_sub = None

    @property
    def sub_a(self):
        return self.subs[A]

    @property
    def sub_b(self):
        return self.subs[B]

    def _check_context(self, x):
        if self.contextual and x is None:
            raise ValueError("contextual sub-policies need a context")
        if not self.contextual and x is not None:
            raise ValueError("classical sub-policies take no context")

    def meta_select(self, x=None) -> tuple:
        """Return ``(sub, arm)`` for this round."""
        self._check_context(x)
        t = max(self.t, 1)
        idx = [ucb_index(s, t) for s in self.meta_stats]
        sub = B if idx[B] > idx[A] else A
        return sub, self.subs[sub].select(x)

    def meta_update(self, sub: int, arm: int, reward: float, x=None) -> None:
        self._check_context(x)
        lo, hi = self.reward_range
        z = (float(reward) - lo) / (hi - lo)
        if not math.isfinite(z):
            raise ValueError(f"reward must be finite, got {reward!r}")
        if z < 0.0 or z > 1.0:
            if self.clamped == 0:
                log.warning("reward %r outside declared range %r; clamping", reward, self.reward_range)
            self.clamped += 1
            z = min(max(z, 0.0), 1.0)
        self.meta_stats[sub] = record(self.meta_stats[sub], z)
        self.subs[sub].update(arm, reward, x)
        if self.share_feedback:
            self.subs[1 - sub].update(arm, reward, x)
        self.t += 1

    # policy protocol, so META can be driven like any other policy

    def select(self, x=None) -> int:
        self.last_sub, arm = self.meta_select(x)
        return arm

    def update(self, arm: int, reward: float, x=None) -> None:
        if self.last_sub is None:
            raise RuntimeError("update() without a preceding select()")
        self.meta_update(self.last_sub, arm, reward, x)
        self.last_sub = None

    def play_counts(self) -> np.ndarray:
        return np.array([s.online_count for s in self.meta_stats])
