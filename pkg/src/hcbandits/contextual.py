"""Ridge-regression contextual policies: LINUCB, HLINUCB, LINUCBC, HLINUCBC.

Every arm (and, for the clustered kinds, every cluster) owns a ridge model
``(A, b, theta_hat)``. History enters by seeding ``A`` with the history
matrix ``I + sum x x^T`` and ``b`` with ``sum r x`` instead of ``I`` and 0.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ClusterMap

LINUCB = "linucb"
HLINUCB = "hlinucb"
LINUCBC = "linucbc"
HLINUCBC = "hlinucbc"
KINDS = (LINUCB, HLINUCB, LINUCBC, HLINUCBC)

# kind -> (clustered, seeded with history)
_LAYOUT = {
    LINUCB: (False, False),
    HLINUCB: (False, True),
    LINUCBC: (True, False),
    HLINUCBC: (True, True),
}

#: Direct re-factorisation period for the incrementally maintained inverse.
REFACTOR_EVERY = 256
#: Condition number beyond which the inverse is not trusted.
COND_LIMIT = 1e12


class ConditioningWarning(RuntimeWarning):
    pass


@dataclass
class HistorySeed:
    """History matrix ``H = I + sum x x^T`` and vector ``bh = sum r x``."""

    H: np.ndarray
    bh: np.ndarray

    def __post_init__(self):
        self.H = np.array(self.H, dtype=float)
        self.bh = np.array(self.bh, dtype=float)
        d = self.bh.shape[0]
        if self.H.shape != (d, d) or self.bh.ndim != 1:
            raise ValueError(f"dimension mismatch: H {self.H.shape}, bh {self.bh.shape}")

    @property
    def d(self) -> int:
        return self.bh.shape[0]

    @classmethod
    def identity(cls, d: int) -> "HistorySeed":
        return cls(np.eye(d), np.zeros(d))

    @classmethod
    def from_records(cls, contexts, rewards, d: int | None = None) -> "HistorySeed":
        """Fold historical ``(context, reward)`` pairs into a seed."""
        X = np.asarray(contexts, dtype=float)
        r = np.asarray(rewards, dtype=float)
        if X.size == 0:
            if d is None:
                raise ValueError("d is required for an empty history")
            return cls.identity(d)
        X = X.reshape(len(r), -1)
        if d is not None and X.shape[1] != d:
            raise ValueError(f"contexts have dimension {X.shape[1]}, expected {d}")
        return cls(np.eye(X.shape[1]) + X.T @ X, X.T @ r)

    def record(self, x, r: float) -> None:
        x = np.asarray(x, dtype=float)
        self.H += np.outer(x, x)
        self.bh += r * x


def cluster_seed(seeds: Sequence[HistorySeed]) -> HistorySeed:
    """Pool member-arm seeds: their rank-one terms plus a single identity."""
    if not seeds:
        raise ValueError("a cluster needs at least one arm seed")
    d = seeds[0].d
    H = np.eye(d)
    bh = np.zeros(d)
    for s in seeds:
        if s.d != d:
            raise ValueError("mixed context dimensions")
        H += s.H - np.eye(d)
        bh += s.bh
    return HistorySeed(H, bh)


def _check_seed(seed: HistorySeed, d: int) -> None:
    if seed.d != d:
        raise ValueError(f"seed dimension {seed.d} != {d}")
    H = seed.H
    if not np.allclose(H, H.T, rtol=0, atol=1e-12 * max(1.0, np.abs(H).max())):
        raise ValueError("history matrix is not symmetric")
    lo = np.linalg.eigvalsh(H)[0]
    if lo < 1.0 - 1e-9:
        raise ValueError(f"history matrix has eigenvalue {lo:.3g} < 1")


class RidgeState:
    """Online ridge model for one arm or cluster.

    ``A_inv`` and ``theta_hat`` follow rank-one (Sherman-Morrison) updates and
    are recomputed from ``A`` every ``REFACTOR_EVERY`` updates. The arrays
    may be views into a :class:`RidgeBank`, in which case updates write
    through to it.
    """

    def __init__(self, A, b, A_inv=None, theta_hat=None):
        self.A = A
        self.b = b
        if A_inv is None:
            A_inv = np.empty_like(A)
            theta_hat = np.empty_like(b)
            self.A_inv, self.theta_hat = A_inv, theta_hat
            self.refactor()
        else:
            self.A_inv, self.theta_hat = A_inv, theta_hat
        self.updates = 0

    @classmethod
    def from_seed(cls, seed: HistorySeed) -> "RidgeState":
        return cls(seed.H.copy(), seed.bh.copy())

    @classmethod
    def identity(cls, d: int) -> "RidgeState":
        return cls.from_seed(HistorySeed.identity(d))

    @property
    def d(self) -> int:
        return self.b.shape[0]

    def refactor(self) -> None:
        """Recompute ``A_inv`` and ``theta_hat`` directly from ``A`` and ``b``."""
        A = self.A
        if np.linalg.cond(A) > COND_LIMIT:
            warnings.warn("ill-conditioned ridge matrix; using direct solves",
                          ConditioningWarning, stacklevel=2)
            self.A_inv[...] = np.linalg.pinv(A, hermitian=True)
            self.theta_hat[...] = np.linalg.lstsq(A, self.b, rcond=None)[0]
            return
        L = np.linalg.cholesky(A)
        Linv = np.linalg.solve(L, np.eye(A.shape[0]))
        self.A_inv[...] = Linv.T @ Linv
        self.theta_hat[...] = self.A_inv @ self.b

    def update(self, x, r: float) -> None:
        v = self.A_inv @ x
        self.A += np.outer(x, x)
        self.b += r * x
        self.updates += 1
        if self.updates % REFACTOR_EVERY == 0:
            self.refactor()
            return
        self.A_inv -= np.outer(v, v) / (1.0 + x @ v)
        self.theta_hat[...] = self.A_inv @ self.b

    def score(self, x, alpha: float) -> float:
        return score(self, x, alpha)

    def logdet(self) -> float:
        sign, ld = np.linalg.slogdet(self.A)
        if sign <= 0:
            raise np.linalg.LinAlgError("ridge matrix is not positive definite")
        return float(ld)


def solve(state: RidgeState) -> np.ndarray:
    """Direct solve of ``A theta = b`` (the reference for the incremental path)."""
    A, b = state.A, state.b
    if np.linalg.cond(A) > COND_LIMIT:
        warnings.warn("ill-conditioned ridge matrix", ConditioningWarning, stacklevel=2)
        return np.linalg.lstsq(A, b, rcond=None)[0]
    return np.linalg.solve(A, b)


def score(state: RidgeState, x, alpha: float) -> float:
    """Upper confidence score ``theta_hat.x + alpha sqrt(x^T A^-1 x)``."""
    x = np.asarray(x, dtype=float)
    if x.shape != state.b.shape:
        raise ValueError(f"context dimension {x.shape} != {state.b.shape}")
    return float(state.theta_hat @ x + alpha * math.sqrt(max(x @ state.A_inv @ x, 0.0)))


class RidgeBank:
    """Stacked ridge models, scored together; ``bank[i]`` is a write-through
    :class:`RidgeState` view of model ``i``."""

    def __init__(self, seeds: Sequence[HistorySeed]):
        d = seeds[0].d
        n = len(seeds)
        self.A = np.empty((n, d, d))
        self.b = np.empty((n, d))
        self.A_inv = np.empty((n, d, d))
        self.theta_hat = np.empty((n, d))
        self.states = []
        for i, s in enumerate(seeds):
            if s.d != d:
                raise ValueError("mixed context dimensions")
            self.A[i] = s.H
            self.b[i] = s.bh
            self.states.append(RidgeState(self.A[i], self.b[i], self.A_inv[i], self.theta_hat[i]))
            self.states[-1].refactor()

    def __getitem__(self, i: int) -> RidgeState:
        return self.states[i]

    def __len__(self) -> int:
        return len(self.states)

    def scores(self, x: np.ndarray, alpha: float, idx=None) -> np.ndarray:
        if idx is None:
            Ainv, th = self.A_inv, self.theta_hat
        else:
            Ainv, th = self.A_inv[idx], self.theta_hat[idx]
        quad = np.einsum("nij,i,j->n", Ainv, x, x)
        return th @ x + alpha * np.sqrt(np.maximum(quad, 0.0))


class ContextualPolicy:
    """One of the four ridge-regression UCB policies.

    ``arm_seeds`` are per-arm history seeds; cluster seeds default to the
    pooled member seeds. Kinds without history start every model at
    ``A = I, b = 0`` regardless of the seeds passed.
    """

    contextual = True

    def __init__(self, kind: str, cmap: ClusterMap, d: int,
                 arm_seeds: Sequence[HistorySeed] | None = None,
                 cluster_seeds: Sequence[HistorySeed] | None = None,
                 alpha: float = 1.0):
        if kind not in _LAYOUT:
            raise ValueError(f"unknown contextual policy kind {kind!r}")
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        self.kind = kind
        self.map = cmap
        self.d = d
        self.alpha = float(alpha)
        self.clustered, seeded = _LAYOUT[kind]
        k, c = cmap.num_arms, cmap.num_clusters

        if seeded and arm_seeds is not None:
            if len(arm_seeds) != k:
                raise ValueError(f"{len(arm_seeds)} arm seeds for {k} arms")
            for s in arm_seeds:
                _check_seed(s, d)
            if cluster_seeds is None:
                cluster_seeds = [cluster_seed([arm_seeds[a] for a in cmap.members(i)])
                                 for i in range(c)]
            elif len(cluster_seeds) != c:
                raise ValueError(f"{len(cluster_seeds)} cluster seeds for {c} clusters")
            for s in cluster_seeds:
                _check_seed(s, d)
        else:
            arm_seeds = [HistorySeed.identity(d) for _ in range(k)]
            cluster_seeds = [HistorySeed.identity(d) for _ in range(c)]

        self.per_arm = RidgeBank(arm_seeds)
        self.per_cluster = RidgeBank(cluster_seeds) if self.clustered else None
        self._assign = cmap.as_array()
        self._members = [np.asarray(cmap.members(i), dtype=np.intp) for i in range(c)]
        self.t = 0

    def _context(self, x) -> np.ndarray:
        if x is None:
            raise ValueError("contextual policies need a context")
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"context shape {x.shape} != ({self.d},)")
        if not np.all(np.isfinite(x)):
            raise ValueError("context must be finite")
        return x

    def select(self, x=None) -> int:
        x = self._context(x)
        if self.clustered:
            i = int(np.argmax(self.per_cluster.scores(x, self.alpha)))
            arms = self._members[i]
            return int(arms[int(np.argmax(self.per_arm.scores(x, self.alpha, arms)))])
        return int(np.argmax(self.per_arm.scores(x, self.alpha)))

    def update(self, arm: int, reward: float, x=None) -> None:
        x = self._context(x)
        reward = float(reward)
        if not math.isfinite(reward):
            raise ValueError(f"reward must be finite, got {reward!r}")
        self.per_arm[arm].update(x, reward)
        if self.clustered:
            self.per_cluster[self._assign[arm]].update(x, reward)
        self.t += 1
