"""Synthetic classical and contextual environments with generated history."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..contextual import HistorySeed, cluster_seed
from ..core import ClusterMap

#: Classical rewards are clipped just below 1 to keep their support in (0, 1).
CLIP = 1.0 - 1e-9
# two-sided 0.999 normal quantile, used to size the contextual reward range
_Z999 = 3.2905


def _random_split(num_arms: int, num_clusters: int, rng: np.random.Generator) -> ClusterMap:
    perm = rng.permutation(num_arms)
    assignment = np.empty(num_arms, dtype=int)
    for i, chunk in enumerate(np.array_split(perm, num_clusters)):
        assignment[chunk] = i
    return ClusterMap(assignment, num_clusters)


def centroid(u: float, i: int) -> float:
    """Mean reward of (1-based) cluster ``i`` given its uniform draw ``u``."""
    return 0.5 * (u + 1.0 / i)


def clipped_uniform_mean(upper, clip: float = CLIP):
    """Mean of ``min(U(0, upper), clip)``, elementwise."""
    m = np.asarray(upper, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        over = clip - clip ** 2 / (2 * m)
    return np.where(m <= clip, m / 2, over)


class ClassicalEnvironment:
    """Fixed reward laws for ``K`` clustered arms.

    ``family='uniform'``: arm ``k`` pays ``min(U(0, upper[k]), CLIP)``.
    ``family='bernoulli'``: arm ``k`` pays 1 with probability ``upper[k]``.
    ``means`` are the exact expectations after clipping.
    """

    contextual = False

    def __init__(self, cmap: ClusterMap, upper, family: str = "uniform", constants=None):
        self.map = cmap
        self.upper = np.asarray(upper, dtype=float)
        if self.upper.shape != (cmap.num_arms,):
            raise ValueError("one reward parameter per arm is required")
        if family == "uniform":
            if np.any(self.upper <= 0):
                raise ValueError("uniform upper ends must be positive")
            self.means = clipped_uniform_mean(self.upper)
            self.clip_probability = np.clip(1 - CLIP / self.upper, 0, 1)
        elif family == "bernoulli":
            if np.any((self.upper < 0) | (self.upper > 1)):
                raise ValueError("bernoulli parameters must lie in [0, 1]")
            self.means = self.upper.copy()
            self.clip_probability = np.zeros_like(self.upper)
        else:
            raise ValueError(f"unknown reward family {family!r}")
        self.family = family
        self.constants = dict(constants or {})
        self.reward_range = (0.0, 1.0)

    @classmethod
    def from_means(cls, means, cmap: ClusterMap | None = None, family: str = "bernoulli"):
        """Environment whose arms have the given expected rewards."""
        means = np.asarray(means, dtype=float)
        cmap = cmap or ClusterMap.single(means.size)
        upper = means if family == "bernoulli" else 2 * means
        return cls(cmap, upper, family)

    @property
    def num_arms(self) -> int:
        return self.map.num_arms

    @property
    def best_arm(self) -> int:
        return int(np.argmax(self.means))

    def rewards_from_uniforms(self, arms, u):
        if self.family == "uniform":
            return np.minimum(np.asarray(u) * self.upper[arms], CLIP)
        return (np.asarray(u) < self.upper[arms]).astype(float)

    def sample(self, arms, rng: np.random.Generator) -> np.ndarray:
        arms = np.asarray(arms, dtype=np.intp)
        return self.rewards_from_uniforms(arms, rng.random(arms.shape))

    def episode(self, rng: np.random.Generator, T: int) -> "ClassicalEpisode":
        return ClassicalEpisode(self, rng.random(T))

    def manifest(self) -> dict:
        out = {"family": self.family, "num_arms": self.num_arms,
               "num_clusters": self.map.num_clusters,
               "assignment": list(self.map.assignment),
               "means": self.means.tolist(),
               "expected_clip_rate": float(self.clip_probability.mean())}
        out.update(self.constants)
        return out


class ClassicalEpisode:
    """One online run: a uniform per round, shared by every policy replaying
    the same episode, so policies face common random numbers."""

    def __init__(self, env: ClassicalEnvironment, u: np.ndarray):
        self.env = env
        self.u = u
        self.T = len(u)
        self.clipped = 0
        self._best = float(env.means.max())
        self._best_arm = int(np.argmax(env.means))

    def context(self, t: int):
        return None

    def pull(self, t: int, arm: int) -> float:
        env = self.env
        if env.family == "uniform":
            r = self.u[t] * env.upper[arm]
            if r > CLIP:
                self.clipped += 1
                return CLIP
            return float(r)
        return 1.0 if self.u[t] < env.upper[arm] else 0.0

    def expected(self, t: int, arm: int) -> float:
        return float(self.env.means[arm])

    def best(self, t: int) -> tuple:
        return self._best_arm, self._best


@dataclass
class SyntheticClassicalSpec:
    num_clusters: int = 10
    num_arms: int = 100
    history_fraction: float = 0.25
    history_mean: float = 10.0
    scale_low: float = 0.9
    scale_high: float = 1.1


def gen_classical(spec: SyntheticClassicalSpec, rng: np.random.Generator) -> ClassicalEnvironment:
    """Clustered uniform-reward arms with centroids ``(u_i + 1/i) / 2``.

    Arm ``k`` pays ``U(0, 2 a_k lambda(c(k)))`` with a per-arm scale
    ``a_k ~ U(scale_low, scale_high)``, clipped into (0, 1).
    """
    if spec.num_arms < spec.num_clusters:
        raise ValueError("need at least one arm per cluster")
    cmap = _random_split(spec.num_arms, spec.num_clusters, rng)
    u = rng.random(spec.num_clusters)
    lam = np.array([centroid(u[i], i + 1) for i in range(spec.num_clusters)])
    scale = rng.uniform(spec.scale_low, spec.scale_high, spec.num_arms)
    upper = 2 * scale * lam[cmap.as_array()]
    consts = {"centroids": lam.tolist(), "arm_scales": scale.tolist()}
    return ClassicalEnvironment(cmap, upper, "uniform", consts)


def gen_history_classical(env: ClassicalEnvironment, fraction: float, mean: float,
                          rng: np.random.Generator) -> list:
    """Per-arm historical rewards: ``round(fraction K)`` uniformly chosen arms
    get ``Poisson(mean)`` draws from their own reward law, the rest none."""
    if not 0 <= fraction <= 1:
        raise ValueError("fraction must lie in [0, 1]")
    K = env.num_arms
    n_hist = int(math.floor(fraction * K + 0.5))
    chosen = rng.choice(K, size=n_hist, replace=False)
    history = [np.empty(0) for _ in range(K)]
    for k in np.sort(chosen):
        x = rng.poisson(mean)
        history[k] = env.sample(np.full(x, k), rng)
    return history


class ContextualEnvironment:
    """Linear-payoff arms: arm ``k`` pays a uniform draw between 0 and
    ``2 theta_k . x`` (negative when the mean is negative)."""

    contextual = True

    def __init__(self, cmap: ClusterMap, theta, constants=None, reward_range=None):
        self.map = cmap
        self.theta = np.asarray(theta, dtype=float)
        if self.theta.ndim != 2 or self.theta.shape[0] != cmap.num_arms:
            raise ValueError("theta must be (num_arms, d)")
        self.constants = dict(constants or {})
        if reward_range is None:
            m = 2 * _Z999 * float(np.linalg.norm(self.theta, axis=1).max())
            reward_range = (-m, m)
        self.reward_range = tuple(reward_range)

    @property
    def num_arms(self) -> int:
        return self.map.num_arms

    @property
    def d(self) -> int:
        return self.theta.shape[1]

    def sample(self, arms, X, rng: np.random.Generator) -> np.ndarray:
        arms = np.asarray(arms, dtype=np.intp)
        mean = np.einsum("nd,nd->n", self.theta[arms], np.asarray(X, dtype=float))
        return 2 * mean * rng.random(arms.shape)

    def episode(self, rng: np.random.Generator, T: int) -> "ContextualEpisode":
        X = rng.standard_normal((T, self.d))
        return ContextualEpisode(self.theta, X, rng.random(T))

    def manifest(self) -> dict:
        out = {"num_arms": self.num_arms, "num_clusters": self.map.num_clusters,
               "d": self.d, "assignment": list(self.map.assignment),
               "theta": self.theta.tolist(), "reward_range": list(self.reward_range)}
        out.update(self.constants)
        return out


class ContextualEpisode:
    def __init__(self, theta, X, u):
        self.theta = theta
        self.X = X
        self.u = u
        self.T = len(X)
        self._t = -1
        self._mu = None

    def _means(self, t):
        if t != self._t:
            self._t = t
            self._mu = self.theta @ self.X[t]
        return self._mu

    def context(self, t: int):
        return self.X[t]

    def pull(self, t: int, arm: int) -> float:
        return float(2 * self._means(t)[arm] * self.u[t])

    def expected(self, t: int, arm: int) -> float:
        return float(self._means(t)[arm])

    def best(self, t: int) -> tuple:
        mu = self._means(t)
        k = int(np.argmax(mu))
        return k, float(mu[k])


@dataclass
class SyntheticContextualSpec:
    num_clusters: int = 10
    num_arms: int = 100
    d: int = 5
    epsilon: float = 0.1
    history_mean: float = 10.0


def gen_contextual(spec: SyntheticContextualSpec, rng: np.random.Generator) -> ContextualEnvironment:
    """Cluster centroids ``~ N(0, I)``; arm coefficients are the centroid plus
    ``epsilon`` times an independent standard normal vector."""
    cmap = _random_split(spec.num_arms, spec.num_clusters, rng)
    centroids = rng.standard_normal((spec.num_clusters, spec.d))
    nu = rng.standard_normal((spec.num_arms, spec.d))
    theta = centroids[cmap.as_array()] + spec.epsilon * nu
    consts = {"epsilon": spec.epsilon, "centroids": centroids.tolist()}
    return ContextualEnvironment(cmap, theta, consts)


def gen_history_contextual(spec: SyntheticContextualSpec, env: ContextualEnvironment,
                           rng: np.random.Generator) -> list:
    """Per-arm history seeds from ``Poisson(history_mean)`` plays with fresh
    standard-normal contexts and the online reward law."""
    seeds = []
    for k in range(env.num_arms):
        x = rng.poisson(spec.history_mean)
        X = rng.standard_normal((x, env.d))
        r = env.sample(np.full(x, k), X, rng)
        seeds.append(HistorySeed.from_records(X, r, env.d))
    return seeds


def cluster_seeds(cmap: ClusterMap, arm_seeds) -> list:
    return [cluster_seed([arm_seeds[k] for k in cmap.members(i)]) for i in range(cmap.num_clusters)]
