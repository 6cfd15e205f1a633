"""CSV-backed environments: web-server latency replay and hierarchical
(15 fine / 3 coarse class) dose classification."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..contextual import HistorySeed
from ..core import ClusterMap

log = logging.getLogger(__name__)

QUINTILE = "quintile"
DOMAIN = "domain"
CLUSTER_MODES = (QUINTILE, DOMAIN)

NUM_FINE = 15
FINE_PER_COARSE = 5


class DatasetFormatError(ValueError):
    """A data file does not follow its CSV schema."""


# ---------------------------------------------------------------------------
# latency


@dataclass
class LatencyDataset:
    source_ids: list
    domains: list
    traces: list
    clustering_mode: str = QUINTILE
    history_size: int = 200
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.clustering_mode not in CLUSTER_MODES:
            raise ValueError(f"unknown clustering mode {self.clustering_mode!r}")
        lo = min(float(t.min()) for t in self.traces)
        hi = max(float(t.max()) for t in self.traces)
        self.latency_min, self.latency_max = lo, hi

    @property
    def num_sources(self) -> int:
        return len(self.source_ids)

    def normalize(self, latency):
        """Map latencies to rewards: the fastest reading gives 1, the slowest 0."""
        span = self.latency_max - self.latency_min
        if span == 0:
            return np.ones_like(np.asarray(latency, dtype=float))
        return (self.latency_max - np.asarray(latency, dtype=float)) / span

    def cluster_map(self, mode: str | None = None) -> ClusterMap:
        mode = mode or self.clustering_mode
        n = self.num_sources
        if mode == QUINTILE:
            avg = np.array([t.mean() for t in self.traces])
            order = np.argsort(avg, kind="stable")
            assignment = np.empty(n, dtype=int)
            for i, chunk in enumerate(np.array_split(order, min(5, n))):
                assignment[chunk] = i
            return ClusterMap(assignment)
        if mode == DOMAIN:
            names = sorted(set(self.domains))
            ids = {name: i for i, name in enumerate(names)}
            return ClusterMap([ids[d] for d in self.domains])
        raise ValueError(f"unknown clustering mode {mode!r}")

    def environment(self, rng: np.random.Generator, mode: str | None = None,
                    history_size: int | None = None) -> "LatencyEnvironment":
        """Hold out ``history_size`` (source, reading) pairs drawn uniformly
        at random as history; the rest is replayed online."""
        history_size = self.history_size if history_size is None else history_size
        cmap = self.cluster_map(mode)
        rewards = [self.normalize(t) for t in self.traces]
        lengths = np.array([len(r) for r in rewards])
        offsets = np.concatenate([[0], np.cumsum(lengths)])
        total = int(offsets[-1])
        if history_size > total:
            raise ValueError(f"history_size {history_size} exceeds {total} readings")
        picked = np.sort(rng.choice(total, size=history_size, replace=False))
        src = np.searchsorted(offsets, picked, side="right") - 1
        history, online = [], []
        for k, r in enumerate(rewards):
            mask = np.zeros(len(r), dtype=bool)
            mask[picked[src == k] - offsets[k]] = True
            history.append(r[mask])
            rest = r[~mask]
            online.append(rest if rest.size else r.copy())
        return LatencyEnvironment(cmap, online, history, self)


class LatencyEnvironment:
    """Replays each source's shuffled online readings; a source that runs out
    is reshuffled and replayed again (counted in ``wraps``)."""

    contextual = False
    reward_range = (0.0, 1.0)

    def __init__(self, cmap, online, history, dataset):
        self.map = cmap
        self.online = online
        self.history = history
        self.dataset = dataset
        self.means = np.array([o.mean() for o in online])

    @property
    def num_arms(self) -> int:
        return self.map.num_arms

    def episode(self, rng: np.random.Generator, T: int) -> "LatencyEpisode":
        return LatencyEpisode(self, rng)

    def manifest(self) -> dict:
        return {"num_arms": self.num_arms, "num_clusters": self.map.num_clusters,
                "latency_min": self.dataset.latency_min,
                "latency_max": self.dataset.latency_max,
                "history_readings": int(sum(len(h) for h in self.history)),
                "best_mean_reward": float(self.means.max())}


class LatencyEpisode:
    def __init__(self, env: LatencyEnvironment, rng: np.random.Generator):
        self.env = env
        self.rng = rng
        self.traces = [rng.permutation(o) for o in env.online]
        self.pos = np.zeros(len(self.traces), dtype=int)
        self.wraps = 0
        self._best = (int(np.argmax(env.means)), float(env.means.max()))

    def context(self, t: int):
        return None

    def pull(self, t: int, arm: int) -> float:
        trace = self.traces[arm]
        if self.pos[arm] == len(trace):
            self.traces[arm] = trace = self.rng.permutation(self.env.online[arm])
            self.pos[arm] = 0
            self.wraps += 1
        r = trace[self.pos[arm]]
        self.pos[arm] += 1
        return float(r)

    def expected(self, t: int, arm: int) -> float:
        return float(self.env.means[arm])

    def best(self, t: int) -> tuple:
        return self._best


def load_latency(path, clustering_mode: str = QUINTILE, history_size: int = 200) -> LatencyDataset:
    """Read a ``source_id,domain,latency_ms`` CSV (one row per reading).

    A row whose latency is missing registers the source without a reading;
    sources left without readings are dropped with a warning. Any other
    malformed row raises :class:`DatasetFormatError` naming its line.
    """
    path = Path(path)
    order, domains, readings = [], {}, {}
    rows = 0
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["source_id", "domain", "latency_ms"]:
            raise DatasetFormatError(f"{path}:1: expected header source_id,domain,latency_ms")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DatasetFormatError(f"{path}:{line}: expected 3 fields, got {len(row)}")
            sid, dom, lat = (v.strip() for v in row)
            if not sid:
                raise DatasetFormatError(f"{path}:{line}: empty source_id")
            if sid not in domains:
                order.append(sid)
                domains[sid] = dom
                readings[sid] = []
            elif domains[sid] != dom:
                raise DatasetFormatError(f"{path}:{line}: source {sid} changes domain")
            rows += 1
            if lat == "":
                continue
            try:
                value = float(lat)
            except ValueError:
                raise DatasetFormatError(f"{path}:{line}: latency {lat!r} is not a number") from None
            if not (math.isfinite(value) and value > 0):
                raise DatasetFormatError(f"{path}:{line}: latency must be positive, got {lat}")
            readings[sid].append(value)

    kept = [s for s in order if readings[s]]
    dropped = [s for s in order if not readings[s]]
    if dropped:
        log.warning("dropping %d source(s) with no readings: %s", len(dropped), dropped[:5])
    if not kept:
        raise DatasetFormatError(f"{path}: no usable readings")
    traces = [np.asarray(readings[s]) for s in kept]
    ds = LatencyDataset(kept, [domains[s] for s in kept], traces, clustering_mode, history_size)
    ds.report = {"path": str(path), "rows": rows, "sources": len(kept),
                 "dropped_sources": len(dropped),
                 "readings": int(sum(len(t) for t in traces)),
                 "latency_min": ds.latency_min, "latency_max": ds.latency_max}
    return ds


# ---------------------------------------------------------------------------
# dose


def coarse_class(label: int) -> int:
    """1-based coarse class of a 1-based fine label (blocks of five)."""
    return (int(label) - 1) // FINE_PER_COARSE + 1


def dose_cluster_map() -> ClusterMap:
    return ClusterMap([k // FINE_PER_COARSE for k in range(NUM_FINE)])


@dataclass
class HierarchicalDoseDataset:
    features: np.ndarray
    labels: np.ndarray
    history_size: int = 1500
    report: dict = field(default_factory=dict)

    @property
    def num_patients(self) -> int:
        return len(self.labels)

    @property
    def d(self) -> int:
        """Context dimension: the features plus a constant intercept."""
        return self.features.shape[1] + 1

    def environment(self, rng: np.random.Generator,
                    history_size: int | None = None) -> "DoseEnvironment":
        """Shuffle patients; the first ``history_size`` become logged history.

        Features are standardised with the history split's moments (the whole
        set if there is no history) and an intercept is appended. Each
        historical patient is logged under a uniformly random arm with the
        matching 0/1 reward.
        """
        h = self.history_size if history_size is None else history_size
        n = self.num_patients
        if not 0 <= h < n:
            raise ValueError(f"history_size {h} leaves no online rounds out of {n}")
        perm = rng.permutation(n)
        F = self.features[perm]
        y = self.labels[perm] - 1
        ref = F[:h] if h > 1 else F
        mu = ref.mean(axis=0)
        sd = ref.std(axis=0)
        sd[sd == 0] = 1.0
        X = np.hstack([(F - mu) / sd, np.ones((n, 1))])
        logged = rng.integers(0, NUM_FINE, size=h)
        seeds = []
        for k in range(NUM_FINE):
            rows = np.flatnonzero(logged == k)
            seeds.append(HistorySeed.from_records(X[rows], (y[rows] == k).astype(float), X.shape[1]))
        return DoseEnvironment(X[h:], y[h:], seeds, {"feature_mean": mu.tolist(),
                                                     "feature_std": sd.tolist(),
                                                     "history_size": h})


class DoseEnvironment:
    contextual = True
    reward_range = (0.0, 1.0)

    def __init__(self, X, y, arm_seeds, constants):
        self.map = dose_cluster_map()
        self.X = X
        self.y = y
        self.arm_seeds = arm_seeds
        self.constants = constants

    @property
    def num_arms(self) -> int:
        return NUM_FINE

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def rounds_available(self) -> int:
        return len(self.y)

    def episode(self, rng: np.random.Generator, T: int) -> "DoseEpisode":
        return DoseEpisode(self.X, self.y)

    def manifest(self) -> dict:
        return {"num_arms": NUM_FINE, "num_clusters": self.map.num_clusters,
                "d": self.d, "online_rounds": self.rounds_available, **self.constants}


class DoseEpisode:
    def __init__(self, X, y):
        self.X = X
        self.y = y
        self.T = len(y)

    def context(self, t: int):
        return self.X[t]

    def pull(self, t: int, arm: int) -> float:
        return 1.0 if arm == self.y[t] else 0.0

    expected = pull

    def best(self, t: int) -> tuple:
        return int(self.y[t]), 1.0


def load_dose(path, history_size: int = 1500) -> HierarchicalDoseDataset:
    """Read an ``f1,...,fd,label`` CSV with integer labels in 1..15.

    Rows with a missing or non-numeric feature, or an unknown label, are
    skipped and counted in ``report['rejected']``.
    """
    path = Path(path)
    feats, labels = [], []
    rejected = 0
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2 or header[-1].strip() != "label":
            raise DatasetFormatError(f"{path}:1: expected header f1,...,fd,label")
        width = len(header)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                rejected += 1
                continue
            try:
                f = [float(v) for v in row[:-1]]
                label = int(row[-1])
            except ValueError:
                rejected += 1
                continue
            if not (1 <= label <= NUM_FINE and all(math.isfinite(v) for v in f)):
                rejected += 1
                continue
            feats.append(f)
            labels.append(label)
    if not labels:
        raise DatasetFormatError(f"{path}: no usable rows")
    if rejected:
        log.warning("%s: rejected %d row(s)", path, rejected)
    ds = HierarchicalDoseDataset(np.asarray(feats), np.asarray(labels), history_size)
    ds.report = {"path": str(path), "rows": len(labels) + rejected,
                 "accepted": len(labels), "rejected": rejected}
    return ds
