"""Seeded experiment runner: repeated trials, regret and per-round-reward
curves, aggregation, CSV/figure output and run manifests.

Random streams are derived from the run seed as ``(seed, (purpose, trial))``
with purposes ``0`` environment, ``1`` history, ``2`` online draws, ``3``
dataset fixture and ``4`` randomised baselines. With ``resample_env='fixed'``
the synthetic environment stream uses trial 0 for every trial; history,
dataset splits and shuffles are always drawn per trial.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import classical, contextual
from .core import RNG_ALGORITHM, RngStream
from .environments import (SyntheticClassicalSpec, SyntheticContextualSpec, dose_fixture,
                           gen_classical, gen_contextual, gen_history_classical,
                           gen_history_contextual, latency_fixture, load_dose, load_latency)
from .environments.datasets import HierarchicalDoseDataset, LatencyDataset
from .meta import MetaPolicy

log = logging.getLogger(__name__)

SYNTHETIC_CLASSICAL = "synthetic-classical"
SYNTHETIC_CONTEXTUAL = "synthetic-contextual"
LATENCY = "latency"
DOSE = "dose"
ENVIRONMENTS = (SYNTHETIC_CLASSICAL, SYNTHETIC_CONTEXTUAL, LATENCY, DOSE)
CONTEXTUAL_ENVS = (SYNTHETIC_CONTEXTUAL, DOSE)

META = "meta"
RANDOM = "random"
ORACLE = "oracle"

ENV_STREAM, HISTORY_STREAM, ONLINE_STREAM, FIXTURE_STREAM, BASELINE_STREAM = range(5)

CSV_HEADER = ["policy", "round", "mean_per_round_reward", "std_per_round_reward", "mean_cum_regret"]


class ExperimentError(RuntimeError):
    """A trial failed; ``partial`` holds the aggregate of completed trials."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass
class ExperimentConfig:
    env: str = SYNTHETIC_CLASSICAL
    policies: tuple = (classical.UCB, classical.HUCB, classical.UCBC, classical.HUCBC, META)
    rounds: int = 10_000
    trials: int = 20
    seed: int = 42
    alpha: float = 1.0
    epsilon: float = 0.1
    cluster_mode: str = "quintile"
    history_size: int | None = None
    data: str | None = None
    resample_env: str = "per-trial"
    share_feedback: bool = False
    workers: int = 1
    out: str | None = None

    def __post_init__(self):
        self.policies = tuple(p.strip().lower() for p in self.policies)
        self.validate()

    def validate(self) -> None:
        if self.env not in ENVIRONMENTS:
            raise ValueError(f"unknown environment {self.env!r}")
        if self.rounds < 1 or self.trials < 1:
            raise ValueError("rounds and trials must be >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.resample_env not in ("per-trial", "fixed"):
            raise ValueError(f"unknown resample mode {self.resample_env!r}")
        if not self.policies:
            raise ValueError("no policies given")
        allowed = set(contextual.KINDS if self.is_contextual else classical.KINDS)
        allowed |= {META, RANDOM, ORACLE}
        for p in self.policies:
            if p not in allowed:
                kind = "contextual" if self.is_contextual else "classical"
                raise ValueError(f"policy {p!r} is not available for the {kind} environment {self.env}")
        if len(set(self.policies)) != len(self.policies):
            raise ValueError("duplicate policy names")

    @property
    def is_contextual(self) -> bool:
        return self.env in CONTEXTUAL_ENVS

    def effective_history_size(self) -> int | None:
        if self.history_size is not None:
            return self.history_size
        return {LATENCY: 200, DOSE: 1500}.get(self.env)

    def config_hash(self) -> str:
        d = asdict(self)
        d.pop("workers")
        d.pop("out")
        blob = json.dumps(d, sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class RegretCurve:
    """Per-round record of one policy in one trial."""

    policy: str
    arms: np.ndarray
    rewards: np.ndarray
    instantaneous_regret: np.ndarray
    best_expected: np.ndarray
    meta_choices: np.ndarray | None = None

    @property
    def rounds(self) -> int:
        return len(self.arms)

    @property
    def cumulative_regret(self) -> np.ndarray:
        return np.cumsum(self.instantaneous_regret)

    @property
    def cumulative_reward(self) -> np.ndarray:
        return np.cumsum(self.rewards)

    @property
    def per_round_reward(self) -> np.ndarray:
        return self.cumulative_reward / np.arange(1, self.rounds + 1)

    @property
    def realized_regret(self) -> np.ndarray:
        """Cumulative gap between the best expected and the realised reward."""
        return np.cumsum(self.best_expected - self.rewards)

    def plays(self, num_arms: int) -> np.ndarray:
        return np.bincount(self.arms, minlength=num_arms)


@dataclass
class TrialResult:
    index: int
    curves: dict
    info: dict


@dataclass
class AggregateResult:
    """Pointwise mean/std across trials, per policy (arrays of length T)."""

    policies: list
    mean_per_round_reward: dict
    std_per_round_reward: dict
    mean_cum_regret: dict
    terminal_per_round_reward: dict = field(default_factory=dict)
    terminal_cum_regret: dict = field(default_factory=dict)
    terminal_normalized_reward: dict = field(default_factory=dict)
    meta_fraction: dict = field(default_factory=dict)
    trial_info: list = field(default_factory=list)
    dataset: dict | None = None
    complete: bool = True

    @property
    def rounds(self) -> int:
        if not self.policies:
            return 0
        return len(self.mean_per_round_reward[self.policies[0]])

    @property
    def trials(self) -> int:
        if not self.policies or not self.terminal_per_round_reward:
            return 0
        return len(self.terminal_per_round_reward[self.policies[0]])

    @classmethod
    def empty(cls) -> "AggregateResult":
        return cls([], {}, {}, {})


# ---------------------------------------------------------------------------
# policies


class RandomPolicy:
    """Uniformly random arm each round (reference baseline)."""

    def __init__(self, num_arms: int, rng: np.random.Generator, contextual=False):
        self.num_arms = num_arms
        self.rng = rng
        self.contextual = contextual

    def select(self, x=None) -> int:
        return int(self.rng.integers(self.num_arms))

    def update(self, arm, reward, x=None) -> None:
        pass


class OraclePolicy:
    """Plays the episode's best arm for the current round (reference)."""

    def __init__(self, episode, contextual=False):
        self.episode = episode
        self.t = 0
        self.contextual = contextual

    def select(self, x=None) -> int:
        return self.episode.best(self.t)[0]

    def update(self, arm, reward, x=None) -> None:
        self.t += 1


def make_policy(name: str, setup: "TrialSetup", config: ExperimentConfig, episode, trial: int):
    env = setup.env
    if name == RANDOM:
        rng = RngStream(config.seed, (BASELINE_STREAM, trial)).generator()
        return RandomPolicy(env.num_arms, rng, env.contextual)
    if name == ORACLE:
        return OraclePolicy(episode, env.contextual)
    if name == META:
        if env.contextual:
            a, b = contextual.HLINUCBC, contextual.HLINUCB
        else:
            a, b = classical.HUCBC, classical.HUCB
        return MetaPolicy(make_policy(a, setup, config, episode, trial),
                          make_policy(b, setup, config, episode, trial),
                          env.reward_range, config.share_feedback)
    if env.contextual:
        return contextual.ContextualPolicy(name, env.map, env.d, setup.history,
                                           alpha=config.alpha)
    return classical.ClassicalPolicy(name, env.map, setup.history)


# ---------------------------------------------------------------------------
# trials


@dataclass
class TrialSetup:
    env: object
    history: list


def load_dataset(config: ExperimentConfig):
    """Load the configured dataset, or synthesise a fixture from the seed."""
    h = config.effective_history_size()
    if config.env == LATENCY:
        if config.data:
            return load_latency(config.data, config.cluster_mode, h)
        rng = RngStream(config.seed, (FIXTURE_STREAM,)).generator()
        ids, domains, traces = latency_fixture(rng)
        ds = LatencyDataset(ids, domains, traces, config.cluster_mode, h)
        ds.report = {"path": None, "fixture": "latency_fixture", "sources": len(ids),
                     "readings": int(sum(len(t) for t in traces)),
                     "latency_min": ds.latency_min, "latency_max": ds.latency_max}
        return ds
    if config.env == DOSE:
        if config.data:
            return load_dose(config.data, h)
        rng = RngStream(config.seed, (FIXTURE_STREAM,)).generator()
        X, y = dose_fixture(rng)
        ds = HierarchicalDoseDataset(X, y, h)
        ds.report = {"path": None, "fixture": "dose_fixture", "accepted": len(y), "rejected": 0}
        return ds
    return None


def build_trial(config: ExperimentConfig, trial: int, dataset=None) -> TrialSetup:
    env_trial = trial if config.resample_env == "per-trial" else 0
    env_rng = RngStream(config.seed, (ENV_STREAM, env_trial)).generator()
    hist_rng = RngStream(config.seed, (HISTORY_STREAM, trial)).generator()
    if config.env == SYNTHETIC_CLASSICAL:
        spec = SyntheticClassicalSpec()
        env = gen_classical(spec, env_rng)
        return TrialSetup(env, gen_history_classical(env, spec.history_fraction,
                                                     spec.history_mean, hist_rng))
    if config.env == SYNTHETIC_CONTEXTUAL:
        spec = SyntheticContextualSpec(epsilon=config.epsilon)
        env = gen_contextual(spec, env_rng)
        return TrialSetup(env, gen_history_contextual(spec, env, hist_rng))
    if dataset is None:
        dataset = load_dataset(config)
    if config.env == LATENCY:
        env = dataset.environment(hist_rng, config.cluster_mode, config.effective_history_size())
        return TrialSetup(env, env.history)
    env = dataset.environment(hist_rng, config.effective_history_size())
    return TrialSetup(env, env.arm_seeds)


def run_policy(policy, episode, T: int, name: str = "") -> RegretCurve:
    """Drive ``policy`` for ``T`` rounds of ``episode``."""
    arms = np.empty(T, dtype=np.intp)
    rewards = np.empty(T)
    regret = np.empty(T)
    best = np.empty(T)
    is_meta = isinstance(policy, MetaPolicy)
    choices = np.empty(T, dtype=np.int8) if is_meta else None
    for t in range(T):
        x = episode.context(t)
        k = policy.select(x)
        if is_meta:
            choices[t] = policy.last_sub
        r = episode.pull(t, k)
        policy.update(k, r, x)
        _, b = episode.best(t)
        arms[t] = k
        rewards[t] = r
        best[t] = b
        regret[t] = b - episode.expected(t, k)
    return RegretCurve(name, arms, rewards, regret, best, choices)


def run_trial(config: ExperimentConfig, trial_index: int, dataset=None) -> TrialResult:
    """Run every configured policy once on the trial's environment.

    All policies replay the same episode stream (common random numbers).
    Datasets shorter than ``config.rounds`` truncate the run; the flag is
    recorded in ``info['truncated']``.
    """
    setup = build_trial(config, trial_index, dataset)
    env = setup.env
    T = config.rounds
    avail = getattr(env, "rounds_available", None)
    truncated = avail is not None and avail < T
    if truncated:
        log.warning("trial %d: dataset has %d online rounds < %d requested", trial_index, avail, T)
        T = avail
    curves, info = {}, {"trial": trial_index, "rounds": T, "truncated": truncated,
                        "environment": env.manifest(), "policies": {}}
    for name in config.policies:
        episode = env.episode(RngStream(config.seed, (ONLINE_STREAM, trial_index)).generator(), T)
        policy = make_policy(name, setup, config, episode, trial_index)
        curve = run_policy(policy, episode, T, name)
        curves[name] = curve
        pinfo = {"terminal_cum_regret": float(curve.cumulative_regret[-1]),
                 "terminal_realized_regret": float(curve.realized_regret[-1]),
                 "terminal_per_round_reward": float(curve.per_round_reward[-1])}
        if hasattr(episode, "clipped"):
            pinfo["clipped_rewards"] = episode.clipped
            pinfo["clip_rate"] = episode.clipped / T
        if hasattr(episode, "wraps"):
            pinfo["trace_wraps"] = episode.wraps
        if isinstance(policy, MetaPolicy):
            pinfo["meta_plays"] = policy.play_counts().tolist()
            pinfo["meta_clamped"] = policy.clamped
        info["policies"][name] = pinfo
    return TrialResult(trial_index, curves, info)


def _run_trial_job(args):
    config, trial, dataset = args
    return run_trial(config, trial, dataset)


def aggregate(results, policies) -> AggregateResult:
    """Pointwise mean and (population) standard deviation across trials."""
    if not results:
        return AggregateResult.empty()
    T = min(r.info["rounds"] for r in results)
    out = AggregateResult(list(policies), {}, {}, {})
    for p in policies:
        prr = np.stack([r.curves[p].per_round_reward[:T] for r in results])
        reg = np.stack([r.curves[p].cumulative_regret[:T] for r in results])
        # shift by the first trial so identical trials give exactly zero spread
        dev = prr - prr[0]
        out.mean_per_round_reward[p] = prr[0] + dev.mean(axis=0)
        out.std_per_round_reward[p] = dev.std(axis=0)
        out.mean_cum_regret[p] = reg.mean(axis=0)
        out.terminal_per_round_reward[p] = prr[:, -1].copy()
        out.terminal_cum_regret[p] = reg[:, -1].copy()
        opt = np.array([r.curves[p].best_expected[:T].mean() for r in results])
        out.terminal_normalized_reward[p] = prr[:, -1] / opt
        choices = [r.curves[p].meta_choices for r in results]
        if choices[0] is not None:
            frac = np.stack([np.cumsum(c[:T] == 0) / np.arange(1, T + 1) for c in choices])
            out.meta_fraction[p] = frac.mean(axis=0)
    out.trial_info = [r.info for r in results]
    return out


def run_experiment(config: ExperimentConfig, dataset=None) -> AggregateResult:
    """Run ``config.trials`` independent trials and aggregate them in trial
    order; the result does not depend on ``workers``."""
    if dataset is None:
        dataset = load_dataset(config)
    jobs = [(config, i, dataset) for i in range(config.trials)]
    results = []
    try:
        if config.workers > 1:
            with ProcessPoolExecutor(config.workers) as pool:
                for r in pool.map(_run_trial_job, jobs):
                    results.append(r)
        else:
            for job in jobs:
                results.append(_run_trial_job(job))
    except Exception as exc:
        partial = aggregate(results, config.policies)
        partial.complete = False
        if config.out:
            write_outputs(partial, config, dataset)
        raise ExperimentError(f"trial {len(results)} failed: {exc}", partial) from exc
    result = aggregate(results, config.policies)
    if dataset is not None:
        result.dataset = dataset.report
    return result


# ---------------------------------------------------------------------------
# output


def emit_csv(result: AggregateResult, path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for p in result.policies:
                m = result.mean_per_round_reward[p]
                s = result.std_per_round_reward[p]
                c = result.mean_cum_regret[p]
                for t in range(len(m)):
                    w.writerow([p, t + 1, repr(float(m[t])), repr(float(s[t])), repr(float(c[t]))])
    except OSError as exc:
        raise OSError(f"cannot write results CSV {path}: {exc}") from exc
    return path


def read_csv(path) -> AggregateResult:
    """Inverse of :func:`emit_csv` (the curves only)."""
    rows = {}
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        for p, t, m, s, c in reader:
            rows.setdefault(p, []).append((int(t), float(m), float(s), float(c)))
    out = AggregateResult(list(rows), {}, {}, {})
    for p, vals in rows.items():
        vals.sort()
        arr = np.array([v[1:] for v in vals])
        out.mean_per_round_reward[p] = arr[:, 0]
        out.std_per_round_reward[p] = arr[:, 1]
        out.mean_cum_regret[p] = arr[:, 2]
    return out


def emit_svg(result: AggregateResult, path, title: str | None = None) -> Path:
    from .plotting import plot_per_round_reward
    return plot_per_round_reward(result, path, title=title)


def build_manifest(result: AggregateResult, config: ExperimentConfig, dataset=None) -> dict:
    env_rates = [pi.get("clip_rate") for info in result.trial_info
                 for pi in info.get("policies", {}).values() if "clip_rate" in pi]
    manifest = {
        "config": {**asdict(config), "policies": list(config.policies)},
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "rng": RNG_ALGORITHM,
        "streams": {"environment": [ENV_STREAM, "trial" if config.resample_env == "per-trial" else 0],
                    "history": [HISTORY_STREAM, "trial"], "online": [ONLINE_STREAM, "trial"],
                    "fixture": [FIXTURE_STREAM], "baseline": [BASELINE_STREAM, "trial"]},
        "complete": result.complete,
        "trials_completed": result.trials,
        "rounds": result.rounds,
        "truncated": any(i.get("truncated", False) for i in result.trial_info),
        "dataset": result.dataset or getattr(dataset, "report", None),
        "clip_rate": ({"mean": float(np.mean(env_rates)), "max": float(np.max(env_rates))}
                      if env_rates else None),
        "terminal": {p: {"mean_per_round_reward": float(np.mean(v)),
                         "std_per_round_reward": float(np.std(v)),
                         "mean_cum_regret": float(np.mean(result.terminal_cum_regret[p]))}
                     for p, v in result.terminal_per_round_reward.items()},
        "trials": result.trial_info,
    }
    return manifest


def write_outputs(result: AggregateResult, config: ExperimentConfig, dataset=None) -> dict:
    """Write ``results.csv``, ``per_round_reward.svg`` (plus
    ``meta_fraction.svg`` when META ran) and ``manifest.json`` to ``config.out``."""
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"csv": emit_csv(result, out / "results.csv")}
    if result.policies:
        paths["svg"] = emit_svg(result, out / "per_round_reward.svg", title=config.env)
        if result.meta_fraction:
            from .plotting import plot_meta_fraction
            paths["meta_svg"] = plot_meta_fraction(result, out / "meta_fraction.svg")
    manifest = build_manifest(result, config, dataset)
    mpath = out / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=1, default=_json_default))
    paths["manifest"] = mpath
    return paths


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o).__name__)
