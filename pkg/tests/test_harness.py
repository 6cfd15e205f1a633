import json

import numpy as np
import pytest

from hcbandits import harness
from hcbandits.classical import HUCB, ClassicalPolicy
from hcbandits.core import ClusterMap
from hcbandits.environments import ClassicalEnvironment
from hcbandits.harness import (
    CSV_HEADER, AggregateResult, ExperimentConfig, ExperimentError, OraclePolicy, RandomPolicy,
    emit_csv, read_csv, run_experiment, run_policy, run_trial, write_outputs,
)


def small(**kw):
    base = dict(env="synthetic-classical", policies=("ucb", "hucbc", "meta"), rounds=300, trials=3, seed=5)
    base.update(kw)
    return ExperimentConfig(**base)


def two_arm_episode(T, seed=0):
    env = ClassicalEnvironment.from_means([0.9, 0.5])
    return env, env.episode(np.random.default_rng(seed), T)


def test_regret_from_play_counts():
    env, ep = two_arm_episode(10)

    class Script:
        contextual = False
        plays = [0] * 7 + [1] * 3

        def select(self, x=None):
            return self.plays.pop(0)

        def update(self, *a):
            pass

    curve = run_policy(Script(), ep, 10)
    assert curve.cumulative_regret[-1] == pytest.approx(1.2)


def test_oracle_has_no_regret():
    env, ep = two_arm_episode(500)
    curve = run_policy(OraclePolicy(ep), ep, 500)
    assert curve.cumulative_regret[-1] == 0.0


def test_random_policy_regret():
    T, reps = 200, 300
    finals = []
    for s in range(reps):
        env, ep = two_arm_episode(T, s)
        finals.append(run_policy(RandomPolicy(2, np.random.default_rng(1000 + s)), ep, T).cumulative_regret[-1])
    se = np.std(finals) / np.sqrt(reps)
    assert abs(np.mean(finals) - 0.2 * T) < 3 * se


def test_regret_decomposition():
    env = ClassicalEnvironment.from_means([0.3, 0.8, 0.55, 0.7], ClusterMap([0, 0, 1, 1]))
    ep = env.episode(np.random.default_rng(3), 2000)
    curve = run_policy(ClassicalPolicy(HUCB, env.map), ep, 2000)
    gaps = env.means.max() - env.means
    assert gaps @ curve.plays(4) == pytest.approx(curve.cumulative_regret[-1], abs=1e-9)


def test_curve_invariants():
    res = run_trial(small(), 0)
    for c in res.curves.values():
        assert np.all(np.diff(c.cumulative_regret) >= -1e-12)
        prr = c.per_round_reward
        assert np.all(prr >= c.rewards.min() - 1e-12) and np.all(prr <= c.rewards.max() + 1e-12)
        assert prr[-1] == pytest.approx(c.rewards.mean())


def test_single_trial_has_zero_std():
    res = run_experiment(small(trials=1))
    assert all(not s.any() for s in res.std_per_round_reward.values())


def test_fixed_environment_deterministic_policy_zero_std():
    # online draws differ between trials, so feed one trial in three times
    cfg = small(policies=("hucb",), resample_env="fixed")
    one = run_trial(cfg, 0)
    agg = harness.aggregate([one, one, one], cfg.policies)
    assert not agg.std_per_round_reward["hucb"].any()


def test_mean_within_trial_range():
    cfg = small()
    trials = [run_trial(cfg, i) for i in range(3)]
    agg = harness.aggregate(trials, cfg.policies)
    for p in cfg.policies:
        stack = np.stack([t.curves[p].per_round_reward for t in trials])
        m = agg.mean_per_round_reward[p]
        assert np.all(m >= stack.min(axis=0) - 1e-12) and np.all(m <= stack.max(axis=0) + 1e-12)
        assert np.all(agg.std_per_round_reward[p] >= 0)


def test_common_random_numbers_and_history_per_trial():
    cfg = small(resample_env="fixed")
    a, b = harness.build_trial(cfg, 0), harness.build_trial(cfg, 1)
    assert np.array_equal(a.env.upper, b.env.upper)
    assert [h.size for h in a.history] != [h.size for h in b.history]
    c = harness.build_trial(small(), 1)
    assert not np.array_equal(a.env.upper, c.env.upper)


def test_serial_parallel_identical_csv(tmp_path):
    serial = run_experiment(small(workers=1))
    parallel = run_experiment(small(workers=2))
    p1 = emit_csv(serial, tmp_path / "s.csv")
    p2 = emit_csv(parallel, tmp_path / "p.csv")
    assert p1.read_bytes() == p2.read_bytes()


def test_rerun_is_reproducible():
    a = run_experiment(small(trials=2))
    b = run_experiment(small(trials=2))
    for p in a.policies:
        assert np.array_equal(a.mean_cum_regret[p], b.mean_cum_regret[p])


def test_csv_empty_and_row_count(tmp_path):
    p = emit_csv(AggregateResult.empty(), tmp_path / "e.csv")
    assert p.read_text().strip() == ",".join(CSV_HEADER)
    res = run_experiment(small(rounds=3, trials=2, policies=("ucb", "hucb")))
    lines = emit_csv(res, tmp_path / "r.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + 6


def test_csv_round_trip(tmp_path):
    res = run_experiment(small())
    back = read_csv(emit_csv(res, tmp_path / "r.csv"))
    assert back.policies == res.policies
    for p in res.policies:
        for attr in ("mean_per_round_reward", "std_per_round_reward", "mean_cum_regret"):
            assert np.array_equal(getattr(back, attr)[p], getattr(res, attr)[p])


def test_csv_io_error_names_path(tmp_path):
    with pytest.raises(OSError, match="missing"):
        emit_csv(AggregateResult.empty(), tmp_path / "missing" / "r.csv")


def test_outputs_and_manifest(tmp_path):
    cfg = small(out=str(tmp_path / "run"))
    res = run_experiment(cfg)
    paths = write_outputs(res, cfg)
    for key in ("csv", "svg", "meta_svg", "manifest"):
        assert paths[key].exists() and paths[key].stat().st_size > 0
    assert paths["svg"].read_text().lstrip().startswith("<?xml")
    m = json.loads(paths["manifest"].read_text())
    assert m["seed"] == 5 and "PCG64" in m["rng"] and m["complete"]
    env = m["trials"][0]["environment"]
    assert len(env["centroids"]) == 10 and len(env["means"]) == 100
    assert m["clip_rate"] is not None
    assert "terminal_realized_regret" in m["trials"][0]["policies"]["ucb"]


def test_manifest_reconstructs_environment(tmp_path):
    cfg = small(out=str(tmp_path))
    res = run_experiment(cfg)
    m = json.loads(write_outputs(res, cfg)["manifest"].read_text())
    cfg2 = ExperimentConfig(**{**m["config"], "policies": tuple(m["config"]["policies"])})
    assert cfg2.config_hash() == m["config_hash"]
    again = run_experiment(cfg2)
    assert np.array_equal(again.mean_cum_regret["hucbc"], res.mean_cum_regret["hucbc"])


def test_failure_saves_partial(tmp_path, monkeypatch):
    real = harness.run_trial

    def flaky(config, i, dataset=None):
        if i == 2:
            raise RuntimeError("boom")
        return real(config, i, dataset)

    monkeypatch.setattr(harness, "run_trial", flaky)
    cfg = small(trials=4, out=str(tmp_path))
    with pytest.raises(ExperimentError) as info:
        run_experiment(cfg)
    assert info.value.partial.trials == 2 and not info.value.partial.complete
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["complete"] is False and m["trials_completed"] == 2


def test_dataset_truncation_flagged():
    cfg = ExperimentConfig(env="dose", policies=("linucb",), rounds=4000, trials=1)
    res = run_trial(cfg, 0)
    assert res.info["truncated"] and res.info["rounds"] == 3500
    assert res.curves["linucb"].rounds == 3500


@pytest.mark.parametrize("kw", [
    dict(rounds=0), dict(trials=0), dict(alpha=0.0), dict(env="mars"),
    dict(policies=("linucb",)), dict(resample_env="sometimes"), dict(policies=("ucb", "ucb")),
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        small(**kw)


def test_contextual_meta_and_baselines():
    cfg = ExperimentConfig(env="synthetic-contextual", policies=("hlinucb", "meta", "random", "oracle"),
                           rounds=200, trials=2)
    res = run_experiment(cfg)
    assert res.terminal_cum_regret["oracle"].max() == 0.0
    assert res.meta_fraction["meta"].shape == (200,)
    assert res.terminal_per_round_reward["oracle"].mean() > res.terminal_per_round_reward["random"].mean()
