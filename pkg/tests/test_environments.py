import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hcbandits.contextual import HistorySeed
from hcbandits.core import ClusterMap
from hcbandits.environments import (
    CLIP, DOMAIN, QUINTILE, ClassicalEnvironment, DatasetFormatError, LatencyDataset,
    SyntheticClassicalSpec, SyntheticContextualSpec, centroid, clipped_uniform_mean, coarse_class,
    dose_fixture, gen_classical, gen_contextual, gen_history_classical, gen_history_contextual,
    latency_fixture, load_dose, load_latency, write_dose_fixture, write_latency_fixture,
)
from hcbandits.environments.synthetic import cluster_seeds


def chi_mean(k):
    return math.sqrt(2) * math.gamma((k + 1) / 2) / math.gamma(k / 2)


# ---- synthetic classical ---------------------------------------------------

def test_centroid():
    assert centroid(0.0, 2) == 0.25
    assert centroid(0.5, 1) == pytest.approx(0.75)


@pytest.mark.parametrize("lam", [0.25, 0.4])
def test_unclipped_reward_mean(lam):
    env = ClassicalEnvironment(ClusterMap.single(1), [2 * lam])
    r = env.sample(np.zeros(10**6, dtype=int), np.random.default_rng(0))
    se = r.std() / 1000
    assert abs(r.mean() - lam) < 3 * se
    assert env.means[0] == pytest.approx(lam)


def test_clipped_reward_mean():
    env = ClassicalEnvironment(ClusterMap.single(1), [1.6])
    r = env.sample(np.zeros(10**6, dtype=int), np.random.default_rng(1))
    assert r.max() <= CLIP
    assert abs(r.mean() - env.means[0]) < 3 * r.std() / 1000
    assert env.means[0] == pytest.approx(CLIP - CLIP ** 2 / 3.2)
    assert env.clip_probability[0] == pytest.approx(1 - CLIP / 1.6)


def test_clipped_mean_formula():
    assert np.allclose(clipped_uniform_mean([0.5, 1.0, 2.0], 1.0), [0.25, 0.5, 0.75])


def test_gen_classical_structure():
    spec = SyntheticClassicalSpec()
    env = gen_classical(spec, np.random.default_rng(3))
    assert env.num_arms == 100 and env.map.num_clusters == 10
    assert sorted(len(env.map.members(i)) for i in range(10)) == [10] * 10
    lam = np.array(env.constants["centroids"])
    scale = np.array(env.constants["arm_scales"])
    assert np.all((scale >= 0.9) & (scale <= 1.1))
    assert np.allclose(env.upper, 2 * scale * lam[env.map.as_array()])
    assert env.best_arm == int(np.argmax(env.means))


def test_gen_classical_deterministic():
    a = gen_classical(SyntheticClassicalSpec(), np.random.default_rng(9))
    b = gen_classical(SyntheticClassicalSpec(), np.random.default_rng(9))
    assert np.array_equal(a.upper, b.upper)
    assert a.map.assignment == b.map.assignment


def test_history_fraction():
    env = gen_classical(SyntheticClassicalSpec(), np.random.default_rng(0))
    assert all(h.size == 0 for h in gen_history_classical(env, 0.0, 10, np.random.default_rng(1)))
    h = gen_history_classical(env, 0.25, 50, np.random.default_rng(1))
    assert sum(x.size > 0 for x in h) == 25
    with pytest.raises(ValueError):
        gen_history_classical(env, 1.5, 10, np.random.default_rng(1))


def test_history_total_mean():
    env = gen_classical(SyntheticClassicalSpec(), np.random.default_rng(0))
    totals = [sum(x.size for x in gen_history_classical(env, 0.25, 10, np.random.default_rng(s)))
              for s in range(400)]
    # total is Poisson(250): sd of the mean is sqrt(250 / 400)
    assert abs(np.mean(totals) - 250) < 3 * math.sqrt(250 / 400)


def test_history_rewards_follow_arm_law():
    env = ClassicalEnvironment(ClusterMap.single(2), [0.2, 1.2])
    h = gen_history_classical(env, 1.0, 4000, np.random.default_rng(2))
    assert h[0].max() <= 0.2 and h[1].max() <= CLIP


# ---- synthetic contextual --------------------------------------------------

def test_zero_radius_clusters_are_identical():
    env = gen_contextual(SyntheticContextualSpec(epsilon=0.0), np.random.default_rng(0))
    for i in range(env.map.num_clusters):
        th = env.theta[list(env.map.members(i))]
        assert np.all(th == th[0])


def test_arm_offset_radius():
    eps = 0.8
    env = gen_contextual(SyntheticContextualSpec(num_arms=5000, epsilon=eps), np.random.default_rng(1))
    cent = np.array(env.constants["centroids"])[env.map.as_array()]
    rms = np.sqrt(np.mean(np.sum((env.theta - cent) ** 2, axis=1)))
    assert rms == pytest.approx(math.sqrt(5) * eps, rel=0.03)


def test_conditional_reward_mean():
    env = gen_contextual(SyntheticContextualSpec(), np.random.default_rng(4))
    x = np.random.default_rng(5).standard_normal(5)
    n = 10**6
    r = env.sample(np.full(n, 7), np.tile(x, (n, 1)), np.random.default_rng(6))
    mu = env.theta[7] @ x
    assert abs(r.mean() - mu) < 3 * r.std() / math.sqrt(n)


def test_negative_means_give_negative_rewards():
    env = gen_contextual(SyntheticContextualSpec(), np.random.default_rng(4))
    x = -env.theta[0]
    r = env.sample(np.zeros(100, dtype=int), np.tile(x, (100, 1)), np.random.default_rng(0))
    assert np.all(r <= 0)


def test_centroid_distances():
    rng = np.random.default_rng(7)
    d = []
    for _ in range(400):
        env = gen_contextual(SyntheticContextualSpec(num_arms=10), rng)
        c = np.array(env.constants["centroids"])
        i, j = np.triu_indices(len(c), 1)
        d.append(np.linalg.norm(c[i] - c[j], axis=1))
    d = np.concatenate(d)
    assert np.sqrt(np.mean(d ** 2)) == pytest.approx(math.sqrt(10), rel=0.02)
    assert d.mean() == pytest.approx(math.sqrt(2) * chi_mean(5), rel=0.02)


def test_episode_best_arm():
    env = gen_contextual(SyntheticContextualSpec(), np.random.default_rng(0))
    ep = env.episode(np.random.default_rng(1), 20)
    for t in range(20):
        k, v = ep.best(t)
        assert v == pytest.approx(np.max(env.theta @ ep.context(t)))
        assert ep.expected(t, k) == v


def test_empty_history_seed():
    env = gen_contextual(SyntheticContextualSpec(history_mean=0.0), np.random.default_rng(0))
    seeds = gen_history_contextual(SyntheticContextualSpec(history_mean=0.0), env, np.random.default_rng(1))
    assert all(np.array_equal(s.H, np.eye(5)) and not s.bh.any() for s in seeds)


def test_history_seed_determinants():
    spec = SyntheticContextualSpec()
    rng = np.random.default_rng(0)
    for _ in range(1000 // 100):
        env = gen_contextual(spec, rng)
        seeds = gen_history_contextual(spec, env, rng)
        for s in seeds + cluster_seeds(env.map, seeds):
            assert np.linalg.slogdet(s.H)[1] >= -1e-12


def test_cluster_seed_is_sum_plus_identity():
    spec = SyntheticContextualSpec()
    env = gen_contextual(spec, np.random.default_rng(0))
    seeds = gen_history_contextual(spec, env, np.random.default_rng(1))
    cs = cluster_seeds(env.map, seeds)
    m = list(env.map.members(3))
    assert np.allclose(cs[3].H, np.eye(5) + sum(seeds[k].H - np.eye(5) for k in m))
    assert np.allclose(cs[3].bh, sum(seeds[k].bh for k in m))


# ---- latency ---------------------------------------------------------------

def write_rows(path, rows, header="source_id,domain,latency_ms"):
    path.write_text(header + "\n" + "\n".join(rows) + "\n")
    return path


def test_quintile_bins(tmp_path):
    rows = [f"s{k},d{k % 3},{10 * (k + 1)}" for k in range(10)]
    ds = load_latency(write_rows(tmp_path / "l.csv", rows), QUINTILE)
    cmap = ds.cluster_map()
    assert [len(cmap.members(i)) for i in range(5)] == [2] * 5
    assert cmap.members(0) == (0, 1)
    assert ds.cluster_map(DOMAIN).num_clusters == 3


def test_normalization_endpoints(tmp_path):
    ds = load_latency(write_rows(tmp_path / "l.csv", ["a,x,5", "a,x,25", "b,y,45"]))
    assert np.allclose(ds.normalize([5, 45, 25]), [1.0, 0.0, 0.5])
    assert ds.report["latency_min"] == 5 and ds.report["latency_max"] == 45


def test_bad_rows_report_line(tmp_path):
    with pytest.raises(DatasetFormatError, match=":3:"):
        load_latency(write_rows(tmp_path / "l.csv", ["a,x,5", "a,x,abc"]))
    with pytest.raises(DatasetFormatError, match=":2:"):
        load_latency(write_rows(tmp_path / "l.csv", ["a,x,-1"]))
    with pytest.raises(DatasetFormatError, match=":1:"):
        load_latency(write_rows(tmp_path / "l.csv", ["a,x,5"], header="id,lat"))


def test_empty_trace_dropped(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        ds = load_latency(write_rows(tmp_path / "l.csv", ["a,x,5", "b,y,", "c,z,7"]))
    assert ds.source_ids == ["a", "c"]
    assert ds.report["dropped_sources"] == 1
    assert "dropping" in caplog.text


def test_latency_history_split():
    ids, doms, traces = latency_fixture(np.random.default_rng(0), n_sources=100, readings=50)
    ds = LatencyDataset(ids, doms, traces, QUINTILE, 200)
    env = ds.environment(np.random.default_rng(1))
    assert sum(len(h) for h in env.history) == 200
    assert sum(len(h) + len(o) for h, o in zip(env.history, env.online)) == sum(map(len, traces))
    assert np.all((env.means >= 0) & (env.means <= 1))


def test_latency_replay_wraps():
    ds = LatencyDataset(["a", "b"], ["x", "y"], [np.array([1.0, 2.0]), np.array([3.0])], QUINTILE, 0)
    env = ds.environment(np.random.default_rng(0))
    ep = env.episode(np.random.default_rng(1), 10)
    got = sorted(ep.pull(t, 0) for t in range(4))
    assert got == [0.5, 0.5, 1.0, 1.0]
    assert ep.wraps == 1


def test_latency_fixture_shape():
    ids, doms, traces = latency_fixture(np.random.default_rng(0))
    assert len(ids) == 700 and len(set(doms)) == 17
    assert 1100 < np.mean([len(t) for t in traces]) < 1500
    ids, doms, _ = latency_fixture(np.random.default_rng(0), domain_layout="random")
    assert len(set(doms)) == 17


def test_latency_fixture_round_trip(tmp_path):
    p = write_latency_fixture(tmp_path / "lat.csv", np.random.default_rng(0), n_sources=100, readings=10)
    ds = load_latency(p, DOMAIN)
    assert ds.num_sources == 100
    assert ds.report["rows"] == sum(len(t) for t in ds.traces)


# ---- dose ------------------------------------------------------------------

def test_coarse_class():
    assert coarse_class(7) == 2
    assert [coarse_class(k) for k in (1, 5, 6, 15)] == [1, 1, 2, 3]


def test_dose_split_and_rewards(tmp_path):
    p = write_dose_fixture(tmp_path / "dose.csv", np.random.default_rng(0))
    ds = load_dose(p)
    env = ds.environment(np.random.default_rng(1))
    assert env.rounds_available == 3500
    assert env.d == ds.features.shape[1] + 1
    ep = env.episode(None, 3500)
    y = int(env.y[0])
    assert ep.pull(0, y) == 1.0 and ep.pull(0, (y + 1) % 15) == 0.0
    assert sum(int(s.H[-1, -1]) - 1 for s in env.arm_seeds) == 1500


def test_dose_standardized_on_history():
    X, y = dose_fixture(np.random.default_rng(0), n=3000)
    from hcbandits.environments import HierarchicalDoseDataset
    ds = HierarchicalDoseDataset(X, y, 1000)
    rng = np.random.default_rng(2)
    env = ds.environment(rng)
    mu, sd = np.array(env.constants["feature_mean"]), np.array(env.constants["feature_std"])
    perm = np.random.default_rng(2).permutation(3000)
    hist = X[perm[:1000]]
    assert np.allclose(mu, hist.mean(axis=0)) and np.allclose(sd, hist.std(axis=0))


def test_dose_rejects_rows(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("f1,f2,label\n1,2,3\n1,,3\n1,2,16\n1,2,x\n0.5,0.1,15\n")
    ds = load_dose(p, history_size=1)
    assert ds.report["rejected"] == 3 and ds.num_patients == 2
    with pytest.raises(DatasetFormatError):
        write_rows(p, ["1,2"], header="f1,f2")
        load_dose(p)
