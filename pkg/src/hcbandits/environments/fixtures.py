"""Synthetic stand-ins for the latency and dose datasets (same CSV schemas).

Neither real dataset is shipped; these generators produce files of the same
shape so the loaders and experiments can run end to end.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .datasets import FINE_PER_COARSE, NUM_FINE


TIERS = ((0.945, 40.0, 80.0), (0.025, 200.0, 250.0), (0.030, 900.0, 1000.0))


def latency_fixture(rng: np.random.Generator, n_sources: int = 700, readings: int = 1300,
                    n_domains: int = 17, tiers=TIERS, shape: float = 16.0,
                    domain_layout: str = "mixed", mixed_domains: int = 2):
    """Return ``(source_ids, domains, traces)``.

    Each tier ``(share, lo, hi)`` holds that share of the sources with mean
    latency uniform on ``[lo, hi]`` ms (the last tier takes the remainder).
    Readings are the mean times a Gamma(shape)/shape factor, with reading
    counts varying by +-10%.

    ``domain_layout='mixed'`` mimics hosting organisations: the first and
    last tiers share ``mixed_domains`` large domains and the middle tiers are
    spread over the rest, so the domains holding the fast mirrors look slow
    on average while a few small domains look uniformly decent. ``'random'``
    assigns domains independently of latency.
    """
    if domain_layout not in ("mixed", "random"):
        raise ValueError(f"unknown domain layout {domain_layout!r}")
    if len(tiers) < 2:
        raise ValueError("need at least two tiers")
    sizes = [int(round(share * n_sources)) for share, _, _ in tiers[:-1]]
    sizes.append(n_sources - sum(sizes))
    if min(sizes) < 1:
        raise ValueError("every tier needs at least one source")
    tier = np.repeat(np.arange(len(tiers)), sizes)
    lo = np.array([t[1] for t in tiers])[tier]
    hi = np.array([t[2] for t in tiers])[tier]
    means = rng.uniform(lo, hi)
    dom = np.empty(n_sources, dtype=int)
    if domain_layout == "random":
        dom[:] = rng.integers(0, n_domains, size=n_sources)
        dom[rng.choice(n_sources, size=min(n_domains, n_sources), replace=False)] = np.arange(
            min(n_domains, n_sources))
    else:
        if not 0 < mixed_domains < n_domains:
            raise ValueError("mixed_domains must leave at least one other domain")
        outer = np.flatnonzero((tier == 0) | (tier == len(tiers) - 1))
        inner = np.flatnonzero((tier > 0) & (tier < len(tiers) - 1))
        for group, base, k in ((outer, 0, mixed_domains), (inner, mixed_domains, n_domains - mixed_domains)):
            dom[group] = rng.permutation(base + np.arange(len(group)) % k)
    perm = rng.permutation(n_sources)
    means, dom = means[perm], dom[perm]
    domains = [f"d{j:02d}.example.edu" for j in dom]
    counts = rng.integers(int(readings * 0.9), int(readings * 1.1) + 1, size=n_sources)
    traces = [m * rng.gamma(shape, 1.0 / shape, size=c) for m, c in zip(means, counts)]
    ids = [f"s{k:04d}" for k in range(n_sources)]
    return ids, domains, traces


def write_latency_fixture(path, rng: np.random.Generator, **kwargs) -> Path:
    path = Path(path)
    ids, domains, traces = latency_fixture(rng, **kwargs)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["source_id", "domain", "latency_ms"])
        for sid, dom, tr in zip(ids, domains, traces):
            w.writerows((sid, dom, f"{v:.3f}") for v in tr)
    return path


def dose_fixture(rng: np.random.Generator, n: int = 5000, d: int = 10,
                 coarse_spread: float = 4.0, fine_spread: float = 2.0):
    """Return ``(features, labels)`` for a 15-class problem with 3 coarse groups.

    Coarse centres are ``coarse_spread`` times a standard normal vector, fine
    centres add ``fine_spread`` times another; patients are their class
    centre plus standard normal noise. Labels are uniform over 1..15.
    """
    n_coarse = NUM_FINE // FINE_PER_COARSE
    coarse = coarse_spread * rng.standard_normal((n_coarse, d))
    fine = np.repeat(coarse, FINE_PER_COARSE, axis=0) + fine_spread * rng.standard_normal((NUM_FINE, d))
    labels = rng.integers(1, NUM_FINE + 1, size=n)
    X = fine[labels - 1] + rng.standard_normal((n, d))
    return X, labels


def write_dose_fixture(path, rng: np.random.Generator, **kwargs) -> Path:
    path = Path(path)
    X, labels = dose_fixture(rng, **kwargs)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{j + 1}" for j in range(X.shape[1])] + ["label"])
        for row, y in zip(X, labels):
            w.writerow([f"{v:.6f}" for v in row] + [int(y)])
    return path
