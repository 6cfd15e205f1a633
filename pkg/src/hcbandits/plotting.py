"""Matplotlib figures for aggregated results, written straight to files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

LABELS = {
    "ucb": "UCB", "hucb": "HUCB", "ucbc": "UCBC", "hucbc": "HUCBC",
    "hucbc_prime": "HUCBC'", "meta": "META", "linucb": "LINUCB",
    "hlinucb": "HLINUCB", "linucbc": "LINUCBC", "hlinucbc": "HLINUCBC",
    "random": "random", "oracle": "oracle",
}

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "hcbandits",  # stable element ids between runs
}


def _save(fig, path):
    path = Path(path)
    try:
        fig.savefig(path, format=path.suffix.lstrip(".") or "svg", bbox_inches="tight",
                    metadata={"Date": None} if path.suffix == ".svg" else None)
    except OSError as exc:
        raise OSError(f"cannot write figure {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path


def plot_per_round_reward(result, path, title=None, band=True):
    """Mean per-round reward per policy with a +-1 standard deviation band."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        for p in result.policies:
            m = result.mean_per_round_reward[p]
            s = result.std_per_round_reward[p]
            t = np.arange(1, len(m) + 1)
            (line,) = ax.plot(t, m, lw=1.2, label=LABELS.get(p, p))
            if band:
                ax.fill_between(t, m - s, m + s, color=line.get_color(), alpha=0.2, lw=0)
        ax.set_xlabel("round")
        ax.set_ylabel("per-round reward")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False, loc="lower right")
        return _save(fig, path)


def plot_meta_fraction(result, path):
    """Fraction of rounds in which META delegated to its clustering sub-policy."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.5, 2.4))
        for p, frac in result.meta_fraction.items():
            ax.plot(np.arange(1, len(frac) + 1), frac, lw=1.2, label=LABELS.get(p, p))
        ax.axhline(0.5, color="0.6", lw=0.8, ls=":")
        ax.set_ylim(0, 1)
        ax.set_xlabel("round")
        ax.set_ylabel("share of clustered sub-policy")
        return _save(fig, path)


def plot_radius_sweep(values: dict, path):
    """Bar chart of normalised terminal reward, ``values[(eps, policy)] = (mean, std)``."""
    eps = sorted({e for e, _ in values})
    pols = sorted({p for _, p in values})
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        w = 0.8 / len(pols)
        for j, p in enumerate(pols):
            m = [values[(e, p)][0] for e in eps]
            s = [values[(e, p)][1] for e in eps]
            ax.bar(np.arange(len(eps)) + j * w, m, w, yerr=s, label=LABELS.get(p, p))
        ax.set_xticks(np.arange(len(eps)) + 0.4 - w / 2)
        ax.set_xticklabels([f"eps={e:g}" for e in eps])
        ax.set_ylabel("normalised per-round reward")
        ax.legend(frameon=False)
        return _save(fig, path)
