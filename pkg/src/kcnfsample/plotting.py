"""Figures for verify and bench reports, written straight to files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def plot_solution_histogram(counts: np.ndarray, runs: int, path, title: str = "") -> Path:
    """Empirical frequency per solution against the uniform level."""
    counts = np.asarray(counts, dtype=float)
    fig, ax = plt.subplots(figsize=(7, 3.2))
    x = np.arange(len(counts))
    ax.bar(x, counts / max(runs, 1), width=0.9, color="#4C72B0")
    if len(counts):
        u = 1.0 / len(counts)
        se = np.sqrt(u * (1 - u) / max(runs, 1))
        ax.axhline(u, color="k", lw=1)
        ax.axhspan(u - 3 * se, u + 3 * se, color="0.85", zorder=0)
    ax.set_xlabel("solution (lexicographic index)")
    ax.set_ylabel("frequency")
    ax.set_title(title or "sampled solutions vs uniform")
    return _save(fig, path)


def plot_depth_histogram(depth_hist: dict, path, bound: int | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    keys = sorted(int(k) for k in depth_hist)
    ax.bar(keys, [depth_hist[k] if k in depth_hist else depth_hist[str(k)] for k in keys], color="#55A868")
    if bound is not None:
        ax.axvline(bound, color="r", ls="--", label="s*k + 1")
        ax.legend()
    ax.set_xlabel("max recursion depth per run")
    ax.set_ylabel("runs")
    return _save(fig, path)


def plot_halt_curve(s_values, halt_rates, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(list(s_values), list(halt_rates), marker="o")
    ax.set_xlabel("truncation size s")
    ax.set_ylabel("halt rate")
    ax.set_ylim(-0.02, 1.02)
    return _save(fig, path)


def plot_scaling(ns, median_times, path) -> Path:
    ns = np.asarray(ns, dtype=float)
    t = np.asarray(median_times, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.loglog(ns, t, marker="o", label="median wall time")
    if len(ns) and t[0] > 0:
        ax.loglog(ns, t[0] * ns / ns[0], ls="--", color="0.5", label="linear")
    ax.set_xlabel("n")
    ax.set_ylabel("seconds per sample")
    ax.legend()
    return _save(fig, path)
