"""Figure rendering for the report paths.

Every CLI command that writes delimited output can also drop matplotlib
figures next to it.  All functions take data plus a target path, render
with the Agg backend and return the path; nothing here touches global
pyplot state beyond the figure being drawn.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_DPI = 140


def _finish(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return path


def cdf_comparison(samples, reference_cdf, ref_label, title, path):
    """Empirical cdf of the samples against a reference law."""
    x = np.sort(np.asarray(samples, dtype=float))
    ecdf = np.arange(1, x.size + 1) / x.size
    grid = np.linspace(x[0], x[-1], 400)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.step(x, ecdf, where="post", lw=1.2, label="empirical")
    ax.plot(grid, reference_cdf(grid), "k--", lw=1.2, label=ref_label)
    ax.set_xlabel("value")
    ax.set_ylabel("cdf")
    ax.set_title(title)
    ax.legend(frameon=False)
    return _finish(fig, path)


def trend(ts, probs, u, title, path):
    """Tail probability P(phi_t <= u) along the time grid."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(ts, probs, "o-", lw=1.2)
    ax.set_yscale("symlog", linthresh=1e-4)
    ax.set_xlabel("t")
    ax.set_ylabel(f"P(phi_t <= {u:g})")
    ax.set_title(title)
    return _finish(fig, path)


def grid_functions(curves: dict, title, path, ylabel="value"):
    """Overlay named grid functions (t, values)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, gf in curves.items():
        ax.plot(gf.times(), gf.values, lw=1.2, label=label)
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(frameon=False, fontsize=8)
    return _finish(fig, path)


def limit_cross_validation(thresholds, limits, ses, directs, direct_ses,
                           mode, path):
    """Renewal limits (with errors) against direct long-run estimates."""
    thresholds = np.asarray(thresholds, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(thresholds - 0.004, limits, yerr=np.asarray(ses) * 3,
                fmt="o", capsize=3, label="renewal limit (3 se)")
    ax.errorbar(thresholds + 0.004, directs, yerr=np.asarray(direct_ses) * 3,
                fmt="s", capsize=3, label="direct simulation (3 se)")
    ax.set_xlabel("threshold")
    ax.set_ylabel("limit probability")
    ax.set_title(f"{mode} limit law: renewal vs direct")
    ax.legend(frameon=False)
    return _finish(fig, path)


def dominance(max_f1, max_fr, path):
    """Empirical cdfs of the coupled maxima."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, data in (("max F1 (r=1 law)", max_f1), ("max Fr", max_fr)):
        x = np.sort(np.asarray(data, dtype=float))
        ax.step(x, np.arange(1, x.size + 1) / x.size, where="post",
                lw=1.2, label=label)
    ax.set_xlabel("maximal fitness at t_max")
    ax.set_ylabel("cdf")
    ax.set_title("stochastic dominance of the coupled maxima")
    ax.legend(frameon=False)
    return _finish(fig, path)


def growth(diags, path):
    """Scaled count plateau and the hit-time ladder for a few replicates."""
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for d in diags[:20]:
        axes[0].plot(d.t_grid, d.scaled, lw=0.6, alpha=0.6)
        axes[1].plot(d.levels, d.zeta, "o-", lw=0.6, ms=2, alpha=0.6)
    axes[0].set_xlabel("t")
    axes[0].set_ylabel("N(t) exp(-(lam-1) t)")
    axes[0].set_title("scaled count plateau")
    axes[1].set_xscale("log", base=2)
    axes[1].set_xlabel("level n")
    axes[1].set_ylabel("zeta(n)")
    axes[1].set_title("hit-time centering")
    return _finish(fig, path)


def stationary_bars(counts, pmf_values, path):
    """Observed count histogram against the log-series pmf."""
    counts = np.asarray(counts, dtype=float)
    n = np.arange(1, counts.size + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(n, counts / counts.sum(), width=0.8, alpha=0.6, label="observed")
    ax.plot(n, pmf_values, "k.-", lw=1.0, label="log-series pmf")
    ax.set_yscale("log")
    ax.set_xlabel("population size")
    ax.set_ylabel("frequency")
    ax.set_title("stationary law")
    ax.legend(frameon=False)
    return _finish(fig, path)


def observation_summary(times, summary, path):
    """Mean count / fitness / age across replicas over time."""
    fig, axes = plt.subplots(1, 3, figsize=(12, 3.6))
    for ax, key, label in zip(axes, ("x", "phi", "age"),
                              ("population", "maximal fitness", "age of fittest")):
        mean = [summary[t][key]["mean"] for t in times]
        q10 = [summary[t][key]["q10"] for t in times]
        q90 = [summary[t][key]["q90"] for t in times]
        ax.plot(times, mean, lw=1.4)
        ax.fill_between(times, q10, q90, alpha=0.25)
        ax.set_xlabel("t")
        ax.set_title(label)
    return _finish(fig, path)


def age_quantiles(ts, quantiles, path):
    """Exploratory age-quantile trajectories for the open-conjecture runs."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for q, values in quantiles.items():
        ax.plot(ts, values, "o-", lw=1.2, label=f"q{int(q * 100)}")
    ax.set_xlabel("t")
    ax.set_ylabel("age of the fittest")
    ax.set_title("age quantiles over time (exploratory)")
    ax.legend(frameon=False)
    return _finish(fig, path)
