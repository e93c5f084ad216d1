"""Static figure rendering for benchmark reports.

One vector-graphics file per group: predicted mean and 95% interval against
depth, with the observed context values overlaid. Figures are batch
artifacts written next to the delimited output; there is no interactive
viewer.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def profile_figure(path, *, pred_depths, means, q025, q975,
                   obs_depths=None, obs_values=None,
                   title="", xlabel="value", group="") -> str:
    """Depth profile: value on x, depth on y (increasing downward)."""
    fig, ax = plt.subplots(figsize=(4.5, 6.0))
    order = sorted(range(len(pred_depths)), key=lambda i: pred_depths[i])
    d = [pred_depths[i] for i in order]
    m = [means[i] for i in order]
    lo = [q025[i] for i in order]
    hi = [q975[i] for i in order]
    ax.fill_betweenx(d, lo, hi, color="tab:blue", alpha=0.25,
                     label="95% interval")
    ax.plot(m, d, "o-", color="tab:blue", ms=4, lw=1.2, label="predicted mean")
    if obs_depths is not None and len(obs_depths):
        ax.plot(obs_values, obs_depths, "o", color="black", ms=4,
                mfc="none", label="observed")
    ax.invert_yaxis()
    ax.set_xlabel(xlabel)
    ax.set_ylabel("depth (m)")
    ax.set_title(title or group)
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    path = os.fspath(path)
    fig.savefig(path)
    plt.close(fig)
    return path


def rmse_bars_figure(path, groups, series: dict[str, list[float]],
                     title="RMSE by group", ylabel="RMSE") -> str:
    """Grouped bar chart comparing methods per group (borehole/parameter)."""
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    n = len(groups)
    width = 0.8 / max(1, len(series))
    for k, (name, vals) in enumerate(series.items()):
        xs = [i + k * width for i in range(n)]
        ax.bar(xs, vals, width=width, label=name)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(n)])
    ax.set_xticklabels(groups, rotation=30, ha="right")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = os.fspath(path)
    fig.savefig(path)
    plt.close(fig)
    return path
