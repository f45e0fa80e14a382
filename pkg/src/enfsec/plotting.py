"""PNG figures written next to the CSV outputs (headless Agg backend)."""

from __future__ import annotations


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_trajectories(path, series, title=""):
    """``series`` maps a label to ``(t, omega)``."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    for label, (t, w) in series.items():
        ax.plot(t, w, lw=1.0, label=label)
    ax.set_xlabel("time (s)")
    ax.set_ylabel("frequency (pu)")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_overlay(path, t, actual, enf, title=""):
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(t, actual, lw=0.8, color="0.55", label="actual")
    ax.plot(t, enf, lw=1.4, color="tab:red", label="ENF fit")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("frequency (pu)")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def plot_inertia_bars(path, nodes, h_on, h_cri, kappa, title=""):
    """Effective vs critical inertia per node, bars coloured by the sign of kappa."""
    import numpy as np

    plt = _pyplot()
    x = np.arange(len(nodes))
    fig, ax = plt.subplots(figsize=(max(5, 0.8 * len(nodes) + 2), 4))
    colors = ["tab:green" if k > 0 else "tab:red" for k in kappa]
    ax.bar(x - 0.2, h_on, width=0.4, color=colors, label="effective inertia")
    ax.bar(x + 0.2, h_cri, width=0.4, color="0.6", label="critical inertia")
    for xi, hi, ki in zip(x, h_on, kappa):
        ax.annotate(f"{ki:+.1f}%", (xi - 0.2, hi), ha="center", va="bottom", fontsize=8)
    ax.set_xticks(x)
    ax.set_xticklabels(nodes)
    ax.set_ylabel("inertia (s)")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
