"""SVG line charts for sweep results and degree distributions.

Output is byte-stable: fixed hash salt, no date metadata.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_RC = {"svg.hashsalt": "likeddr", "svg.fonttype": "path"}


def _save(fig, path):
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_sweep(series, path, xlabel="users", title=None):
    """One line per series; ``series`` maps name -> [(x, mean r), ...]."""
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        for name in sorted(series):
            pts = series[name]
            style = "--" if name == "baseline" else "-"
            ax.plot([p[0] for p in pts], [p[1] for p in pts], style, marker="o", label=name)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("mean Pearson r")
        if title:
            ax.set_title(title)
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
        fig.tight_layout()
    _save(fig, path)


def plot_degrees(user_hist, entity_hist, path):
    """Log-log histogram of user and entity degrees."""
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        for hist, name in ((user_hist, "users"), (entity_hist, "entities")):
            mids = [(lo * hi) ** 0.5 for lo, hi in zip(hist.edges[:-1], hist.edges[1:])]
            keep = [i for i, c in enumerate(hist.counts) if c > 0]
            ax.loglog([mids[i] for i in keep], [hist.counts[i] for i in keep], marker="o", label=name)
        ax.set_xlabel("number of likes")
        ax.set_ylabel("count")
        ax.legend()
        fig.tight_layout()
    _save(fig, path)
