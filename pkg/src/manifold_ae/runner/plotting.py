"""Scatter figures for experiment reports, written as SVG.

Output is byte-stable for fixed inputs: the SVG id salt is pinned and the
date metadata dropped.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

COLORS = ["tab:blue", "tab:red", "tab:green", "tab:purple", "tab:orange", "tab:brown"]
MARKERS = ["o", "x", "^", "s", "v", "D"]

STYLE = {
    "svg.hashsalt": "manifold-ae",
    "svg.fonttype": "path",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "figure.dpi": 100,
}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)


def projections(path, coords, component_id, title, lines=False):
    """Orthographic xy and xz views of points in R^3, coloured by component."""
    coords = np.asarray(coords)
    component_id = np.asarray(component_id)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, 2, figsize=(9, 4.2))
        for ax, (i, j, lab) in zip(axes, [(0, 1, ("x", "y")), (0, 2, ("x", "z"))]):
            for c in np.unique(component_id):
                pts = coords[component_id == c]
                color = COLORS[c % len(COLORS)]
                if lines:
                    ax.plot(pts[:, i], pts[:, j], ".", ms=2, color=color, label=f"component {c}")
                else:
                    ax.scatter(pts[:, i], pts[:, j], s=4, color=color, label=f"component {c}")
            ax.set_xlabel(lab[0])
            ax.set_ylabel(lab[1])
            ax.set_aspect("equal", adjustable="datalim")
        axes[0].legend(loc="upper right", fontsize=8)
        fig.suptitle(title)
        _save(fig, path)


def bottleneck(path, latent, component_id):
    """1-d latent codes on a strip (2-d codes as a plain scatter)."""
    latent = np.asarray(latent)
    component_id = np.asarray(component_id)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(8, 2.6) if latent.shape[1] == 1 else (5, 5))
        for c in np.unique(component_id):
            u = latent[component_id == c]
            y = np.zeros(len(u)) if u.shape[1] == 1 else u[:, 1]
            ax.scatter(u[:, 0], y, s=14, marker=MARKERS[c % len(MARKERS)],
                       color=COLORS[c % len(COLORS)], label=f"component {c}")
        ax.set_xlabel("encoded dimension" if latent.shape[1] == 1 else "u0")
        if latent.shape[1] == 1:
            ax.set_yticks([])
        else:
            ax.set_ylabel("u1")
        ax.set_title("Bottleneck points")
        ax.legend(fontsize=8)
        _save(fig, path)


def loss_curve(path, history):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.semilogy(np.arange(1, len(history) + 1), history, lw=1)
        ax.set_xlabel("epoch")
        ax.set_ylabel("mean squared error")
        _save(fig, path)
