"""Matplotlib rendering of the diagnostic reports to image files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .diagnostics import ClusteredCoords, JsMatrix


def _scatter_panel(ax, cc: ClusteredCoords, by: str, title: str) -> None:
    order = cc.style_order if by == "style" else cc.content_order
    labels = cc.styles if by == "style" else cc.contents
    labels = np.asarray(labels)
    cmap = plt.get_cmap("tab10" if len(order) <= 10 else "tab20")
    x = cc.coords[:, 0]
    y = cc.coords[:, 1] if cc.k > 1 else np.zeros_like(x)
    for i, name in enumerate(order):
        mask = labels == name
        ax.scatter(x[mask], y[mask], s=8, color=cmap(i % cmap.N), label=name, alpha=0.75)
    ax.set_title(title, fontsize=9)
    ax.set_xlabel("c1", fontsize=8)
    ax.set_ylabel("c2", fontsize=8)
    ax.tick_params(labelsize=7)
    ax.legend(fontsize=6, markerscale=1.2, loc="best", framealpha=0.6)


def save_coords_scatter(cc_raw: ClusteredCoords, cc_norm: ClusteredCoords, path) -> None:
    """Top-2 coordinates, raw and content-normalized, colored both ways."""
    fig, axes = plt.subplots(2, 2, figsize=(9, 8))
    _scatter_panel(axes[0, 0], cc_raw, "content", "raw, by content")
    _scatter_panel(axes[0, 1], cc_raw, "style", "raw, by style")
    _scatter_panel(axes[1, 0], cc_norm, "content", "normalized, by content")
    _scatter_panel(axes[1, 1], cc_norm, "style", "normalized, by style")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_js_heatmap(matrix: JsMatrix, path) -> None:
    m = len(matrix.labels)
    fig, ax = plt.subplots(figsize=(1.0 + 0.8 * m, 0.8 + 0.8 * m))
    image = ax.imshow(matrix.values, vmin=0.0, vmax=1.0, cmap="viridis")
    ax.set_xticks(range(m), matrix.labels, rotation=45, ha="right", fontsize=7)
    ax.set_yticks(range(m), matrix.labels, fontsize=7)
    for i in range(m):
        for j in range(m):
            value = matrix.values[i, j]
            ax.text(j, i, f"{value:.2f}", ha="center", va="center", fontsize=6,
                    color="white" if value < 0.5 else "black")
    fig.colorbar(image, ax=ax, shrink=0.8)
    ax.set_title("Jensen-Shannon distance between style clusters", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
