"""Shared test utilities: independent oracles and small factories."""

from __future__ import annotations

import math

import numpy as np

import concept_lens as cl

STYLES = ["Chinese cuisine", "Japanese cuisine", "Italian cuisine",
          "Mexican cuisine", "French cuisine"]
CONTENTS = ["chicken", "beef", "tofu", "rice", "noodles", "peppers"]


def default_grid(replicates: int = 20, styles=None, contents=None,
                 baseline: str = "chicken") -> cl.PromptGrid:
    return cl.PromptGrid("food in {style} made with {content}",
                         list(contents or CONTENTS), list(styles or STYLES),
                         replicates, baseline)


def default_spec(entanglement: float = 0.0, sigma: float = 0.1, seed: int = 0,
                 dim: int = 64, styles=None, contents=None) -> cl.SyntheticModelSpec:
    return cl.SyntheticModelSpec.random(
        dim, 4, 4, list(styles or STYLES), list(contents or CONTENTS),
        entanglement_strength=entanglement, noise_sigma=sigma, seed=seed)


def max_principal_angle(rows_a: np.ndarray, rows_b: np.ndarray) -> float:
    """Largest principal angle (radians) between two row-spanned subspaces."""
    a = np.asarray(rows_a, dtype=np.float64)
    b = np.asarray(rows_b, dtype=np.float64)
    resid = a - (a @ b.T) @ b
    s = np.linalg.svd(resid, compute_uv=False)
    top = float(s[0]) if s.size else 0.0
    return float(np.arcsin(min(1.0, top)))


def naive_silhouette(points, labels) -> float:
    """Direct per-definition silhouette: double loops, no vectorization."""
    pts = [np.asarray(p, dtype=np.float64) for p in points]
    n = len(pts)

    def dist(i, j):
        return math.sqrt(float(np.sum((pts[i] - pts[j]) ** 2)))

    values = []
    for i in range(n):
        own = [j for j in range(n) if labels[j] == labels[i] and j != i]
        if not own:
            values.append(0.0)
            continue
        a = sum(dist(i, j) for j in own) / len(own)
        b = math.inf
        for other_label in sorted(set(labels)):
            if other_label == labels[i]:
                continue
            members = [j for j in range(n) if labels[j] == other_label]
            b = min(b, sum(dist(i, j) for j in members) / len(members))
        denom = max(a, b)
        values.append(0.0 if denom == 0.0 else (b - a) / denom)
    return sum(values) / n


def naive_js_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Cell-by-cell sqrt-JSD with base-2 logs over two histograms."""
    total = 0.0
    for pi, qi in zip(np.asarray(p).ravel(), np.asarray(q).ravel()):
        m = 0.5 * (pi + qi)
        if pi > 0.0:
            total += 0.5 * pi * math.log2(pi / m)
        if qi > 0.0:
            total += 0.5 * qi * math.log2(qi / m)
    return math.sqrt(max(total, 0.0))


def make_coords(coords, contents, styles, replicates=None) -> cl.ClusteredCoords:
    coords = np.asarray(coords, dtype=np.float64)
    n = coords.shape[0]
    replicates = list(replicates) if replicates is not None else list(range(n))
    style_order = list(dict.fromkeys(styles))
    content_order = list(dict.fromkeys(contents))
    return cl.ClusteredCoords(coords=coords, contents=list(contents), styles=list(styles),
                              replicates=replicates, style_order=style_order,
                              content_order=content_order)


def spearman(xs, ys) -> float:
    """Spearman rank correlation for small samples without ties."""
    def ranks(values):
        order = np.argsort(values)
        out = np.empty(len(values))
        out[order] = np.arange(len(values))
        return out

    rx, ry = ranks(np.asarray(xs)), ranks(np.asarray(ys))
    rx -= rx.mean()
    ry -= ry.mean()
    return float(np.sum(rx * ry) / math.sqrt(np.sum(rx * rx) * np.sum(ry * ry)))
