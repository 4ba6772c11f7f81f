"""Cluster diagnostics over subspace coordinates.

A cluster is the set of samples sharing one style label. The battery:
Jensen-Shannon distances between per-style histograms, silhouette scores
before and after z-scoring within each content group, and a three-way
verdict. A large silhouette gain from per-content normalization means
content labels were dragging the style clusters around (limited causal
separability); low scores on both sides mean the subspace barely separates
styles at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dataset import MEAN, Aggregation, ScoreDataset, aggregate_vectors
from .errors import ArgumentError, DegenerateRangeError, ShapeError, ValidationError
from .subspace import ConceptSubspace

DEFAULT_BINS = 32
DEFAULT_SMOOTHING = 1e-9
_STD_FLOOR = 1e-12


@dataclass
class ClusteredCoords:
    """Per-sample subspace coordinates with their style/content labels."""

    coords: np.ndarray             # n x K, float64
    contents: list[str]
    styles: list[str]
    replicates: list[int]
    style_order: list[str]
    content_order: list[str]

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float64)
        n = self.coords.shape[0]
        if self.coords.ndim != 2 or n < 1:
            raise ValidationError("coords must be a non-empty n x K array")
        if not (len(self.contents) == len(self.styles) == len(self.replicates) == n):
            raise ValidationError("labels must parallel the coordinate rows")
        if set(self.styles) - set(self.style_order) or set(self.contents) - set(self.content_order):
            raise ValidationError("style_order/content_order must cover all labels")

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def k(self) -> int:
        return self.coords.shape[1]

    def style_indices(self) -> np.ndarray:
        index = {s: i for i, s in enumerate(self.style_order)}
        return np.array([index[s] for s in self.styles], dtype=np.intp)


def cluster_coords(ds: ScoreDataset, sub: ConceptSubspace,
                   aggregation: Aggregation = MEAN) -> ClusteredCoords:
    """Project every (aggregated) sample into the subspace, keeping labels."""
    if ds.dim != sub.dim:
        raise ShapeError(f"dataset dim {ds.dim} != subspace dim {sub.dim}")
    X, contents, styles, replicates = aggregate_vectors(ds, aggregation)
    if X.shape[0] == 0:
        raise ArgumentError("dataset has no samples to project")
    coords = (X - sub.center) @ sub.basis.T
    present_styles = set(styles)
    present_contents = set(contents)
    return ClusteredCoords(
        coords=coords, contents=contents, styles=styles, replicates=replicates,
        style_order=[s for s in ds.style_labels if s in present_styles],
        content_order=[c for c in ds.content_labels if c in present_contents])


# ---------------------------------------------------------------------------
# Jensen-Shannon distances between style clusters


@dataclass
class JsMatrix:
    """Symmetric matrix of Jensen-Shannon distances, zero diagonal, in [0, 1]."""

    labels: list[str]
    values: np.ndarray
    bins: int = DEFAULT_BINS
    smoothing: float = DEFAULT_SMOOTHING

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        m = len(self.labels)
        if self.values.shape != (m, m):
            raise ValidationError("values must be square over the labels")
        if np.max(np.abs(self.values - self.values.T)) > 0:
            raise ValidationError("values must be exactly symmetric")
        if np.any(np.diag(self.values) != 0.0):
            raise ValidationError("diagonal must be exactly zero")
        if np.any(self.values < 0.0) or np.any(self.values > 1.0):
            raise ValidationError("distances must lie in [0, 1]")


def _histogram_edges(points: np.ndarray, bins: int) -> list[np.ndarray]:
    """Shared bin edges: joint min/max per dimension, expanded 5% per side.

    A dimension with zero range (but others varying) is padded by 0.5 on each
    side so every sample lands in the central bin; if *all* dimensions are
    degenerate there is no density to estimate and we refuse.
    """
    lows = points.min(axis=0)
    highs = points.max(axis=0)
    widths = highs - lows
    if np.all(widths == 0.0):
        raise DegenerateRangeError(
            "all coordinates are identical; cannot build histograms")
    edges = []
    for lo, hi, width in zip(lows, highs, widths):
        pad = 0.05 * width if width > 0.0 else 0.5
        edges.append(np.linspace(lo - pad, hi + pad, bins + 1))
    return edges


def _style_histograms(cc: ClusteredCoords, bins: int, smoothing: float) -> list[np.ndarray]:
    use = min(cc.k, 2)
    points = cc.coords[:, :use]
    edges = _histogram_edges(points, bins)
    labels = cc.style_indices()
    out = []
    for i in range(len(cc.style_order)):
        cluster = points[labels == i]
        hist, _ = np.histogramdd(cluster, bins=edges)
        hist = hist + smoothing
        out.append(hist / hist.sum())
    return out


def jsd_base2(p: np.ndarray, q: np.ndarray) -> float:
    """Jensen-Shannon divergence with base-2 logs; 0 for identical inputs,
    at most 1."""
    m = 0.5 * (p + q)

    def half_kl(a: np.ndarray) -> float:
        mask = a > 0.0
        return float(np.sum(a[mask] * np.log2(a[mask] / m[mask])))

    return 0.5 * half_kl(p) + 0.5 * half_kl(q)


def js_distance_matrix(cc: ClusteredCoords, bins: int = DEFAULT_BINS,
                       smoothing: float = DEFAULT_SMOOTHING) -> JsMatrix:
    """Pairwise sqrt-JSD between per-style histograms of the top-2 coordinates.

    Datasets with K=1 fall back to 1-D histograms. All clusters share the
    same bin edges, so the entries form a proper metric on the histogram
    representations.
    """
    if len(cc.style_order) < 2:
        raise ArgumentError("need at least 2 styles for a distance matrix")
    if bins < 1:
        raise ArgumentError(f"bins must be >= 1, got {bins}")
    if smoothing < 0.0:
        raise ArgumentError(f"smoothing must be >= 0, got {smoothing}")
    hists = _style_histograms(cc, bins, smoothing)
    m = len(hists)
    values = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            dist = float(np.sqrt(max(jsd_base2(hists[i], hists[j]), 0.0)))
            values[i, j] = values[j, i] = min(dist, 1.0)
    return JsMatrix(labels=list(cc.style_order), values=values,
                    bins=bins, smoothing=smoothing)


# ---------------------------------------------------------------------------
# Silhouette


def _select_dims(cc: ClusteredCoords, dims: str) -> np.ndarray:
    if dims == "all":
        return cc.coords
    if dims == "top2":
        return cc.coords[:, :min(cc.k, 2)]
    raise ArgumentError(f"dims must be 'all' or 'top2', got {dims!r}")


def silhouette(cc: ClusteredCoords, label_kind: str = "style", *,
               dims: str = "all") -> float:
    """Mean silhouette of the style clustering under Euclidean distance.

    Per sample: s = (b - a) / max(a, b), where a is the mean distance to the
    sample's own cluster (excluding itself) and b the smallest mean distance
    to any other cluster. Samples in singleton clusters contribute 0.
    """
    if label_kind != "style":
        raise ArgumentError("only style-labeled silhouettes are supported")
    m = len(cc.style_order)
    if m < 2:
        raise ArgumentError("silhouette needs at least 2 style clusters")
    if cc.n < 2:
        raise ArgumentError("silhouette needs at least 2 samples")
    pts = _select_dims(cc, dims)
    sq = np.sum(pts * pts, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
    dist = np.sqrt(np.maximum(d2, 0.0))
    np.fill_diagonal(dist, 0.0)   # expansion roundoff would otherwise bias a(i)
    labels = cc.style_indices()
    onehot = np.zeros((cc.n, m))
    onehot[np.arange(cc.n), labels] = 1.0
    counts = onehot.sum(axis=0)
    sums = dist @ onehot                                   # n x m
    own_count = counts[labels]
    own_sum = sums[np.arange(cc.n), labels]
    with np.errstate(invalid="ignore", divide="ignore"):
        a = own_sum / np.maximum(own_count - 1.0, 1.0)
        mean_other = sums / counts[None, :]
    mean_other[np.arange(cc.n), labels] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0.0, (b - a) / denom, 0.0)
    s = np.where(own_count < 2, 0.0, s)
    return float(np.mean(s))


# ---------------------------------------------------------------------------
# Per-content normalization and the separability verdict


def normalize_by_content(cc: ClusteredCoords) -> ClusteredCoords:
    """Z-score coordinates within each content group (per dimension).

    Dimensions whose within-group standard deviation is below 1e-12 are
    shifted but not scaled. Every content group needs at least 2 samples.
    """
    contents = np.asarray(cc.contents)
    out = np.array(cc.coords, dtype=np.float64)
    for name in cc.content_order:
        mask = contents == name
        group = out[mask]
        if group.shape[0] < 2:
            raise ArgumentError(
                f"content group {name!r} has {group.shape[0]} sample(s); "
                "need >= 2 to normalize")
        mu = group.mean(axis=0)
        sigma = group.std(axis=0)
        scale = np.where(sigma < _STD_FLOOR, 1.0, sigma)
        out[mask] = (group - mu) / scale
    return ClusteredCoords(coords=out, contents=list(cc.contents), styles=list(cc.styles),
                           replicates=list(cc.replicates),
                           style_order=list(cc.style_order),
                           content_order=list(cc.content_order))


class Verdict(str, Enum):
    SEPARABLE = "SEPARABLE"
    ENTANGLED = "ENTANGLED"
    INEXPRESSIVE = "INEXPRESSIVE"


@dataclass(frozen=True)
class SeparabilityThresholds:
    """Calibrated defaults; not measured constants."""

    delta: float = 0.15   # silhouette gain above this flags entanglement
    low: float = 0.20     # both scores below this flags an inexpressive subspace


DEFAULT_THRESHOLDS = SeparabilityThresholds()


def classify_separability(silhouette_raw: float, silhouette_norm: float,
                          thresholds: SeparabilityThresholds = DEFAULT_THRESHOLDS) -> Verdict:
    if silhouette_raw < thresholds.low and silhouette_norm < thresholds.low:
        return Verdict.INEXPRESSIVE
    if silhouette_norm - silhouette_raw > thresholds.delta:
        return Verdict.ENTANGLED
    return Verdict.SEPARABLE


@dataclass
class SeparabilityReport:
    silhouette_raw: float
    silhouette_norm: float
    delta: float
    verdict: Verdict
    thresholds: SeparabilityThresholds = DEFAULT_THRESHOLDS
    silhouette_dims: str = "all"

    def __post_init__(self):
        for name in ("silhouette_raw", "silhouette_norm"):
            value = getattr(self, name)
            if not -1.0 <= value <= 1.0:
                raise ValidationError(f"{name} = {value} outside [-1, 1]")
        if abs(self.delta - (self.silhouette_norm - self.silhouette_raw)) > 1e-12:
            raise ValidationError("delta must equal silhouette_norm - silhouette_raw")

    def to_dict(self) -> dict:
        return {
            "silhouette_raw": self.silhouette_raw,
            "silhouette_norm": self.silhouette_norm,
            "delta": self.delta,
            "verdict": self.verdict.value,
            "thresholds": {"delta": self.thresholds.delta, "low": self.thresholds.low},
            "silhouette_dims": self.silhouette_dims,
        }


def separability_report(cc: ClusteredCoords,
                        thresholds: SeparabilityThresholds = DEFAULT_THRESHOLDS, *,
                        dims: str = "all") -> SeparabilityReport:
    """Silhouette before/after per-content normalization, plus the verdict."""
    raw = silhouette(cc, dims=dims)
    norm = silhouette(normalize_by_content(cc), dims=dims)
    return SeparabilityReport(
        silhouette_raw=raw, silhouette_norm=norm, delta=norm - raw,
        verdict=classify_separability(raw, norm, thresholds),
        thresholds=thresholds, silhouette_dims=dims)


def rank_templates(reports: dict[str, SeparabilityReport]) -> list[tuple[str, SeparabilityReport]]:
    """Ascending by delta; ties broken by descending normalized silhouette,
    then template text."""
    if not reports:
        raise ArgumentError("need at least one report to rank")
    return sorted(reports.items(),
                  key=lambda item: (item[1].delta, -item[1].silhouette_norm, item[0]))


def nearest_style_report(matrix: JsMatrix) -> dict[str, tuple[str, float]]:
    """For each style, the closest other style; ties go to label order."""
    m = len(matrix.labels)
    if m < 2:
        raise ArgumentError("need at least 2 styles")
    masked = matrix.values + np.where(np.eye(m) > 0, np.inf, 0.0)
    out = {}
    for i, label in enumerate(matrix.labels):
        j = int(np.argmin(masked[i]))
        out[label] = (matrix.labels[j], float(matrix.values[i, j]))
    return out
