"""Concept-subspace estimation and the projection edit rule.

A subspace is estimated from a content-fixed, style-varying slice: center the
sample vectors, eigendecompose their covariance (through the Gram matrix when
D exceeds the sample count), and keep the top-k eigenvectors as orthonormal
basis rows. Editing replaces a vector's in-subspace component with another
vector's while leaving the orthogonal complement untouched:

    edited = (I - P) s_orig + P s_new,   P = basis^T basis

Coordinates for plotting and clustering are affine (centered before
projection); the edit itself applies the linear projector to raw vectors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import (MEAN, Aggregation, ScoreDataset, _atomic_write_bytes,
                      aggregate_vectors)
from .errors import (ArgumentError, CorruptionError, FormatError,
                     InsufficientVariationError, RankDeficiencyError, ShapeError,
                     ValidationError)
from .linalg import _RANK_EPS, gram_eigen, reorthonormalize_rows, sym_eigen

AUTO_K_CAP = 16
AUTO_K_VARIANCE = 0.95
_ORTHO_TOL = 1e-8


@dataclass
class ConceptSubspace:
    """Orthonormal basis rows plus the centering vector used to fit them."""

    dim: int
    k: int
    basis: np.ndarray              # k x D orthonormal rows
    eigenvalues: np.ndarray        # descending, >= 0
    center: np.ndarray             # length D
    baseline_content: str
    explained_variance_ratio: float
    rank_deficient: bool = False
    centered: bool = True
    timestep: int | None = None

    def __post_init__(self):
        self.basis = np.asarray(self.basis, dtype=np.float64)
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=np.float64)
        self.center = np.asarray(self.center, dtype=np.float64)
        if self.k < 1:
            raise ValidationError("a concept subspace needs k >= 1")
        if self.basis.shape != (self.k, self.dim):
            raise ValidationError(
                f"basis shape {self.basis.shape} does not match (k={self.k}, dim={self.dim})")
        if self.center.shape != (self.dim,):
            raise ValidationError("center must have length dim")
        gram = self.basis @ self.basis.T
        deviation = float(np.max(np.abs(gram - np.eye(self.k))))
        if deviation > _ORTHO_TOL:
            raise ValidationError(
                f"basis rows are not orthonormal (max Gram deviation {deviation:.3e})")
        if self.eigenvalues.shape != (self.k,):
            raise ValidationError("need one eigenvalue per basis row")
        if np.any(np.diff(self.eigenvalues) > 1e-12):
            raise ValidationError("eigenvalues must be sorted descending")
        if np.any(self.eigenvalues < -1e-12):
            raise ValidationError("eigenvalues must be non-negative")
        if not 0.0 <= self.explained_variance_ratio <= 1.0 + 1e-12:
            raise ValidationError("explained_variance_ratio must lie in [0, 1]")
        self.explained_variance_ratio = float(min(self.explained_variance_ratio, 1.0))

    def projector(self) -> np.ndarray:
        return self.basis.T @ self.basis


@dataclass
class EditRequest:
    """A pair of score vectors: the edit keeps s_orig outside the subspace
    and adopts s_new inside it."""

    s_orig: np.ndarray
    s_new: np.ndarray

    def __post_init__(self):
        self.s_orig = np.asarray(self.s_orig, dtype=np.float64)
        self.s_new = np.asarray(self.s_new, dtype=np.float64)
        if self.s_orig.shape != self.s_new.shape:
            raise ShapeError(
                f"s_orig shape {self.s_orig.shape} != s_new shape {self.s_new.shape}")
        if not (np.all(np.isfinite(self.s_orig)) and np.all(np.isfinite(self.s_new))):
            raise ValidationError("edit vectors contain non-finite entries")


def _validate_slice(slice_ds: ScoreDataset) -> None:
    contents = {s.content.name for s in slice_ds.samples}
    if len(contents) != 1:
        raise InsufficientVariationError(
            f"estimation slice must hold exactly one content, found {sorted(contents)}")
    styles = {s.style.name for s in slice_ds.samples}
    if len(styles) < 2:
        raise InsufficientVariationError(
            f"estimation slice covers {len(styles)} style(s); need at least 2")


def estimate(slice_ds: ScoreDataset, k: int | str = "auto", *,
             center: bool = True, aggregation: Aggregation = MEAN) -> ConceptSubspace:
    """Fit a concept subspace to a content-fixed slice.

    ``k`` is an explicit dimension or "auto" (smallest k reaching 95%
    explained variance, capped at min(N-1, 16)). Requesting more dimensions
    than the observed rank returns the achieved k with ``rank_deficient``
    set; rank zero raises RankDeficiencyError.
    """
    _validate_slice(slice_ds)
    X, _, _, _ = aggregate_vectors(slice_ds, aggregation)
    n, dim = X.shape
    if n < 2:
        raise ArgumentError(f"need at least 2 samples to estimate a subspace, got {n}")
    baseline = slice_ds.samples[0].content.name

    mu = X.mean(axis=0) if center else np.zeros(dim)
    Xc = X - mu
    total_variance = float(np.sum(Xc * Xc)) / n
    rank_cap = min(n - 1 if center else n, dim)
    if total_variance <= _RANK_EPS * max(1.0, float(np.sum(X * X)) / n) or rank_cap < 1:
        raise RankDeficiencyError(
            "slice vectors are identical (zero covariance); no subspace to estimate")

    if k == "auto":
        requested = None
        m = min(rank_cap, AUTO_K_CAP)
    else:
        if not isinstance(k, (int, np.integer)) or isinstance(k, bool) or k < 1:
            raise ArgumentError(f"k must be a positive integer or 'auto', got {k!r}")
        requested = int(k)
        m = min(requested, rank_cap)

    if dim > n:
        result = gram_eigen(Xc, m)
    else:
        cov = (Xc.T @ Xc) / n
        result = sym_eigen(cov, m)
    keep = result.eigenvalues > _RANK_EPS
    eigenvalues = result.eigenvalues[keep]
    vectors = result.eigenvectors[:, keep]
    achieved_rank = int(eigenvalues.shape[0])
    if achieved_rank == 0:
        raise RankDeficiencyError(
            "covariance rank is zero at the 1e-12 cutoff; no subspace to estimate")

    if requested is None:
        ratios = np.cumsum(eigenvalues) / total_variance
        above = np.nonzero(ratios >= AUTO_K_VARIANCE)[0]
        k_used = int(above[0]) + 1 if above.size else achieved_rank
        deficient = False
    else:
        k_used = min(requested, achieved_rank)
        deficient = k_used < requested
    evr = float(np.sum(eigenvalues[:k_used]) / total_variance)
    return ConceptSubspace(
        dim=dim, k=k_used, basis=vectors[:, :k_used].T,
        eigenvalues=eigenvalues[:k_used], center=mu, baseline_content=baseline,
        explained_variance_ratio=min(evr, 1.0), rank_deficient=deficient,
        centered=center)


def project_coords(sub: ConceptSubspace, v) -> np.ndarray:
    """Centered coordinates B (v - center); accepts one vector or a batch."""
    arr = np.asarray(v, dtype=np.float64)
    if arr.shape[-1] != sub.dim:
        raise ShapeError(f"vector length {arr.shape[-1]} != subspace dim {sub.dim}")
    return (arr - sub.center) @ sub.basis.T


def edit(sub: ConceptSubspace, request: EditRequest) -> np.ndarray:
    """Eq.-style projection edit: keep s_orig outside the subspace, adopt
    s_new inside it."""
    if request.s_orig.shape[-1] != sub.dim:
        raise ShapeError(
            f"edit vectors have length {request.s_orig.shape[-1]}, subspace dim is {sub.dim}")
    inside_orig = (request.s_orig @ sub.basis.T) @ sub.basis
    inside_new = (request.s_new @ sub.basis.T) @ sub.basis
    return request.s_orig - inside_orig + inside_new


# ---------------------------------------------------------------------------
# Bundles: one subspace per timestep, or a single aggregated subspace


@dataclass
class SubspaceBundle:
    """Subspaces keyed by how timesteps were handled at estimation time."""

    aggregation: str                       # "mean" | "select:<t>" | "per-timestep"
    subspaces: list[ConceptSubspace] = field(default_factory=list)

    def __post_init__(self):
        if not self.subspaces:
            raise ValidationError("bundle must hold at least one subspace")
        dims = {s.dim for s in self.subspaces}
        if len(dims) != 1:
            raise ValidationError("bundle subspaces disagree on dim")

    @property
    def dim(self) -> int:
        return self.subspaces[0].dim

    @property
    def single(self) -> ConceptSubspace:
        if len(self.subspaces) != 1:
            raise ArgumentError(
                "this operation needs a single-subspace bundle; re-estimate with a "
                "'mean' or 'select:<t>' aggregation instead of 'per-timestep'")
        return self.subspaces[0]


def estimate_per_timestep(slice_ds: ScoreDataset, k: int | str = "auto", *,
                          center: bool = True) -> SubspaceBundle:
    subs = []
    for t in range(slice_ds.timesteps):
        sub = estimate(slice_ds, k, center=center, aggregation=Aggregation("select", t))
        sub.timestep = t
        subs.append(sub)
    return SubspaceBundle("per-timestep", subs)


def estimate_bundle(slice_ds: ScoreDataset, k: int | str = "auto", *,
                    center: bool = True, aggregation: str = "mean") -> SubspaceBundle:
    if aggregation == "per-timestep":
        return estimate_per_timestep(slice_ds, k, center=center)
    agg = Aggregation.parse(aggregation)
    return SubspaceBundle(str(agg), [estimate(slice_ds, k, center=center, aggregation=agg)])


def save_bundle(bundle: SubspaceBundle, json_path) -> None:
    """JSON metadata next to one float32 blob of centers and basis rows."""
    path = Path(json_path)
    blob_name = path.stem + ".f32"
    pieces = []
    entries = []
    for sub in bundle.subspaces:
        pieces.append(sub.center.astype("<f4"))
        pieces.append(np.ascontiguousarray(sub.basis, dtype="<f4").reshape(-1))
        entries.append({
            "k": sub.k,
            "eigenvalues": [float(x) for x in sub.eigenvalues],
            "explained_variance_ratio": sub.explained_variance_ratio,
            "baseline_content": sub.baseline_content,
            "rank_deficient": sub.rank_deficient,
            "centered": sub.centered,
            "timestep": sub.timestep,
        })
    payload = {
        "schema_version": 1,
        "dim": bundle.dim,
        "aggregation": bundle.aggregation,
        "blob": blob_name,
        "entries": entries,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write_bytes(path.with_name(blob_name),
                        np.concatenate(pieces).tobytes())
    _atomic_write_bytes(path, json.dumps(payload, indent=2, sort_keys=True).encode("utf-8") + b"\n")


def load_bundle(json_path) -> SubspaceBundle:
    """Inverse of save_bundle; basis rows are re-orthonormalized to undo
    float32 quantization."""
    path = Path(json_path)
    if not path.is_file():
        raise FormatError(f"no subspace file at {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"subspace file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or raw.get("schema_version") != 1:
        raise FormatError("unknown subspace schema_version", "/schema_version")
    try:
        dim = int(raw["dim"])
        aggregation = str(raw["aggregation"])
        blob_name = str(raw["blob"])
        entries = list(raw["entries"])
        sizes = [dim + int(e["k"]) * dim for e in entries]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"subspace file missing field: {exc}") from exc
    blob_path = path.with_name(blob_name)
    if not blob_path.is_file():
        raise CorruptionError(f"subspace blob {blob_name} is missing next to {path.name}")
    data = np.frombuffer(blob_path.read_bytes(), dtype="<f4").astype(np.float64)
    expected = sum(sizes)
    if data.shape[0] != expected:
        raise CorruptionError(
            f"subspace blob {blob_name}: expected {expected * 4} bytes, got {data.shape[0] * 4}")
    subs = []
    offset = 0
    for entry in entries:
        try:
            k = int(entry["k"])
            center = data[offset:offset + dim]
            offset += dim
            basis = data[offset:offset + k * dim].reshape(k, dim)
            offset += k * dim
            subs.append(ConceptSubspace(
                dim=dim, k=k, basis=reorthonormalize_rows(basis),
                eigenvalues=np.asarray(entry["eigenvalues"], dtype=np.float64),
                center=center, baseline_content=str(entry["baseline_content"]),
                explained_variance_ratio=float(entry["explained_variance_ratio"]),
                rank_deficient=bool(entry["rank_deficient"]),
                centered=bool(entry.get("centered", True)),
                timestep=entry.get("timestep")))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad subspace entry: {exc}") from exc
    return SubspaceBundle(aggregation, subs)
