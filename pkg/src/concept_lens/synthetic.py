"""Seeded ground-truth factor model for validating the diagnostics.

Each sample is built as

    style_basis @ style_code(z) + content_basis @ content_code(w)
      + entanglement * style_basis @ interaction_code(w, z) + noise

with noise drawn from a counter-based Philox stream keyed by
(seed, content, style, replicate), so generation is a pure function of the
spec and grid and may be parallelized freely. The entanglement term lives
inside the style subspace: raising it drags every style cluster around as a
function of content, which is exactly what per-content normalization is
supposed to cancel.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import PromptGrid, ScoreDataset, ScoreSample, content_label, style_label
from .errors import FormatError, SpecError, ValidationError

_ORTHO_TOL = 1e-8
_MIN_CODE_DISTANCE = 1.0


@dataclass
class SyntheticModelSpec:
    """Ground-truth factor model with a controllable entanglement knob."""

    dim: int
    style_basis: np.ndarray                       # D x Ks, orthonormal columns
    content_basis: np.ndarray                     # D x Kc, orthonormal, orthogonal to style
    style_codes: dict[str, np.ndarray]
    content_codes: dict[str, np.ndarray]
    entanglement_strength: float
    interaction_codes: dict[tuple[str, str], np.ndarray]   # (content, style) -> Ks
    noise_sigma: float
    seed: int

    def __post_init__(self):
        self.style_basis = np.asarray(self.style_basis, dtype=np.float64)
        self.content_basis = np.asarray(self.content_basis, dtype=np.float64)
        if self.style_basis.ndim != 2 or self.style_basis.shape[0] != self.dim:
            raise ValidationError("style_basis must be D x Ks")
        if self.content_basis.ndim != 2 or self.content_basis.shape[0] != self.dim:
            raise ValidationError("content_basis must be D x Kc")
        for name, basis in (("style_basis", self.style_basis),
                            ("content_basis", self.content_basis)):
            gram = basis.T @ basis
            if np.max(np.abs(gram - np.eye(basis.shape[1]))) > _ORTHO_TOL:
                raise ValidationError(f"{name} columns are not orthonormal")
        cross = float(np.max(np.abs(self.style_basis.T @ self.content_basis)))
        if cross > _ORTHO_TOL:
            raise ValidationError(
                f"style and content bases are not orthogonal (max |dot| = {cross:.3e})")
        if self.entanglement_strength < 0 or self.noise_sigma < 0:
            raise ValidationError("entanglement_strength and noise_sigma must be >= 0")
        ks = self.style_basis.shape[1]
        kc = self.content_basis.shape[1]
        self.style_codes = {k: np.asarray(v, dtype=np.float64) for k, v in self.style_codes.items()}
        self.content_codes = {k: np.asarray(v, dtype=np.float64) for k, v in self.content_codes.items()}
        self.interaction_codes = {k: np.asarray(v, dtype=np.float64)
                                  for k, v in self.interaction_codes.items()}
        for name, code in self.style_codes.items():
            if code.shape != (ks,):
                raise ValidationError(f"style code {name!r} must have length {ks}")
        for name, code in self.content_codes.items():
            if code.shape != (kc,):
                raise ValidationError(f"content code {name!r} must have length {kc}")
        for key, code in self.interaction_codes.items():
            if code.shape != (ks,):
                raise ValidationError(f"interaction code {key!r} must have length {ks}")
        names = sorted(self.style_codes)
        for a_i, a in enumerate(names):
            for b in names[a_i + 1:]:
                dist = float(np.linalg.norm(self.style_codes[a] - self.style_codes[b]))
                if dist < _MIN_CODE_DISTANCE:
                    raise ValidationError(
                        f"style codes {a!r} and {b!r} are only {dist:.3f} apart; "
                        f"need >= {_MIN_CODE_DISTANCE} so clusters resolve at small sigma")

    @property
    def style_rank(self) -> int:
        return self.style_basis.shape[1]

    @property
    def content_rank(self) -> int:
        return self.content_basis.shape[1]

    @classmethod
    def random(cls, dim: int, style_rank: int, content_rank: int,
               styles: list[str], contents: list[str],
               entanglement_strength: float = 0.0, noise_sigma: float = 0.1,
               seed: int = 0) -> "SyntheticModelSpec":
        """Draw orthonormal bases and codes from the seed, then freeze them.

        Interaction codes are drawn once per content and shared across styles:
        an ingredient shifts the style coordinates the same way in every
        region, which is the entanglement pattern the diagnostics target.
        """
        if dim < style_rank + content_rank:
            raise ValidationError("dim must be >= style_rank + content_rank")
        rng = np.random.Generator(np.random.Philox(seed))
        raw = rng.standard_normal((dim, style_rank + content_rank))
        q, r = np.linalg.qr(raw)
        signs = np.sign(np.diag(r))
        signs[signs == 0.0] = 1.0
        q = q * signs
        style_code_mat = rng.standard_normal((len(styles), style_rank))
        if len(styles) > 1:
            # Whiten the centered codes so their sample covariance is isotropic:
            # a per-content z-score then acts as a uniform rescale when
            # entanglement is zero, leaving the silhouette untouched. Scale up
            # afterwards if any pair sits closer than the resolvability floor.
            mean = style_code_mat.mean(axis=0)
            centered = style_code_mat - mean
            cov = centered.T @ centered / len(styles)
            w, u = np.linalg.eigh(cov)
            inv_root = np.where(w > 1e-12, 1.0 / np.sqrt(np.maximum(w, 1e-300)), 0.0)
            style_code_mat = mean + centered @ u @ np.diag(inv_root) @ u.T
            diffs = style_code_mat[:, None, :] - style_code_mat[None, :, :]
            dists = np.linalg.norm(diffs, axis=-1)
            min_dist = float(np.min(dists[np.triu_indices(len(styles), k=1)]))
            if min_dist < _MIN_CODE_DISTANCE:
                style_code_mat = style_code_mat * ((_MIN_CODE_DISTANCE + 1e-9) / min_dist)
        content_code_mat = rng.standard_normal((len(contents), content_rank))
        interaction: dict[tuple[str, str], np.ndarray] = {}
        for w_i, content in enumerate(contents):
            shift = rng.standard_normal(style_rank)
            for style in styles:
                interaction[(content, style)] = shift.copy()
        return cls(
            dim=dim,
            style_basis=q[:, :style_rank],
            content_basis=q[:, style_rank:style_rank + content_rank],
            style_codes={s: style_code_mat[i] for i, s in enumerate(styles)},
            content_codes={c: content_code_mat[i] for i, c in enumerate(contents)},
            entanglement_strength=float(entanglement_strength),
            interaction_codes=interaction,
            noise_sigma=float(noise_sigma),
            seed=int(seed),
        )


def spec_to_dict(spec: SyntheticModelSpec) -> dict:
    interaction: dict[str, dict[str, list[float]]] = {}
    for (content, style), code in spec.interaction_codes.items():
        interaction.setdefault(content, {})[style] = [float(x) for x in code]
    return {
        "dim": spec.dim,
        "style_basis": [[float(x) for x in row] for row in spec.style_basis],
        "content_basis": [[float(x) for x in row] for row in spec.content_basis],
        "style_codes": {k: [float(x) for x in v] for k, v in spec.style_codes.items()},
        "content_codes": {k: [float(x) for x in v] for k, v in spec.content_codes.items()},
        "entanglement_strength": spec.entanglement_strength,
        "interaction_codes": interaction,
        "noise_sigma": spec.noise_sigma,
        "seed": spec.seed,
    }


def spec_from_dict(raw: dict) -> SyntheticModelSpec:
    try:
        interaction = {(content, style): np.asarray(code, dtype=np.float64)
                       for content, styles in raw["interaction_codes"].items()
                       for style, code in styles.items()}
        return SyntheticModelSpec(
            dim=int(raw["dim"]),
            style_basis=np.asarray(raw["style_basis"], dtype=np.float64),
            content_basis=np.asarray(raw["content_basis"], dtype=np.float64),
            style_codes={k: np.asarray(v, dtype=np.float64) for k, v in raw["style_codes"].items()},
            content_codes={k: np.asarray(v, dtype=np.float64)
                           for k, v in raw["content_codes"].items()},
            entanglement_strength=float(raw["entanglement_strength"]),
            interaction_codes=interaction,
            noise_sigma=float(raw["noise_sigma"]),
            seed=int(raw["seed"]),
        )
    except (KeyError, TypeError, AttributeError) as exc:
        raise FormatError(f"synthetic spec is missing or mistypes field: {exc}") from exc


def spec_hash(spec: SyntheticModelSpec) -> str:
    payload = json.dumps(spec_to_dict(spec), sort_keys=True).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def load_spec(path) -> SyntheticModelSpec:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"spec file is not valid JSON: {exc}") from exc
    return spec_from_dict(raw)


def save_spec(spec: SyntheticModelSpec, path) -> None:
    Path(path).write_text(
        json.dumps(spec_to_dict(spec), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _noise(seed: int, content: str, style: str, replicate: int, dim: int) -> np.ndarray:
    digest = hashlib.sha256(f"{seed}|{content}|{style}|{replicate}".encode("utf-8")).digest()
    key = np.frombuffer(digest[:16], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    return rng.standard_normal(dim)


def model_vector(spec: SyntheticModelSpec, content: str, style: str,
                 replicate: int) -> np.ndarray:
    """One sample at full float64 precision, before dataset quantization."""
    if style not in spec.style_codes:
        raise SpecError(f"spec has no style code for label {style!r}")
    if content not in spec.content_codes:
        raise SpecError(f"spec has no content code for label {content!r}")
    if (content, style) not in spec.interaction_codes:
        raise SpecError(f"spec has no interaction code for ({content!r}, {style!r})")
    vec = (spec.style_basis @ spec.style_codes[style]
           + spec.content_basis @ spec.content_codes[content]
           + spec.entanglement_strength
           * (spec.style_basis @ spec.interaction_codes[(content, style)]))
    if spec.noise_sigma > 0:
        vec = vec + spec.noise_sigma * _noise(spec.seed, content, style, replicate, spec.dim)
    return vec


def generate(spec: SyntheticModelSpec, grid: PromptGrid) -> ScoreDataset:
    """Deterministic single-timestep dataset for every grid cell.

    Vectors are stored at the ingestion format's float32 precision; use
    model_vector for float64-exact factor-model values.
    """
    for style in grid.styles:
        if style not in spec.style_codes:
            raise SpecError(f"spec has no style code for label {style!r}")
    for content in grid.contents:
        if content not in spec.content_codes:
            raise SpecError(f"spec has no content code for label {content!r}")
    for content in grid.contents:
        for style in grid.styles:
            if (content, style) not in spec.interaction_codes:
                raise SpecError(f"spec has no interaction code for ({content!r}, {style!r})")
    samples = []
    for content in grid.contents:
        for style in grid.styles:
            for replicate in range(grid.replicates):
                vec = model_vector(spec, content, style, replicate)
                samples.append(ScoreSample(
                    content=content_label(content), style=style_label(style),
                    replicate=replicate, timestep=0,
                    vector=vec.astype(np.float32)))
    return ScoreDataset(dim=spec.dim, content_labels=grid.contents, style_labels=grid.styles,
                        samples=samples, provenance=f"synthetic:{spec_hash(spec)}",
                        timesteps=1)


def true_style_projector(spec: SyntheticModelSpec) -> np.ndarray:
    """Exact projector onto the full style subspace."""
    return spec.style_basis @ spec.style_basis.T


def style_variation_basis(spec: SyntheticModelSpec, styles: list[str]) -> np.ndarray:
    """Orthonormal columns spanning the style-code variation across ``styles``.

    This is the ground truth an estimator can actually recover: the span of
    the centered style codes mapped through the style basis, which may be a
    strict subspace of the full style basis when few styles are given.
    """
    codes = np.stack([spec.style_codes[s] for s in styles])
    centered = codes - codes.mean(axis=0)
    mapped = spec.style_basis @ centered.T
    u, sing, _ = np.linalg.svd(mapped, full_matrices=False)
    if sing.size == 0 or sing[0] == 0.0:
        return np.zeros((spec.dim, 0))
    keep = sing > 1e-12 * sing[0]
    return u[:, keep]
