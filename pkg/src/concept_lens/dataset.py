"""Labeled score-sample datasets, the on-disk ingestion format, and prompt grids.

Ingestion format (schema version 1): a directory holding ``manifest.json``
plus one ``.f32`` blob per (content, style, replicate) triple. Each blob is
T*D little-endian IEEE-754 float32 values, timestep-major, no header or
padding. Manifest sample entries reference labels by index into the label
tables. The format is the bit-exact contract with external exporters, so
vectors are carried as float32 in memory and round-trip unchanged.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (ArgumentError, CorruptionError, FormatError,
                     InsufficientVariationError, ValidationError)

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.json"


class LabelKind(str, Enum):
    STYLE = "style"
    CONTENT = "content"


@dataclass(frozen=True)
class ConceptLabel:
    """A named attribute within one concept set (style or content)."""

    kind: LabelKind
    name: str

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name or self.name != self.name.strip():
            raise ValidationError(f"label name must be non-empty and trimmed, got {self.name!r}")


def style_label(name: str) -> ConceptLabel:
    return ConceptLabel(LabelKind.STYLE, name)


def content_label(name: str) -> ConceptLabel:
    return ConceptLabel(LabelKind.CONTENT, name)


@dataclass
class ScoreSample:
    """One score vector tagged with its content/style labels, seed index, and timestep."""

    content: ConceptLabel
    style: ConceptLabel
    replicate: int
    timestep: int
    vector: np.ndarray

    def __post_init__(self):
        if self.content.kind is not LabelKind.CONTENT:
            raise ValidationError(f"content label has kind {self.content.kind.value}")
        if self.style.kind is not LabelKind.STYLE:
            raise ValidationError(f"style label has kind {self.style.kind.value}")
        if self.replicate < 0 or self.timestep < 0:
            raise ValidationError("replicate and timestep must be >= 0")
        vec = np.asarray(self.vector, dtype=np.float32)
        if vec.ndim != 1:
            raise ValidationError(f"sample vector must be 1-D, got shape {vec.shape}")
        if not np.all(np.isfinite(vec)):
            raise ValidationError("sample vector contains non-finite entries")
        self.vector = vec

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.content.name, self.style.name, self.replicate)


def _check_label_table(names, what: str) -> list[str]:
    out = list(names)
    seen = set()
    for name in out:
        if not isinstance(name, str) or not name or name != name.strip():
            raise ValidationError(f"{what} label {name!r} must be non-empty and trimmed")
        if name in seen:
            raise ValidationError(f"duplicate {what} label {name!r}")
        seen.add(name)
    return out


@dataclass
class ScoreDataset:
    """A fixed-dimensionality collection of labeled score samples.

    ``timesteps`` is uniform: every (content, style, replicate) triple must
    carry exactly timesteps 0..T-1. Defaults to the inferred value.
    """

    dim: int
    content_labels: list[str]
    style_labels: list[str]
    samples: list[ScoreSample]
    provenance: str = ""
    timesteps: int | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError(f"dim must be >= 1, got {self.dim}")
        self.content_labels = _check_label_table(self.content_labels, "content")
        self.style_labels = _check_label_table(self.style_labels, "style")
        contents = set(self.content_labels)
        styles = set(self.style_labels)
        groups: dict[tuple[str, str, int], list[int]] = {}
        for i, sample in enumerate(self.samples):
            if sample.vector.shape[0] != self.dim:
                raise ValidationError(
                    f"sample {i} has length {sample.vector.shape[0]}, dataset dim is {self.dim}")
            if sample.content.name not in contents:
                raise ValidationError(f"sample {i} content {sample.content.name!r} not in label table")
            if sample.style.name not in styles:
                raise ValidationError(f"sample {i} style {sample.style.name!r} not in label table")
            groups.setdefault(sample.key, []).append(sample.timestep)
        inferred = 1
        for key, steps in groups.items():
            inferred = max(inferred, max(steps) + 1)
        if self.timesteps is None:
            self.timesteps = inferred
        for key, steps in groups.items():
            if sorted(steps) != list(range(self.timesteps)):
                raise ValidationError(
                    f"triple {key} has timesteps {sorted(steps)}, expected 0..{self.timesteps - 1}")

    @property
    def n_triples(self) -> int:
        return len(self.samples) // self.timesteps if self.samples else 0

    def grouped(self) -> dict[tuple[str, str, int], list[ScoreSample]]:
        """Samples grouped by (content, style, replicate), timestep-sorted."""
        groups: dict[tuple[str, str, int], list[ScoreSample]] = {}
        for sample in self.samples:
            groups.setdefault(sample.key, []).append(sample)
        for samples in groups.values():
            samples.sort(key=lambda s: s.timestep)
        return groups


# ---------------------------------------------------------------------------
# On-disk format


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def write_dataset(ds: ScoreDataset, directory) -> str:
    """Write the ingestion-format directory; returns the SHA-256 of the manifest bytes."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    content_index = {name: i for i, name in enumerate(ds.content_labels)}
    style_index = {name: j for j, name in enumerate(ds.style_labels)}
    entries = []
    groups = ds.grouped()
    keys = sorted(groups, key=lambda k: (content_index[k[0]], style_index[k[1]], k[2]))
    for content, style, replicate in keys:
        stack = np.stack([s.vector for s in groups[(content, style, replicate)]])
        blob = np.ascontiguousarray(stack, dtype="<f4").tobytes()
        i, j = content_index[content], style_index[style]
        name = f"s_{i}_{j}_{replicate}.f32"
        _atomic_write_bytes(root / name, blob)
        entries.append({
            "content": i,
            "style": j,
            "replicate": replicate,
            "file": name,
            "sha256": hashlib.sha256(blob).hexdigest(),
        })
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "dim": ds.dim,
        "timesteps": ds.timesteps,
        "labels": {"content": ds.content_labels, "style": ds.style_labels},
        "samples": entries,
        "provenance": ds.provenance,
    }
    data = json.dumps(manifest, indent=2, sort_keys=True).encode("utf-8") + b"\n"
    _atomic_write_bytes(root / MANIFEST_NAME, data)
    return hashlib.sha256(data).hexdigest()


def _expect(condition: bool, message: str, pointer: str) -> None:
    if not condition:
        raise FormatError(message, pointer)


def _get(obj: dict, key: str, kind, pointer: str, optional: bool = False):
    if key not in obj:
        if optional:
            return None
        raise FormatError(f"missing required key {key!r}", f"{pointer}/{key}")
    value = obj[key]
    if kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    _expect(ok, f"expected {kind.__name__}, got {type(value).__name__}", f"{pointer}/{key}")
    return value


def read_dataset(directory) -> ScoreDataset:
    """Read an ingestion-format directory, verifying blob sizes and digests."""
    root = Path(directory)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise FormatError(f"no {MANIFEST_NAME} in {root}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"manifest is not valid JSON: {exc}") from exc
    _expect(isinstance(manifest, dict), "manifest root must be an object", "")
    version = _get(manifest, "schema_version", int, "")
    _expect(version == SCHEMA_VERSION,
            f"unknown schema_version {version}, expected {SCHEMA_VERSION}", "/schema_version")
    dim = _get(manifest, "dim", int, "")
    _expect(dim >= 1, f"dim must be >= 1, got {dim}", "/dim")
    timesteps = _get(manifest, "timesteps", int, "")
    _expect(timesteps >= 1, f"timesteps must be >= 1, got {timesteps}", "/timesteps")
    labels = _get(manifest, "labels", dict, "")
    contents = _get(labels, "content", list, "/labels")
    styles = _get(labels, "style", list, "/labels")
    for idx, name in enumerate(contents):
        _expect(isinstance(name, str), "label must be a string", f"/labels/content/{idx}")
    for idx, name in enumerate(styles):
        _expect(isinstance(name, str), "label must be a string", f"/labels/style/{idx}")
    entries = _get(manifest, "samples", list, "")
    provenance = _get(manifest, "provenance", str, "", optional=True) or ""

    samples: list[ScoreSample] = []
    seen: set[tuple[int, int, int]] = set()
    for idx, entry in enumerate(entries):
        pointer = f"/samples/{idx}"
        _expect(isinstance(entry, dict), "sample entry must be an object", pointer)
        i = _get(entry, "content", int, pointer)
        j = _get(entry, "style", int, pointer)
        replicate = _get(entry, "replicate", int, pointer)
        name = _get(entry, "file", str, pointer)
        sha = _get(entry, "sha256", str, pointer, optional=True)
        _expect(0 <= i < len(contents), f"content index {i} out of range", f"{pointer}/content")
        _expect(0 <= j < len(styles), f"style index {j} out of range", f"{pointer}/style")
        _expect(replicate >= 0, "replicate must be >= 0", f"{pointer}/replicate")
        _expect((i, j, replicate) not in seen, "duplicate (content, style, replicate) triple", pointer)
        seen.add((i, j, replicate))
        blob_path = root / name
        if not blob_path.is_file():
            raise CorruptionError(f"blob {name} listed in manifest is missing from {root}")
        blob = blob_path.read_bytes()
        expected = timesteps * dim * 4
        if len(blob) != expected:
            raise CorruptionError(
                f"blob {name}: expected {expected} bytes ({timesteps}x{dim} float32), "
                f"got {len(blob)}")
        if sha is not None and hashlib.sha256(blob).hexdigest() != sha:
            raise CorruptionError(f"blob {name}: SHA-256 does not match manifest")
        data = np.frombuffer(blob, dtype="<f4").reshape(timesteps, dim)
        for t in range(timesteps):
            samples.append(ScoreSample(
                content=content_label(contents[i]),
                style=style_label(styles[j]),
                replicate=replicate,
                timestep=t,
                vector=data[t].copy(),
            ))
    try:
        return ScoreDataset(dim=dim, content_labels=contents, style_labels=styles,
                            samples=samples, provenance=provenance, timesteps=timesteps)
    except ValidationError as exc:
        raise FormatError(f"manifest is internally inconsistent: {exc}") from exc


# ---------------------------------------------------------------------------
# Prompt grids


@dataclass
class PromptGrid:
    """Cross product of contents, styles, and replicates through one template."""

    template: str
    contents: list[str]
    styles: list[str]
    replicates: int
    baseline_content: str

    def __post_init__(self):
        for placeholder in ("{content}", "{style}"):
            count = self.template.count(placeholder)
            if count != 1:
                raise ValidationError(
                    f"template must contain {placeholder} exactly once, found {count}")
        self.contents = _check_label_table(self.contents, "content")
        self.styles = _check_label_table(self.styles, "style")
        if not self.contents or not self.styles:
            raise ValidationError("grid needs at least one content and one style")
        if self.replicates < 1:
            raise ValidationError(f"replicates must be >= 1, got {self.replicates}")
        if self.baseline_content not in self.contents:
            raise ValidationError(
                f"baseline_content {self.baseline_content!r} not among contents")


@dataclass(frozen=True)
class RenderedPrompt:
    prompt: str
    content: str
    style: str
    replicate: int


def render_prompts(grid: PromptGrid) -> list[RenderedPrompt]:
    """Literal template substitution, ordered by (content, style, replicate)."""
    out = []
    for content in grid.contents:
        for style in grid.styles:
            text = grid.template.replace("{content}", content).replace("{style}", style)
            for replicate in range(grid.replicates):
                out.append(RenderedPrompt(text, content, style, replicate))
    return out


def grid_from_json(path) -> PromptGrid:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"grid file is not valid JSON: {exc}") from exc
    _expect(isinstance(raw, dict), "grid root must be an object", "")
    template = _get(raw, "template", str, "")
    contents = _get(raw, "contents", list, "")
    styles = _get(raw, "styles", list, "")
    replicates = _get(raw, "replicates", int, "")
    baseline = _get(raw, "baseline_content", str, "")
    try:
        return PromptGrid(template, contents, styles, replicates, baseline)
    except ValidationError as exc:
        raise FormatError(f"invalid grid: {exc}") from exc


def grid_to_json(grid: PromptGrid, path) -> None:
    payload = {
        "template": grid.template,
        "contents": grid.contents,
        "styles": grid.styles,
        "replicates": grid.replicates,
        "baseline_content": grid.baseline_content,
    }
    _atomic_write_bytes(Path(path),
                        json.dumps(payload, indent=2, sort_keys=True).encode("utf-8") + b"\n")


# ---------------------------------------------------------------------------
# Slicing and timestep aggregation


def subspace_estimation_slice(ds: ScoreDataset, baseline_content: str) -> ScoreDataset:
    """Samples whose content equals the baseline; must span >= 2 styles."""
    kept = [s for s in ds.samples if s.content.name == baseline_content]
    styles_present = {s.style.name for s in kept}
    if baseline_content not in ds.content_labels or not kept:
        raise InsufficientVariationError(
            f"baseline content {baseline_content!r} has no samples in this dataset")
    if len(styles_present) < 2:
        raise InsufficientVariationError(
            f"slice for {baseline_content!r} covers {len(styles_present)} style(s); "
            "need at least 2 to estimate a subspace")
    styles = [s for s in ds.style_labels if s in styles_present]
    return ScoreDataset(dim=ds.dim, content_labels=[baseline_content], style_labels=styles,
                        samples=kept, provenance=ds.provenance, timesteps=ds.timesteps)


@dataclass(frozen=True)
class Aggregation:
    """How multi-timestep triples are reduced to one vector before analysis."""

    mode: str = "mean"
    timestep: int | None = None

    def __post_init__(self):
        if self.mode not in ("mean", "select"):
            raise ArgumentError(f"aggregation mode must be 'mean' or 'select', got {self.mode!r}")
        if self.mode == "select" and (self.timestep is None or self.timestep < 0):
            raise ArgumentError("select aggregation needs a timestep >= 0")

    @classmethod
    def parse(cls, text: str) -> "Aggregation":
        if text == "mean":
            return cls("mean")
        if text.startswith("select:"):
            try:
                return cls("select", int(text.split(":", 1)[1]))
            except ValueError as exc:
                raise ArgumentError(f"bad aggregation spec {text!r}") from exc
        raise ArgumentError(f"bad aggregation spec {text!r} (use 'mean' or 'select:<t>')")

    def __str__(self) -> str:
        return "mean" if self.mode == "mean" else f"select:{self.timestep}"


MEAN = Aggregation("mean")


def aggregate_vectors(ds: ScoreDataset, aggregation: Aggregation = MEAN):
    """One float64 vector per (content, style, replicate) triple.

    Returns (X, contents, styles, replicates) with rows ordered by
    (content index, style index, replicate).
    """
    if aggregation.mode == "select" and aggregation.timestep >= ds.timesteps:
        raise ArgumentError(
            f"timestep {aggregation.timestep} out of range for T={ds.timesteps}")
    content_index = {name: i for i, name in enumerate(ds.content_labels)}
    style_index = {name: j for j, name in enumerate(ds.style_labels)}
    groups = ds.grouped()
    keys = sorted(groups, key=lambda k: (content_index[k[0]], style_index[k[1]], k[2]))
    rows = []
    for key in keys:
        stack = np.stack([s.vector for s in groups[key]]).astype(np.float64)
        rows.append(stack.mean(axis=0) if aggregation.mode == "mean"
                    else stack[aggregation.timestep])
    X = np.stack(rows) if rows else np.zeros((0, ds.dim))
    contents = [k[0] for k in keys]
    styles = [k[1] for k in keys]
    replicates = [k[2] for k in keys]
    return X, contents, styles, replicates
