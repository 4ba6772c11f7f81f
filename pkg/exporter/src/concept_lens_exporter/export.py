"""Run a pipeline over a prompt grid and write ingestion format v1.

This module talks to the analysis side only through the documented dataset
format: manifest.json over per-triple .f32 blobs (T x D float32, little
endian, timestep-major). Samples whose captured vectors contain NaN are
skipped and listed in the manifest's "skipped" array.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .pipeline import LatentDiffusionPipeline

SCHEMA_VERSION = 1


class GridError(ValueError):
    pass


@dataclass
class PromptGrid:
    template: str
    contents: list[str]
    styles: list[str]
    replicates: int
    baseline_content: str

    @classmethod
    def from_json(cls, path) -> "PromptGrid":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        try:
            grid = cls(template=str(raw["template"]), contents=list(raw["contents"]),
                       styles=list(raw["styles"]), replicates=int(raw["replicates"]),
                       baseline_content=str(raw["baseline_content"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise GridError(f"grid file is missing or mistypes field: {exc}") from exc
        for placeholder in ("{content}", "{style}"):
            if grid.template.count(placeholder) != 1:
                raise GridError(f"template must contain {placeholder} exactly once")
        if grid.replicates < 1 or not grid.contents or not grid.styles:
            raise GridError("grid needs contents, styles, and replicates >= 1")
        if grid.baseline_content not in grid.contents:
            raise GridError(f"baseline_content {grid.baseline_content!r} not among contents")
        return grid

    def render(self, content: str, style: str) -> str:
        return self.template.replace("{content}", content).replace("{style}", style)


@dataclass
class ExportJob:
    model: str
    grid: PromptGrid
    steps: int
    seeds: int
    out_dir: Path
    guidance_scale: float = 7.5
    base_seed: int = 0
    batch_size: int = 1

    def __post_init__(self):
        if self.steps < 1:
            raise GridError(f"steps must be >= 1, got {self.steps}")
        if self.seeds < 1:
            raise GridError(f"seeds must be >= 1, got {self.seeds}")
        if self.batch_size < 1:
            raise GridError(f"batch_size must be >= 1, got {self.batch_size}")
        self.out_dir = Path(self.out_dir)


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def export(job: ExportJob, progress=None) -> str:
    """Capture the per-step conditional noise predictions for every grid cell;
    returns the SHA-256 of the manifest bytes."""
    pipeline = LatentDiffusionPipeline.from_pretrained(job.model)
    dim = pipeline.config.flat_dim
    job.out_dir.mkdir(parents=True, exist_ok=True)

    # all prompts of one replicate share a seed (and so an initial latent)
    entries = []
    skipped = []
    cells = [(i, j) for i in range(len(job.grid.contents))
             for j in range(len(job.grid.styles))]
    for replicate in range(job.seeds):
        seed = job.base_seed + replicate
        for start in range(0, len(cells), job.batch_size):
            chunk = cells[start:start + job.batch_size]
            prompts = [job.grid.render(job.grid.contents[i], job.grid.styles[j])
                       for i, j in chunk]
            captured = pipeline.run(prompts, job.steps, job.guidance_scale, seed)
            for (i, j), vectors in zip(chunk, captured):
                name = f"s_{i}_{j}_{replicate}.f32"
                if bool(torch.isnan(vectors).any()):
                    skipped.append({"content": i, "style": j, "replicate": replicate,
                                    "reason": "nan in captured vectors"})
                    continue
                blob = np.ascontiguousarray(vectors.numpy(), dtype="<f4").tobytes()
                _atomic_write(job.out_dir / name, blob)
                entries.append({
                    "content": i, "style": j, "replicate": replicate,
                    "file": name, "sha256": hashlib.sha256(blob).hexdigest(),
                })
                if progress is not None:
                    progress(len(entries))
    provenance = json.dumps({
        "exporter": "concept-lens-exporter",
        "model": str(job.model),
        "model_id": pipeline.config.model_id,
        "steps": job.steps,
        "guidance_scale": job.guidance_scale,
        "base_seed": job.base_seed,
        "capture": "conditional noise prediction per denoising step",
        "flatten_order": "channel-major then spatial row-major",
        "scheduler": "ddim(eta=0)",
    }, sort_keys=True)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "dim": dim,
        "timesteps": job.steps,
        "labels": {"content": job.grid.contents, "style": job.grid.styles},
        "samples": entries,
        "skipped": skipped,
        "provenance": provenance,
    }
    data = json.dumps(manifest, indent=2, sort_keys=True).encode("utf-8") + b"\n"
    _atomic_write(job.out_dir / "manifest.json", data)
    return hashlib.sha256(data).hexdigest()
