"""Command-line pipeline: synth, subspace, diag, rank, edit, validate.

Exit codes: 0 success, 1 I/O failure, 2 validation failure. Every failure
prints one machine-parsable line starting with ``error:`` to stderr. Flags
override matching keys in the optional JSON config (--config); the env var
CONCEPT_LENS_LOG sets the log level.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import diagnostics, reports
from .dataset import (Aggregation, _atomic_write_bytes, grid_from_json,
                      read_dataset, subspace_estimation_slice, write_dataset)
from .errors import ConceptLensError, FormatError
from .subspace import EditRequest, edit, estimate_bundle, load_bundle, save_bundle
from .synthetic import SyntheticModelSpec, generate, spec_from_dict

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2

log = logging.getLogger("concept_lens")


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise FormatError("config root must be a flat JSON object")
    return raw


def _resolve(args, config: dict, key: str, default):
    """CLI flag > config key > default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _say(args, config, message: str) -> None:
    if not (getattr(args, "quiet", False) or config.get("quiet", False)):
        print(message)


def _load_spec_file(path, seed_override) -> SyntheticModelSpec:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"spec file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise FormatError("spec root must be a JSON object")
    if "style_basis" in raw:
        spec = spec_from_dict(raw)
        if seed_override is not None:
            spec = dataclasses.replace(spec, seed=int(seed_override))
        return spec
    # Compact recipe form: bases and codes drawn from the seed.
    try:
        return SyntheticModelSpec.random(
            dim=int(raw["dim"]),
            style_rank=int(raw["style_rank"]),
            content_rank=int(raw["content_rank"]),
            styles=list(raw["styles"]),
            contents=list(raw["contents"]),
            entanglement_strength=float(raw.get("entanglement_strength", 0.0)),
            noise_sigma=float(raw.get("noise_sigma", 0.1)),
            seed=int(seed_override if seed_override is not None else raw.get("seed", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"spec recipe is missing or mistypes field: {exc}") from exc


def _cmd_synth(args, config) -> int:
    spec_path = _resolve(args, config, "spec", None)
    grid_path = _resolve(args, config, "grid", None)
    out = _resolve(args, config, "out", None)
    if not spec_path or not grid_path or not out:
        raise FormatError("synth needs --spec, --grid, and --out")
    seed = _resolve(args, config, "seed", None)
    spec = _load_spec_file(spec_path, seed)
    grid = grid_from_json(grid_path)
    ds = generate(spec, grid)
    digest = write_dataset(ds, out)
    log.info("synth: %d samples -> %s", len(ds.samples), out)
    _say(args, config, f"wrote {len(ds.samples)} samples to {out}")
    _say(args, config, f"manifest digest {digest}")
    return EXIT_OK


def _estimation_knobs(args, config):
    k = _resolve(args, config, "k", "auto")
    if isinstance(k, str) and k != "auto":
        k = int(k)
    centering = _resolve(args, config, "centering", True)
    if getattr(args, "no_centering", False):
        centering = False
    aggregation = _resolve(args, config, "aggregation", "mean")
    return k, bool(centering), aggregation


def _cmd_subspace(args, config) -> int:
    dataset_dir = _resolve(args, config, "dataset", None)
    baseline = _resolve(args, config, "baseline", None)
    out = _resolve(args, config, "out", None)
    if not dataset_dir or not baseline or not out:
        raise FormatError("subspace needs --dataset, --baseline, and --out")
    k, centering, aggregation = _estimation_knobs(args, config)
    ds = read_dataset(dataset_dir)
    slice_ds = subspace_estimation_slice(ds, baseline)
    bundle = estimate_bundle(slice_ds, k, center=centering, aggregation=aggregation)
    save_bundle(bundle, out)
    for sub in bundle.subspaces:
        if sub.rank_deficient:
            print(f"warning: rank-deficient estimate, achieved k={sub.k}", file=sys.stderr)
        suffix = "" if sub.timestep is None else f" (timestep {sub.timestep})"
        _say(args, config,
             f"k={sub.k} explained_variance_ratio={sub.explained_variance_ratio:.6f}{suffix}")
    log.info("subspace: %s -> %s", dataset_dir, out)
    return EXIT_OK


def _diagnostic_knobs(args, config):
    bins = int(_resolve(args, config, "bins", diagnostics.DEFAULT_BINS))
    smoothing = float(_resolve(args, config, "smoothing", diagnostics.DEFAULT_SMOOTHING))
    thresholds = diagnostics.SeparabilityThresholds(
        delta=float(_resolve(args, config, "t_delta", diagnostics.DEFAULT_THRESHOLDS.delta)),
        low=float(_resolve(args, config, "t_low", diagnostics.DEFAULT_THRESHOLDS.low)))
    dims = _resolve(args, config, "silhouette_dims", "all")
    return bins, smoothing, thresholds, dims


def _cmd_diag(args, config) -> int:
    dataset_dir = _resolve(args, config, "dataset", None)
    subspace_path = _resolve(args, config, "subspace", None)
    out = _resolve(args, config, "out", None)
    if not dataset_dir or not subspace_path or not out:
        raise FormatError("diag needs --dataset, --subspace, and --out")
    bins, smoothing, thresholds, dims = _diagnostic_knobs(args, config)
    plots_enabled = bool(_resolve(args, config, "plots", True))
    if getattr(args, "no_plots", False):
        plots_enabled = False

    ds = read_dataset(dataset_dir)
    bundle = load_bundle(subspace_path)
    sub = bundle.single
    aggregation = Aggregation.parse(bundle.aggregation)
    cc = diagnostics.cluster_coords(ds, sub, aggregation)
    cc_norm = diagnostics.normalize_by_content(cc)
    matrix = diagnostics.js_distance_matrix(cc, bins=bins, smoothing=smoothing)
    report = diagnostics.separability_report(cc, thresholds, dims=dims)
    nearest = diagnostics.nearest_style_report(matrix)

    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports.coords_to_csv(cc, out_dir / "coords.csv")
    reports.js_to_csv(matrix, out_dir / "js_matrix.csv")
    reports.js_to_json(matrix, out_dir / "js_matrix.json")
    reports.separability_to_json(report, out_dir / "separability.json")
    reports.nearest_to_json(nearest, out_dir / "nearest_styles.json")
    if plots_enabled:
        from . import plots
        plots.save_coords_scatter(cc, cc_norm, out_dir / "coords_scatter.png")
        plots.save_js_heatmap(matrix, out_dir / "js_heatmap.png")
    log.info("diag: %s -> %s", dataset_dir, out_dir)
    _say(args, config,
         f"verdict {report.verdict.value} "
         f"(raw {report.silhouette_raw:.4f}, norm {report.silhouette_norm:.4f}, "
         f"delta {report.delta:.4f})")
    return EXIT_OK


def _cmd_rank(args, config) -> int:
    dataset_dirs = _resolve(args, config, "datasets", None)
    baseline = _resolve(args, config, "baseline", None)
    out = _resolve(args, config, "out", None)
    if not dataset_dirs or not baseline or not out:
        raise FormatError("rank needs --datasets, --baseline, and --out")
    k, centering, aggregation = _estimation_knobs(args, config)
    _, _, thresholds, dims = _diagnostic_knobs(args, config)

    loaded = [(str(d), read_dataset(d)) for d in dataset_dirs]
    first = loaded[0][1]
    for name, ds in loaded[1:]:
        if ds.dim != first.dim:
            raise FormatError(f"dataset {name} has dim {ds.dim}, expected {first.dim}")
        if ds.content_labels != first.content_labels or ds.style_labels != first.style_labels:
            raise FormatError(f"dataset {name} disagrees on label sets")

    results = {}
    for name, ds in loaded:
        slice_ds = subspace_estimation_slice(ds, baseline)
        bundle = estimate_bundle(slice_ds, k, center=centering, aggregation=aggregation)
        cc = diagnostics.cluster_coords(ds, bundle.single,
                                        Aggregation.parse(bundle.aggregation))
        results[name] = diagnostics.separability_report(cc, thresholds, dims=dims)
    ranked = diagnostics.rank_templates(results)
    reports.rank_table_to_json(ranked, out)
    for i, (name, report) in enumerate(ranked):
        _say(args, config, f"{i + 1}. {name}  delta={report.delta:.4f} "
                           f"norm={report.silhouette_norm:.4f} verdict={report.verdict.value}")
    log.info("rank: %d datasets -> %s", len(ranked), out)
    return EXIT_OK


def _read_f32(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) % 4 != 0:
        raise FormatError(f"{path}: length {len(data)} is not a multiple of 4 bytes")
    return np.frombuffer(data, dtype="<f4").astype(np.float64)


def _cmd_edit(args, config) -> int:
    subspace_path = _resolve(args, config, "subspace", None)
    orig_path = _resolve(args, config, "orig", None)
    new_path = _resolve(args, config, "new", None)
    out = _resolve(args, config, "out", None)
    if not subspace_path or not orig_path or not new_path or not out:
        raise FormatError("edit needs --subspace, --orig, --new, and --out")
    bundle = load_bundle(subspace_path)
    dim = bundle.dim
    s_orig = _read_f32(orig_path)
    s_new = _read_f32(new_path)
    if s_orig.shape != s_new.shape:
        raise FormatError(
            f"vector files disagree: {s_orig.shape[0]} vs {s_new.shape[0]} floats")
    if s_orig.shape[0] % dim != 0:
        raise FormatError(
            f"vector length {s_orig.shape[0]} is not a multiple of subspace dim {dim}")
    steps = s_orig.shape[0] // dim
    if len(bundle.subspaces) not in (1, steps):
        raise FormatError(
            f"bundle holds {len(bundle.subspaces)} subspaces but input has {steps} timesteps")
    orig_rows = s_orig.reshape(steps, dim)
    new_rows = s_new.reshape(steps, dim)
    edited = np.empty_like(orig_rows)
    for t in range(steps):
        sub = bundle.subspaces[0] if len(bundle.subspaces) == 1 else bundle.subspaces[t]
        edited[t] = edit(sub, EditRequest(orig_rows[t], new_rows[t]))
    _atomic_write_bytes(Path(out), np.ascontiguousarray(edited, dtype="<f4").tobytes())
    log.info("edit: %s + %s -> %s", orig_path, new_path, out)
    _say(args, config, f"wrote {steps}x{dim} edited vector(s) to {out}")
    return EXIT_OK


def _cmd_validate(args, config) -> int:
    dataset_dir = _resolve(args, config, "dataset", None)
    if not dataset_dir:
        raise FormatError("validate needs --dataset")
    ds = read_dataset(dataset_dir)
    _say(args, config,
         f"ok: dim={ds.dim} timesteps={ds.timesteps} samples={len(ds.samples)} "
         f"contents={len(ds.content_labels)} styles={len(ds.style_labels)}")
    return EXIT_OK


_HANDLERS = {
    "synth": _cmd_synth,
    "subspace": _cmd_subspace,
    "diag": _cmd_diag,
    "rank": _cmd_rank,
    "edit": _cmd_edit,
    "validate": _cmd_validate,
}


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON config file; flags override its keys")
    shared.add_argument("--seed", type=int, help="seed override (synth noise stream)")
    shared.add_argument("--out", help="output file or directory")
    shared.add_argument("--quiet", action="store_true", help="suppress informational output")

    parser = argparse.ArgumentParser(
        prog="concept-lens",
        description="Concept-subspace estimation and separability diagnostics")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("synth", parents=[shared],
                            help="generate a synthetic dataset from a model spec and grid")
    p.add_argument("--spec", help="synthetic model spec JSON (materialized or recipe form)")
    p.add_argument("--grid", help="prompt grid JSON")

    p = commands.add_parser("subspace", parents=[shared],
                            help="estimate a concept subspace from a dataset slice")
    p.add_argument("--dataset", help="ingestion-format dataset directory")
    p.add_argument("--baseline", help="baseline content label held fixed in the slice")
    p.add_argument("--k", help="subspace dimension or 'auto'")
    p.add_argument("--no-centering", action="store_true",
                   help="skip mean-centering before the eigendecomposition")
    p.add_argument("--aggregation", help="mean | select:<t> | per-timestep")

    p = commands.add_parser("diag", parents=[shared],
                            help="run the diagnostic battery and write reports")
    p.add_argument("--dataset")
    p.add_argument("--subspace", help="subspace JSON written by the subspace verb")
    p.add_argument("--bins", type=int, help="histogram bins per dimension")
    p.add_argument("--smoothing", type=float, help="histogram smoothing epsilon")
    p.add_argument("--t-delta", dest="t_delta", type=float, help="entanglement delta threshold")
    p.add_argument("--t-low", dest="t_low", type=float, help="inexpressive score threshold")
    p.add_argument("--silhouette-dims", dest="silhouette_dims", choices=("all", "top2"))
    p.add_argument("--no-plots", action="store_true", help="skip figure rendering")

    p = commands.add_parser("rank", parents=[shared],
                            help="rank datasets (prompt templates) by separability")
    p.add_argument("--datasets", nargs="+", help="dataset directories to compare")
    p.add_argument("--baseline")
    p.add_argument("--k")
    p.add_argument("--no-centering", action="store_true")
    p.add_argument("--aggregation")
    p.add_argument("--t-delta", dest="t_delta", type=float)
    p.add_argument("--t-low", dest="t_low", type=float)
    p.add_argument("--silhouette-dims", dest="silhouette_dims", choices=("all", "top2"))

    p = commands.add_parser("edit", parents=[shared],
                            help="apply the projection edit to raw .f32 vectors")
    p.add_argument("--subspace")
    p.add_argument("--orig", help=".f32 file with the source score vector(s)")
    p.add_argument("--new", help=".f32 file with the style-donor score vector(s)")

    p = commands.add_parser("validate", parents=[shared],
                            help="check an ingestion-format dataset directory")
    p.add_argument("--dataset")

    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("CONCEPT_LENS_LOG", "WARNING"),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr)
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        return _HANDLERS[args.command](args, config)
    except ConceptLensError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
