"""Exporter CLI: `export` runs a checkpoint over a prompt grid and writes the
ingestion format; `make-checkpoint` materializes a small random-weight
checkpoint for smoke tests and offline use."""

from __future__ import annotations

import argparse
import sys

from .export import ExportJob, GridError, PromptGrid, export
from .pipeline import create_checkpoint


def _cmd_export(args) -> int:
    grid = PromptGrid.from_json(args.grid)
    job = ExportJob(model=args.model, grid=grid, steps=args.steps, seeds=args.seeds,
                    out_dir=args.out, guidance_scale=args.guidance,
                    base_seed=args.seed, batch_size=args.batch_size)
    digest = export(job)
    n_cells = len(grid.contents) * len(grid.styles) * args.seeds
    if not args.quiet:
        print(f"exported {n_cells} prompt runs ({args.steps} steps each) to {args.out}")
        print(f"manifest digest {digest}")
    return 0


def _cmd_make_checkpoint(args) -> int:
    config = create_checkpoint(args.out, seed=args.seed, latent_size=args.latent_size,
                               model_id=args.model_id)
    if not args.quiet:
        print(f"wrote checkpoint {config.model_id!r} to {args.out} "
              f"(flat dim {config.flat_dim})")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="concept-lens-export",
        description="Capture per-step noise predictions into the ingestion format")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("export", help="run a checkpoint over a prompt grid")
    p.add_argument("--model", required=True, help="checkpoint directory")
    p.add_argument("--grid", required=True, help="prompt grid JSON")
    p.add_argument("--steps", type=int, required=True, help="denoising steps (T)")
    p.add_argument("--seeds", type=int, required=True, help="replicates per prompt")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--guidance", type=float, default=7.5, help="classifier-free guidance scale")
    p.add_argument("--seed", type=int, default=0, help="base seed (replicate r uses seed+r)")
    p.add_argument("--batch-size", type=int, default=1, help="prompts per forward pass")
    p.add_argument("--quiet", action="store_true")

    p = commands.add_parser("make-checkpoint", help="write a tiny random-weight checkpoint")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--latent-size", type=int, default=8)
    p.add_argument("--model-id", default="tiny-latent-diffusion")
    p.add_argument("--quiet", action="store_true")

    args = parser.parse_args(argv)
    try:
        if args.command == "export":
            return _cmd_export(args)
        return _cmd_make_checkpoint(args)
    except (GridError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
