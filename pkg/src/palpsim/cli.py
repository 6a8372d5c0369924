"""Command-line entry points.

Subcommands:
    run        one condition from a config file and/or flags
    matrix     the full strategy x mode condition sweep
    export-gt  write the ground-truth tumor cloud as PLY
    eval       F-score an external reconstruction PLY against a ground-truth PLY
"""

from __future__ import annotations

import argparse
import sys

from .evaluation import fscore
from .experiment import (
    config_from_flat,
    load_config_file,
    run_experiment,
    run_matrix,
    table1_matrix,
)
from .phantom import build_phantom
from .ply import export_ply, read_ply


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--seed", type=int, help="base random seed")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--trials", type=int, help="trials per condition")
    p.add_argument("--strategy", choices=["bo", "rs"], help="cell-selection strategy")
    p.add_argument("--mode", choices=["cf", "discrete"], help="palpation mode")
    p.add_argument("--shape", choices=["hemisphere", "ellipsoid", "crescent"])
    p.add_argument("--budget", type=int, help="palpations per trial")


def _flags_to_flat(args) -> dict:
    flat = {}
    for key in ("seed", "trials", "strategy", "mode", "shape", "budget"):
        v = getattr(args, key, None)
        if v is not None:
            flat[key] = v
    return flat


def _build_config(args):
    flat = load_config_file(args.config) if args.config else {}
    flat.update(_flags_to_flat(args))
    return config_from_flat(flat)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="palpsim",
                                     description="Tactile tumor localization simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment condition")
    _add_common(p_run)

    p_matrix = sub.add_parser("matrix", help="run the full condition matrix")
    _add_common(p_matrix)

    p_gt = sub.add_parser("export-gt", help="export the ground-truth tumor cloud")
    _add_common(p_gt)
    p_gt.add_argument("--samples", type=int, default=2000)
    p_gt.add_argument("--file", default="gt.ply", help="output PLY path")

    p_eval = sub.add_parser("eval", help="score a reconstruction PLY against a GT PLY")
    p_eval.add_argument("recon", help="reconstructed cloud (ascii PLY)")
    p_eval.add_argument("gt", help="ground-truth cloud (ascii PLY)")
    p_eval.add_argument("--r", type=float, default=0.003, help="distance threshold (m)")

    args = parser.parse_args(argv)

    if args.command == "run":
        cfg = _build_config(args)
        rep = run_experiment(cfg, args.out)
        return 0 if rep.n_failed < len(rep.trials) else 1

    if args.command == "matrix":
        base = _build_config(args)
        shapes = [args.shape] if args.shape else ["hemisphere", "crescent"]
        cfgs = table1_matrix(seed=base.seed, trials=base.trials, shapes=shapes)
        if args.strategy:
            cfgs = [c for c in cfgs if c.strategy == args.strategy]
        if args.mode:
            cfgs = [c for c in cfgs if c.mode == args.mode]
        run_matrix(cfgs, args.out)
        return 0

    if args.command == "export-gt":
        cfg = _build_config(args)
        phantom = build_phantom(cfg.phantom, cfg.tumor)
        cloud = phantom.ground_truth_cloud(args.samples, seed=[cfg.seed, 9001])
        export_ply(cloud, args.file)
        print(f"wrote {len(cloud)} points to {args.file}")
        return 0

    if args.command == "eval":
        recon = read_ply(args.recon)
        gt = read_ply(args.gt)
        rep = fscore(recon, gt, args.r)
        print(f"precision={rep.precision:.4f} recall={rep.recall:.4f} "
              f"fscore={rep.fscore:.4f} (r={args.r * 1e3:.1f} mm, "
              f"n_recon={rep.n_recon}, n_gt={rep.n_gt})")
        return 0

    return 2


if __name__ == "__main__":
    sys.exit(main())
