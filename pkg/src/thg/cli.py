"""Command line entry point: calibrate, build-grid, sample, compare.

Exit codes are 0 on success, 1 on a usage error and 2 when a run fails.
Relative output paths are resolved under ``$THG_OUTPUT_DIR`` when it is set.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .calibration import CoarseGrid, ErrorConstantProfile, build_coarse_grid
from .harness import OUTPUT_DIR_ENV, ExperimentConfig, calibrate, compare, sample_one

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _out_path(path) -> Path:
    path = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _write_text(path: Path, text: str):
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _write_json(path: Path, data):
    _write_text(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def cmd_calibrate(args):
    config = ExperimentConfig.load(args.config)
    out_dir = _out_path(args.out_dir) if args.out_dir else config.output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    profile = calibrate(config)
    cap = config["cap"]
    csv_path = out_dir / "profile.csv"
    _write_text(csv_path, profile.to_csv(config["rho"], config.p, cap))
    _write_json(out_dir / "profile.json", {
        "config": config.to_dict(),
        "N": config["N"],
        "p": config.p,
        "i_hi": config.i_hi,
        "batch_size": profile.batch_size,
        "version": __version__,
    })
    print(f"profile: {csv_path} ({profile.N} steps, batch {profile.batch_size})")


def cmd_build_grid(args):
    path = Path(args.profile)
    profile = ErrorConstantProfile.from_csv(path.read_text())
    meta = path.with_suffix(".json")
    i_hi = args.i_hi
    if i_hi is None and meta.exists():
        i_hi = json.loads(meta.read_text()).get("i_hi")
    N = profile.N
    i_hi = N if i_hi is None else i_hi
    if not 0 <= i_hi <= N:
        raise UsageError(f"--i-hi must lie in [0, {N}]")
    grid = build_coarse_grid(profile, args.rho, args.p, cap=args.cap)
    out = _out_path(args.out)
    grid.save(out)
    nfe = N + sum(1 for i in grid.indices if i < min(i_hi, N))
    print(f"|C| = {len(grid)}")
    print(f"projected NFE = {nfe} (N = {N}, i_hi = {i_hi})")
    print(f"grid: {out}")


def cmd_sample(args):
    config = ExperimentConfig.load(args.config)
    grid = CoarseGrid.load(args.grid, config.schedule(), config["schedule"].get("spacing")) if args.grid else None
    record = sample_one(config, grid, args.method, args.index)
    out = _out_path(args.out)
    record.write_csv(out)
    record.write_json(out.with_suffix(".json"))
    print(f"{args.method}: nfe = {record.nfe}, trajectory: {out}")


def cmd_compare(args):
    config = ExperimentConfig.load(args.config)
    grid = CoarseGrid.load(args.grid, config.schedule(), config["schedule"].get("spacing"))
    out = _out_path(args.out)
    _write_json(out.with_suffix(".json"), {"config": config.to_dict(), "grid": grid.to_json(),
                                           "version": __version__})
    with open(out, "w", newline="\n") as sink:
        report = compare(config, grid, sink)
    for row in report.aggregate():
        print(f"{row['method']}: nfe = {row['nfe']:g}, mean endpoint error = {row['endpoint_error']:.6g}")
    print(f"report: {out}")


def build_parser():
    parser = _Parser(prog="thg", description="Multirate guided diffusion sampling experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("calibrate", help="Richardson error-constant profile")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", help="directory for profile.csv and profile.json")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("build-grid", help="greedy coarse grid from a profile")
    p.add_argument("--profile", required=True)
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--cap", type=int)
    p.add_argument("--i-hi", type=int, dest="i_hi")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_grid)

    p = sub.add_parser("sample", help="sample one trajectory")
    p.add_argument("--config", required=True)
    p.add_argument("--grid")
    p.add_argument("--method", choices=("cfg", "thg"), required=True)
    p.add_argument("--index", type=int, default=0, help="evaluation trajectory index")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("compare", help="guided baseline versus multirate against the oracle")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"thg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"thg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
