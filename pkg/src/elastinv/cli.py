"""Command-line entry point.

    elastinv pipeline --config kite.ini --seed 3 --out runs
    elastinv locate --config kite.ini --out runs
    elastinv invert --config kite.ini --out runs --z-star -2.4,3
    elastinv report --config kite.ini --out runs

Each command works inside ``OUT/<config hash>-s<seed>/``; later stages
reuse the data written by earlier ones.  Exit codes: 0 success, 2 config
error, 3 forward-solver failure, 4 inversion failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, ExperimentConfig
from .dataset import FarFieldData
from .enkf import InversionError
from .forward import ScatteringSolverError
from .geometry import ShapeError
from .pipeline import (RunPaths, StageError, generate_data, invert, locate, run_dir, run_pipeline, truth_points,
                       write_inversion)

EXIT_OK, EXIT_CONFIG, EXIT_FORWARD, EXIT_INVERSION = 0, 2, 3, 4


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _point(text: str):
    try:
        x, y = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected two comma-separated numbers, e.g. -2,3") from None
    return [x, y]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI experiment config (defaults are used when omitted)")
    common.add_argument("--seed", type=_seed, help="override the config seed")
    common.add_argument("--out", default="runs", help="root directory for run folders (default: runs)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for forward solves")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="elastinv", description="Localise and reconstruct a rigid elastic obstacle.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="simulate noisy far-field data")
    sub.add_parser("locate", parents=[common], help="ESM localisation on the run's data")
    inv = sub.add_parser("invert", parents=[common], help="EnKF shape inversion")
    inv.add_argument("--z-star", type=_point, help="initial center; defaults to the run's ESM argmin")
    pipe = sub.add_parser("pipeline", parents=[common], help="generate, locate and invert")
    pipe.add_argument("--z-star", type=_point, help="skip localisation and start from this center")
    sub.add_parser("report", parents=[common], help="print the summaries stored in the run folder")
    return p


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    return cfg


def _data(cfg, paths: RunPaths):
    if not paths.data.exists():
        noisy, clean = generate_data(cfg)
        paths.mkdir()
        paths.config.write_text(cfg.canonical())
        noisy.save(paths.data)
        clean.save(paths.clean)
        return noisy, clean
    clean = FarFieldData.load(paths.clean) if paths.clean.exists() else None
    return FarFieldData.load(paths.data), clean


def _emit(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


def run(args) -> int:
    cfg = _load_config(args)
    paths = run_dir(cfg, args.out)
    if args.command == "pipeline":
        _emit(run_pipeline(cfg, args.out, args.z_star, args.threads))
    elif args.command == "generate":
        noisy, _ = _data(cfg, paths)
        _emit({"data": str(paths.data), "sha256": noisy.extra.get("sha256"),
               "realized_noise": noisy.extra.get("realized_noise"), "shape": list(noisy.values.shape)})
    elif args.command == "locate":
        noisy, _ = _data(cfg, paths)
        grid = locate(noisy, cfg)
        grid.write(paths.grid_csv, paths.grid_json)
        _emit(grid.summary())
    elif args.command == "invert":
        noisy, clean = _data(cfg, paths)
        z_star = args.z_star
        if z_star is None:
            if not paths.grid_json.exists():
                raise ConfigError("invert needs --z-star or a prior `locate` in the same run folder")
            z_star = json.loads(paths.grid_json.read_text())["argmin"]
        result, obs = invert(noisy, cfg, z_star, clean, truth_points(cfg), args.threads)
        write_inversion(result, paths)
        _emit({"z_star": list(z_star), "final_d_H": result.records[-1].d_H, "trajectory": str(paths.trajectory),
               "boundary": str(paths.boundary), "covariance_source": obs.cov_source})
    elif args.command == "report":
        found = {}
        for name in ("report", "grid_json"):
            path = getattr(paths, name)
            if path.exists():
                found[path.name] = json.loads(path.read_text())
        if paths.trajectory.exists():
            lines = paths.trajectory.read_text().splitlines()
            found["trajectory"] = {"iterations": len(lines) - 1,
                                   "d_H": [json.loads(s).get("d_H") for s in lines]}
        if not found:
            raise ConfigError(f"no results in {paths.root}")
        _emit(found)
    return EXIT_OK


def _code(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        exc = exc.__cause__ or exc
    if isinstance(exc, (ConfigError, ShapeError)):
        return EXIT_CONFIG
    if isinstance(exc, ScatteringSolverError):
        return EXIT_FORWARD
    if isinstance(exc, InversionError):
        return EXIT_INVERSION
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return run(args)
    except (ConfigError, ScatteringSolverError, InversionError, StageError, ShapeError) as exc:
        print(f"elastinv: error: {exc}", file=sys.stderr)
        return _code(exc)


if __name__ == "__main__":
    sys.exit(main())
