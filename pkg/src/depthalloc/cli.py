"""Command-line entry point: ``depthalloc <quantize-monocular|allocate|binocular>``.

Exit codes: 0 success, 2 configuration or usage error, 3 solver failure or
timeout, 4 I/O error.
"""
from __future__ import annotations

import argparse
import hashlib
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .config import RunConfig, from_dict, merge, parse_text, resolve_paths
from .errors import DepthAllocError, SolverError
from .manifest import RunManifest
from .pipeline import quantize_monocular, run_allocation, run_binocular, write_allocation, write_monocular
from .scenarios import scenario_runs

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4


def _floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="depthalloc", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON run configuration")
    common.add_argument("--output-dir", help="overrides output_dir from the configuration")
    common.add_argument("--scenario", help="named preset applied on top of the configuration")
    sub.add_parser("quantize-monocular", parents=[common], help="eye focal planes per age and pupil")
    al = sub.add_parser("allocate", parents=[common], help="optimal focal-plane allocation sweep")
    al.add_argument("--t-max", type=int, help="largest budget T in the sweep")
    bi = sub.add_parser("binocular", parents=[common], help="stereo depth levels and horopter traces")
    bi.add_argument("--ipd-mm", type=float)
    bi.add_argument("--fixation-m", type=_floats, help="comma-separated fixation distances")
    bi.add_argument("--H", type=float, dest="H", help="fixed Hering-Hillebrand deviation for every trace")
    bi.add_argument("--apply-floor", action="store_true", default=None)
    return ap


def _base_data(args) -> tuple:
    """(config dict, directory that relative paths resolve against)."""
    if args.config:
        with open(args.config) as fh:
            data = parse_text(fh.read())
        return data, os.path.dirname(os.path.abspath(args.config))
    return {}, os.getcwd()


def _cli_overrides(args) -> dict:
    ov = {}
    if getattr(args, "t_max", None) is not None:
        ov.setdefault("solver", {})["t_max"] = args.t_max
    bino = {}
    if getattr(args, "ipd_mm", None) is not None:
        bino["ipd_mm"] = args.ipd_mm
    if getattr(args, "fixation_m", None) is not None:
        bino["fixation_m"] = args.fixation_m
    if getattr(args, "H", None) is not None:
        bino["H"] = args.H
    if getattr(args, "apply_floor", None):
        bino["apply_floor"] = True
    if bino:
        ov["binocular"] = bino
    return ov


def resolve_runs(args) -> list:
    """[(label, RunConfig)] with every path absolute."""
    data, base_dir = _base_data(args)
    data = merge(data, _cli_overrides(args))
    if args.scenario:
        # presets only touch the train and weighting keys, so command-line flags survive
        runs = scenario_runs(args.scenario, data)
    else:
        runs = [("", from_dict(data))]
    out = []
    for label, cfg in runs:
        cfg = resolve_paths(cfg, base_dir)
        if args.output_dir:
            cfg.output_dir = os.path.abspath(args.output_dir)
        out.append((label, cfg))
    return out


def _allocate_one(label, cfg: RunConfig, root):
    """One scenario run; returns (relative files, stage times). Runs in a worker when batched."""
    manifest = RunManifest(cfg.scenario_name, cfg.hash(), "allocate")
    out_dir = os.path.join(root, label) if label else root
    res = run_allocation(cfg, manifest)
    write_allocation(res, cfg, out_dir, manifest, root)
    return manifest.files, manifest.stages


def _threads() -> int:
    raw = os.environ.get("DEPTHALLOC_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise DepthAllocError(f"DEPTHALLOC_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def cmd_allocate(runs) -> RunManifest:
    root = runs[0][1].output_dir
    os.makedirs(root, exist_ok=True)
    manifest = RunManifest(runs[0][1].scenario_name, _batch_hash(runs), "allocate")
    workers = min(_threads(), len(runs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_allocate_one, *zip(*[(l, c, root) for l, c in runs])))
    else:
        parts = [_allocate_one(label, cfg, root) for label, cfg in runs]
    for (label, _), (files, stages) in zip(runs, parts):
        manifest.files.extend(files)
        for k, v in stages.items():
            manifest.stages[f"{label}/{k}" if label else k] = v
    manifest.write(root)
    return manifest


def _batch_hash(runs) -> str:
    if len(runs) == 1:
        return runs[0][1].hash()
    return hashlib.sha256("".join(c.hash() for _, c in runs).encode()).hexdigest()


def cmd_quantize(cfg: RunConfig) -> RunManifest:
    manifest = RunManifest(cfg.scenario_name, cfg.hash(), "quantize-monocular")
    with manifest.stage("quantize"):
        rows = quantize_monocular(cfg)
        write_monocular(rows, cfg.output_dir, manifest)
    manifest.write(cfg.output_dir)
    return manifest


def cmd_binocular(cfg: RunConfig) -> RunManifest:
    manifest = RunManifest(cfg.scenario_name, cfg.hash(), "binocular")
    run_binocular(cfg, cfg.output_dir, manifest)
    manifest.write(cfg.output_dir)
    return manifest


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        runs = resolve_runs(args)
        if args.command == "allocate":
            cmd_allocate(runs)
        else:
            if len(runs) != 1:
                raise DepthAllocError(f"scenario {args.scenario!r} is a batch; only 'allocate' accepts it")
            cfg = runs[0][1]
            (cmd_quantize if args.command == "quantize-monocular" else cmd_binocular)(cfg)
    except SolverError as exc:
        print(f"depthalloc: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except DepthAllocError as exc:
        print(f"depthalloc: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"depthalloc: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
