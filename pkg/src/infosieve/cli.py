"""Command-line interface.

Every command writes a run manifest (``<primary output stem>.manifest.json``)
recording the arguments, input and output digests, package version and wall
time.  ``infosieve replay MANIFEST`` reruns a command and checks that its
outputs are byte-identical.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""
import argparse
import hashlib
import json
import math
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .data import PreprocSpec, load_csv, save_csv
from .evaluation import (
    PRESETS,
    iterations_to_tol,
    log_linear_fit,
    run_benchmark,
    save_benchmark,
    save_trace,
    score_recovery,
    trace_convergence,
)
from .exceptions import InputError, NumericalError
from .layer import FitConfig
from .metrics import nats_to_bits
from .model import StopRule, fit_sieve, load_model, reconstruct, save_model, transform
from .synth import GenSpec, generate

__all__ = ["main", "manifest_path"]

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _nonnegative_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be a non-negative integer, got {text}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _nonnegative_float(text):
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest_path(primary_output):
    p = Path(primary_output)
    return p.with_name(p.stem + ".manifest.json")


class _Run:
    """Inputs and outputs touched by one command, for the manifest."""

    def __init__(self):
        self.inputs = []
        self.outputs = []

    def read(self, path):
        self.inputs.append(str(path))
        return path

    def wrote(self, path):
        self.outputs.append(str(path))
        return path


def _fit_config(args):
    return FitConfig(
        n_restarts=args.restarts,
        max_iterations=args.max_iterations,
        tol=args.tol,
        seed=args.seed,
    )


def cmd_fit(args, run):
    data = load_csv(run.read(args.input), has_header=args.header)
    preproc = PreprocSpec(gaussianize=args.gaussianize)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = fit_sieve(
            data,
            _fit_config(args),
            StopRule(max_layers=args.layers, min_tc=args.min_tc),
            preproc,
            channel_noise=not args.deterministic_remainder,
        )
    save_model(model, run.wrote(args.model))
    unit, scale = ("bits", nats_to_bits) if args.bits else ("nats", lambda v: v)
    for k, layer in enumerate(model.layers, start=1):
        flag = "" if layer.converged else "  (not converged)"
        print(f"layer {k}: tc={scale(layer.tc_contribution):.6f} {unit}  iterations={layer.iterations}{flag}")
    print(f"total: {scale(model.total_tc):.6f} {unit}")
    if not any(layer.converged for layer in model.layers):
        print("error: no layer converged", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_transform(args, run):
    model = load_model(run.read(args.model))
    data = load_csv(run.read(args.input), has_header=args.header)
    factors, rem = transform(model, data)
    save_csv(run.wrote(args.factors), factors)
    if args.remainder:
        save_csv(run.wrote(args.remainder), rem.values)
    return EXIT_OK


def cmd_reconstruct(args, run):
    model = load_model(run.read(args.model))
    factors = load_csv(run.read(args.factors)).values
    out = reconstruct(model, factors, uncenter=not args.no_uncenter)
    save_csv(run.wrote(args.output), out.values)
    return EXIT_OK


def cmd_generate(args, run):
    capacity = args.capacity * math.log(2.0) if args.bits else args.capacity
    spec = GenSpec(
        m=args.sources,
        k=args.children,
        total_capacity=capacity,
        N=args.samples,
        seed=args.seed,
        rotate=args.rotate,
        global_capacity=args.global_capacity,
    )
    ds = generate(spec)
    save_csv(run.wrote(args.out_x), ds.X)
    if args.out_z:
        save_csv(run.wrote(args.out_z), ds.Z)
    if args.out_meta:
        with open(run.wrote(args.out_meta), "w") as fh:
            json.dump(ds.meta(), fh, indent=1)
            fh.write("\n")
    return EXIT_OK


def cmd_evaluate(args, run):
    factors = load_csv(run.read(args.factors), has_header=args.header).values
    sources = load_csv(run.read(args.sources), has_header=args.header).values
    report = score_recovery(factors, sources, allow_reuse=args.allow_reuse)
    with open(run.wrote(args.report), "w") as fh:
        json.dump(report.to_dict(), fh, indent=1)
        fh.write("\n")
    print(f"mean score: {report.mean_score:.6f}")
    return EXIT_OK


def cmd_trace(args, run):
    data = load_csv(run.read(args.input), has_header=args.header)
    cfg = FitConfig(seed=args.seed)
    trace = trace_convergence(
        data, cfg, restart=args.restart, final_tol=args.final_tol, max_iterations=args.max_iterations
    )
    save_trace(run.wrote(args.out), trace)
    reached = iterations_to_tol(trace, args.tol)
    slope, r2, _ = log_linear_fit(trace)
    print(f"iterations: {len(trace) - 1}")
    print(f"iterations to tol {args.tol:g}: {reached if reached is not None else 'not reached'}")
    print(f"log-error slope: {slope:.6g}  R^2: {r2:.4f}")
    return EXIT_OK


def cmd_benchmark(args, run):
    cfg = FitConfig(n_restarts=args.restarts, max_iterations=args.max_iterations)

    def progress(k, seed, sieve, pca):
        print(f"k={k} seed={seed}: sieve={sieve:.4f} pca={pca:.4f}", file=sys.stderr)

    rows = run_benchmark(args.preset, seeds=args.seeds, ks=args.children, cfg=cfg, progress=progress)
    save_benchmark(run.wrote(args.out), rows)
    for row in rows:
        print(f"k={row.k:<3d} {row.method:<5s} {row.mean:.4f} +- {row.std:.4f}")
    return EXIT_OK


def cmd_replay(args, run):
    with open(args.manifest) as fh:
        manifest = json.load(fh)
    try:
        argv = manifest["argv"]
        cwd = manifest["cwd"]
        inputs = manifest["inputs"]
        outputs = manifest["outputs"]
    except (KeyError, TypeError) as exc:
        raise InputError(f"{args.manifest}: not a run manifest ({exc})") from exc
    if argv and argv[0] == "replay":
        raise InputError("refusing to replay a replay manifest")
    previous = os.getcwd()
    os.chdir(cwd)
    try:
        for path, digest in inputs.items():
            if sha256(path) != digest:
                raise InputError(f"input {path} changed since the recorded run")
        code = main(argv)
        if code != manifest.get("exit_code", EXIT_OK):
            print(f"replay exited with {code}, recorded {manifest.get('exit_code')}", file=sys.stderr)
            return EXIT_NUMERICAL
        same = True
        for path, digest in outputs.items():
            match = os.path.exists(path) and sha256(path) == digest
            same &= match
            print(f"{'identical' if match else 'DIFFERS'}: {path}")
    finally:
        os.chdir(previous)
    return EXIT_OK if same else EXIT_NUMERICAL


def build_parser():
    parser = argparse.ArgumentParser(prog="infosieve", description="Linear information sieve.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def fit_options(p):
        p.add_argument("--restarts", type=_positive_int, default=10)
        p.add_argument("--max-iterations", type=_nonnegative_int, default=10000)
        p.add_argument("--tol", type=_positive_float, default=1e-8)
        p.add_argument("--seed", type=_nonnegative_int, default=0)

    p = sub.add_parser("fit", help="fit a sieve and write the model JSON")
    p.add_argument("--input", required=True)
    p.add_argument("--header", action="store_true", help="input has a header row")
    p.add_argument("--layers", type=_positive_int, default=10)
    p.add_argument("--min-tc", type=_nonnegative_float, default=1e-3)
    fit_options(p)
    p.add_argument("--gaussianize", choices=("none", "rank"), default="none")
    p.add_argument("--deterministic-remainder", action="store_true",
                   help="form remainders from w.x instead of a channel realization")
    p.add_argument("--bits", action="store_true", help="print TC in bits")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_fit, primary="model")

    p = sub.add_parser("transform", help="compute factors and remainder")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--factors", required=True)
    p.add_argument("--remainder")
    p.set_defaults(func=cmd_transform, primary="factors")

    p = sub.add_parser("reconstruct", help="rebuild data from factors alone")
    p.add_argument("--model", required=True)
    p.add_argument("--factors", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--no-uncenter", action="store_true")
    p.set_defaults(func=cmd_reconstruct, primary="output")

    p = sub.add_parser("generate", help="sample synthetic source/children data")
    p.add_argument("--sources", type=_positive_int, required=True)
    p.add_argument("--children", type=_positive_int, required=True)
    p.add_argument("--capacity", type=_positive_float, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--seed", type=_nonnegative_int, default=0)
    p.add_argument("--rotate", action="store_true")
    p.add_argument("--global-capacity", action="store_true")
    p.add_argument("--bits", action="store_true", help="capacity is given in bits")
    p.add_argument("--out-x", required=True)
    p.add_argument("--out-z")
    p.add_argument("--out-meta")
    p.set_defaults(func=cmd_generate, primary="out_x")

    p = sub.add_parser("evaluate", help="score factors against true sources")
    p.add_argument("--factors", required=True)
    p.add_argument("--sources", required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--allow-reuse", action="store_true", help="let sources share a component")
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_evaluate, primary="report")

    p = sub.add_parser("trace", help="record the objective per iteration")
    p.add_argument("--input", required=True)
    p.add_argument("--header", action="store_true")
    p.add_argument("--seed", type=_nonnegative_int, default=0)
    p.add_argument("--restart", type=_nonnegative_int, default=0)
    p.add_argument("--tol", type=_positive_float, default=1e-8)
    p.add_argument("--final-tol", type=_positive_float, default=1e-14)
    p.add_argument("--max-iterations", type=_nonnegative_int, default=100000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_trace, primary="out")

    p = sub.add_parser("benchmark", help="sieve versus PCA recovery scores")
    p.add_argument("--preset", choices=sorted(PRESETS), required=True)
    p.add_argument("--seeds", type=_positive_int, default=10)
    p.add_argument("--children", type=_positive_int, nargs="+", help="override the swept k values")
    p.add_argument("--restarts", type=_positive_int, default=10)
    p.add_argument("--max-iterations", type=_nonnegative_int, default=10000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_benchmark, primary="out")

    p = sub.add_parser("replay", help="rerun a command from its manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay, primary=None)
    return parser


def _write_manifest(args, argv, run, code, seconds):
    if args.primary is None:
        return
    config = {k: v for k, v in vars(args).items() if k not in ("func", "primary")}
    manifest = {
        "tool": "infosieve",
        "version": __version__,
        "command": args.command,
        "argv": list(argv),
        "cwd": os.getcwd(),
        "config": config,
        "seed": config.get("seed"),
        "inputs": {p: sha256(p) for p in run.inputs},
        "outputs": {p: sha256(p) for p in run.outputs if os.path.exists(p)},
        "exit_code": code,
        "numpy_version": np.__version__,
        "duration_seconds": seconds,
    }
    with open(manifest_path(getattr(args, args.primary)), "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    run = _Run()
    start = time.perf_counter()
    try:
        code = args.func(args, run)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InputError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    _write_manifest(args, argv, run, code, time.perf_counter() - start)
    return code


if __name__ == "__main__":
    sys.exit(main())
