"""Command-line front end: ``register``, ``degrade``, ``bench`` and ``plot``."""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from .degradations import (
    GroundTruth,
    add_noise,
    add_outliers,
    occlude,
    synth_deform,
    synthetic_cloud,
    write_truth,
)
from .errors import CPDRegError
from .metrics import CSV_HEADER, read_bench_csv, run_benchmark, write_bench_csv
from .pointset import load_points, normalize_pair, read_report, write_points, write_report
from .registration import RegistrationConfig, register
from .solvers import SolverVariant
from .svg import line_plot, overlay_scatter

log = logging.getLogger("cpdreg")

_DEFAULTS = RegistrationConfig()


class CLIError(Exception):
    pass


def _stem(path) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise CLIError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _csv_list(kind):
    def parse(text):
        try:
            return [kind(t) for t in text.split(",") if t.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid list: {text!r}") from None
    return parse


def _variant(text):
    try:
        return SolverVariant.parse(text)
    except CPDRegError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _add_model_flags(p, with_variant=True):
    p.add_argument("--omega", type=float, default=_DEFAULTS.omega, help="outlier weight in [0, 1)")
    p.add_argument("--beta", type=float, default=_DEFAULTS.beta, help="Gaussian kernel bandwidth")
    p.add_argument("--lambda", dest="lambda_reg", type=float, default=_DEFAULTS.lambda_reg,
                   help="regularisation weight")
    p.add_argument("--iters", type=int, default=_DEFAULTS.iterations, help="EM iterations")
    if with_variant:
        p.add_argument("--variant", type=_variant, default=_DEFAULTS.variant,
                       help="cpd, cpd-lowrank, fast or fast-lowrank")
    p.add_argument("--rank-fraction", type=float, default=_DEFAULTS.rank_fraction,
                   help="retained eigenpairs as a fraction of M for low-rank variants")
    p.add_argument("--seed", type=int, default=_DEFAULTS.seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpdreg", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("register", help="deform a model point set onto a scene point set")
    p.add_argument("model")
    p.add_argument("scene")
    _add_model_flags(p)
    p.add_argument("--no-normalize", action="store_true", help="skip the joint [-1, 1] normalization")
    p.add_argument("--swap", action="store_true", help="register the scene onto the model instead")
    p.add_argument("--out", help="transformed point file (default: <model>_registered.txt)")
    p.add_argument("--svg", help="optional overlay plot")
    p.add_argument("--report", help="run report (default: <model>_report.txt)")
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("degrade", help="apply a synthetic degradation to a point file")
    p.add_argument("input")
    p.add_argument("--kind", required=True, choices=["noise", "outliers", "occlusion", "deform"])
    p.add_argument("--stddev", type=float, help="noise standard deviation (default 0.1)")
    p.add_argument("--ratio", type=float, help="outlier-to-data ratio (default 0.6)")
    p.add_argument("--count", type=int, help="number of points to occlude")
    p.add_argument("--amplitude", type=float, help="deformation coefficient stddev (default 0.1)")
    p.add_argument("--warp-beta", type=float, help="deformation field bandwidth (default 2)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="degraded point file (default: <input>_<kind>.txt)")
    p.add_argument("--truth", help="truth file (default: <input>_<kind>_truth.txt)")
    p.set_defaults(func=cmd_degrade)

    p = sub.add_parser("bench", help="runtime sweep over cloud sizes and solver variants")
    p.add_argument("source", nargs="?", help="point file to resample (omit with --synthetic)")
    p.add_argument("--sizes", type=_csv_list(int), required=True, help="comma-separated M values")
    p.add_argument("--variants", type=_csv_list(_variant), required=True,
                   help="comma-separated solver variants")
    _add_model_flags(p, with_variant=False)
    p.add_argument("--synthetic", action="store_true", help="generate clouds instead of resampling")
    p.add_argument("--no-warmup", action="store_true", help="skip the discarded warm-up run per cell")
    p.add_argument("--csv", default="bench.csv")
    p.add_argument("--svg", default="bench.svg")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot", help="render a benchmark CSV or run report as SVG")
    p.add_argument("input")
    p.add_argument("--out", help="SVG path (default: <input>.svg)")
    p.set_defaults(func=cmd_plot)
    return parser


def _config(args, variant=None) -> RegistrationConfig:
    return RegistrationConfig(
        omega=args.omega,
        beta=args.beta,
        lambda_reg=args.lambda_reg,
        iterations=args.iters,
        variant=variant if variant is not None else args.variant,
        rank_fraction=args.rank_fraction,
        seed=args.seed,
        normalize=not getattr(args, "no_normalize", False),
    )


def cmd_register(args) -> int:
    X = load_points(args.model)
    Y = load_points(args.scene)
    if args.swap:
        X, Y = Y, X
    cfg = _config(args)
    result = register(X, Y, cfg)

    out = args.out or f"{_stem(args.model)}_registered.txt"
    report = args.report or f"{_stem(args.model)}_report.txt"
    write_points(result.transformed, out)

    entries = {
        "model": args.model,
        "scene": args.scene,
        "swapped": args.swap,
        **{k: v for k, v in cfg.as_dict().items() if k not in ("cache_dir", "tol")},
        "M": X.shape[0],
        "N": Y.shape[0],
        "D": X.shape[1],
        "rank": result.rank,
        "iterations_run": result.iterations,
        "sigma2_initial": result.sigma2_initial,
        "sigma2_final": result.sigma2_trace[-1] if result.sigma2_trace else result.sigma2_initial,
        **result.timing.as_strings(),
        **result.diagnostics,
        "sigma2_trace": result.sigma2_trace,
    }
    if result.normalization is not None:
        entries["norm_center"] = result.normalization.center
        entries["norm_scale"] = result.normalization.scale
    write_report(entries, report)

    if args.svg:
        _write_text(args.svg, overlay_scatter(Y, result.transformed, title="registration overlay"))
    log.info("wrote %s and %s", out, report)
    return 0


def cmd_degrade(args) -> int:
    pts = load_points(args.input)
    kind = args.kind
    allowed = {"noise": {"stddev"}, "outliers": {"ratio"}, "occlusion": {"count"},
               "deform": {"amplitude", "warp_beta"}}[kind]
    for flag in ("stddev", "ratio", "count", "amplitude", "warp_beta"):
        if getattr(args, flag) is not None and flag not in allowed:
            raise CLIError(f"--{flag.replace('_', '-')} does not apply to --kind {kind}")

    params = {"kind": kind, "input": args.input, "seed": args.seed}
    if kind == "noise":
        params["stddev"] = 0.1 if args.stddev is None else args.stddev
        out_pts = add_noise(pts, params["stddev"], args.seed)
        truth = GroundTruth.identity(pts)
    elif kind == "outliers":
        params["ratio"] = 0.6 if args.ratio is None else args.ratio
        out_pts = add_outliers(pts, params["ratio"], args.seed)
        truth = GroundTruth.identity(pts)
    elif kind == "occlusion":
        if args.count is None:
            raise CLIError("--kind occlusion requires --count")
        params["count"] = args.count
        out_pts, kept = occlude(pts, args.count, args.seed)
        # the occluded set becomes the model; index i corresponds to input row kept[i]
        truth = GroundTruth(np.arange(kept.shape[0]), pts[kept])
    else:
        params["amplitude"] = 0.1 if args.amplitude is None else args.amplitude
        params["warp_beta"] = 2.0 if args.warp_beta is None else args.warp_beta
        pair = synth_deform(pts, params["amplitude"], params["warp_beta"], args.seed)
        out_pts, truth = pair.scene, pair.truth

    out = args.out or f"{_stem(args.input)}_{kind}.txt"
    truth_path = args.truth or f"{_stem(args.input)}_{kind}_truth.txt"
    write_points(out_pts, out)
    write_truth(truth, truth_path)
    params.update(output=out, truth=truth_path, points_in=pts.shape[0], points_out=out_pts.shape[0])
    write_report(params, out + ".params.txt")
    return 0


def cmd_bench(args) -> int:
    if args.synthetic == (args.source is not None):
        raise CLIError("give either a source point file or --synthetic, not both or neither")
    if not args.sizes or not args.variants:
        raise CLIError("--sizes and --variants must be non-empty")
    source, generator = None, None
    if args.synthetic:
        generator = lambda n, seed: synthetic_cloud(n, 3, seed)  # noqa: E731
    else:
        raw = load_points(args.source)
        if max(args.sizes) > raw.shape[0]:
            raise CLIError(f"{args.source} has {raw.shape[0]} points, fewer than size {max(args.sizes)}")
        source, _, _ = normalize_pair(raw, raw)
    cfg = _config(args, variant=args.variants[0])
    records = run_benchmark(args.sizes, args.variants, cfg, seed=args.seed, source=source,
                            generator=generator, warmup=not args.no_warmup)
    write_bench_csv(records, args.csv)
    _write_text(args.svg, bench_svg(records))
    failed = [r for r in records if r.failed]
    for r in failed:
        print(f"cpdreg: cell M={r.M} variant={r.variant.value} failed: {r.error}", file=sys.stderr)
    return 0


def bench_svg(records) -> str:
    series = {}
    for r in records:
        pts = series.setdefault(r.variant.value, [])
        if not r.failed:
            pts.append((float(r.M), r.timing.t_iter))
    return line_plot(series, "M", "seconds", title="t_iter per variant", logx=True, logy=True)


def report_svg(entries: dict) -> str:
    trace = [float(v) for v in entries.get("sigma2_trace", "").split(",") if v]
    series = {"sigma2": [(float(i + 1), s) for i, s in enumerate(trace)]}
    return line_plot(series, "iteration", "sigma2", title="variance trace", logy=True)


def cmd_plot(args) -> int:
    try:
        with open(args.input, encoding="utf-8") as fh:
            first = fh.readline().strip()
    except OSError as exc:
        raise CLIError(f"cannot read {args.input}: {exc.strerror or exc}") from exc
    try:
        if first == ",".join(CSV_HEADER):
            text = bench_svg(read_bench_csv(args.input))
        else:
            entries = read_report(args.input)
            if "sigma2_trace" not in entries:
                raise CLIError(f"{args.input}: neither a benchmark CSV nor a run report")
            text = report_svg(entries)
    except (ValueError, KeyError) as exc:
        raise CLIError(f"{args.input}: cannot parse ({exc})") from exc
    out = args.out or os.path.splitext(args.input)[0] + ".svg"
    _write_text(out, text)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CPDRegError, CLIError, OSError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"cpdreg {args.command}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
