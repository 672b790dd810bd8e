"""Command-line interface.

Exit codes: 0 success, 2 input or configuration error, 3 adapter or runtime
failure. On failure a JSON object ``{"error": {"kind": ..., "message": ...}}``
is printed to stdout.
"""
import argparse
import csv
import json
import logging
import os
import secrets
import shlex
import sys

import numpy as np

from . import __version__, _backend
from .bench import flip_benchmark, read_records_csv, write_records_csv, FlipRecord
from .demo import DemoConfig, run_demo
from .errors import InvalidConfig, PropEffectError, ShapeMismatch
from .findiff import DiffScheme
from .intervene import OperatorSpec, generate_stack, read_png, read_stack, write_png, write_stack
from .model import (
    BIASES,
    CommandAdapter,
    CsvAdapter,
    ToyAdapter,
    ToyClassifier,
    draw_scene,
    eval_stack,
    load_series_csv,
    synth_dataset,
    train_toy,
    write_series_csv,
)
from .plot import line_chart_svg
from .score import summarize
from .stattest import TestConfig, null_distribution, write_null_csv

log = logging.getLogger("propeffect")

ENV_K = "PROPEFFECT_K"
ENV_DELTA = "PROPEFFECT_DELTA"
# keys never recorded in report configs: they only say where output goes
OUTPUT_KEYS = {"output", "outdir", "null_csv", "svg", "force", "func", "verbose"}


def _env_default(name, cast, fallback):
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return fallback
    try:
        return cast(raw)
    except ValueError:
        raise InvalidConfig(f"environment variable {name}={raw!r} is not a valid {cast.__name__}") from None


def write_atomic(path, text: str) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def envelope(command: str, args, result: dict, seed=None) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in OUTPUT_KEYS}
    config["backend"] = _backend.BACKEND
    return {
        "tool": "propeffect",
        "version": __version__,
        "command": command,
        "seed": seed,
        "config": config,
        "result": result,
    }


def emit(args, doc: dict) -> None:
    text = dump(doc)
    out = getattr(args, "output", None)
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def _prepare_outdir(path, force: bool) -> None:
    if os.path.exists(path) and (not os.path.isdir(path) or os.listdir(path)) and not force:
        raise InvalidConfig(f"output directory {path!r} exists and is not empty; pass --force to overwrite")
    os.makedirs(path, exist_ok=True)


def _resolve_seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbelow(2**31)
    return args.seed


def _test_config(args) -> TestConfig:
    scheme = DiffScheme(boundary_order=args.boundary_order, mode="forward_only" if args.forward_only else "standard")
    return TestConfig(
        K=args.K, delta=args.delta, side=args.side, seed=_resolve_seed(args),
        statistic=args.statistic, scheme=scheme, smoothed=args.smoothed, workers=args.workers,
    )


# ---------------------------------------------------------------- commands


def cmd_score(args):
    series = load_series_csv(args.series, args.selector)
    cfg = _test_config(args)
    report = summarize(series, cfg, args.threshold)
    emit(args, envelope("score", args, report.to_dict(), cfg.seed))


def cmd_test(args):
    series = load_series_csv(args.series, args.selector)
    cfg = _test_config(args)
    sample = null_distribution(series, cfg)
    write_null_csv(sample, args.null_csv)
    result = {
        "original_stat": None if np.isnan(sample.original_stat) else sample.original_stat,
        "p_value": sample.p_value,
        "p_upper": sample.p_upper,
        "p_lower": sample.p_lower,
        "side": sample.side,
        "K": sample.K,
        "significant": sample.significant(cfg.delta),
        "delta": cfg.delta,
        "statistic_name": cfg.statistic,
        "degenerate": sample.degenerate,
        "warning": sample.warning,
        "null_csv": os.path.abspath(args.null_csv),
    }
    emit(args, envelope("test", args, result, cfg.seed))


def _parse_offset(text):
    try:
        r, c = (int(v) for v in text.split(","))
    except ValueError:
        raise InvalidConfig(f"offset must look like 'row,col', got {text!r}") from None
    return r, c


def cmd_intervene(args):
    base = read_png(args.image)
    patch = read_png(args.patch) if args.patch else None
    mask = read_png(args.mask) if args.mask else None
    if mask is not None and mask.ndim == 3:
        mask = mask[..., :3].max(axis=2)
    spec = OperatorSpec(args.operator, patch=patch, mask=mask, offset=_parse_offset(args.offset), sigma_rel=args.sigma_rel)
    stack = generate_stack(base, spec, args.steps, args.lo, args.hi, source=os.path.abspath(args.image))
    _prepare_outdir(args.outdir, args.force)
    manifest = write_stack(stack, args.outdir)
    emit(args, envelope("intervene", args, {
        "manifest": os.path.abspath(manifest),
        "operator": stack.operator,
        "values": stack.values.tolist(),
    }))


def _adapter(args):
    if args.adapter == "toy":
        if not args.model:
            raise InvalidConfig("--model is required for the toy adapter")
        mask = None
        if args.mask:
            mask = read_png(args.mask)
            if mask.ndim == 3:
                mask = mask[..., :3].max(axis=2)
        return ToyAdapter(ToyClassifier.load(args.model), mask)
    if args.adapter == "csv":
        if not args.outputs_csv:
            raise InvalidConfig("--outputs-csv is required for the csv adapter")
        return CsvAdapter(args.outputs_csv)
    if not args.command:
        raise InvalidConfig("--command is required for the command adapter")
    names = args.output_names.split(",") if args.output_names else None
    return CommandAdapter(shlex.split(args.command), names)


def cmd_eval(args):
    stack = read_stack(args.manifest)
    adapter = _adapter(args)
    selector = int(args.selector) if args.selector.isdigit() else args.selector
    series = eval_stack(adapter, stack, selector)
    write_series_csv(series, args.output)
    doc = envelope("eval", args, {
        "series_csv": os.path.abspath(args.output),
        "adapter": adapter.describe(),
        "output_label": series.output_label,
        "n": len(series),
    })
    sys.stdout.write(dump(doc))


def cmd_bench(args):
    records = read_records_csv(args.records)
    seed = _resolve_seed(args)
    result = flip_benchmark(records, args.rounds, args.frac, seed)
    emit(args, envelope("bench", args, result.to_dict(), seed))


def cmd_curve(args):
    labels = args.labels.split(",") if args.labels else None
    if labels is not None and len(labels) != len(args.series):
        raise InvalidConfig("--labels needs one label per series file")
    curves = {}
    grid = None
    for k, path in enumerate(args.series):
        s = load_series_csv(path, args.selector)
        if grid is None:
            grid = s.grid
        elif not np.array_equal(grid, s.grid):
            raise ShapeMismatch(f"{path} uses a different property grid")
        label = labels[k] if labels else (s.output_label if s.output_label not in curves else f"{s.output_label}_{k}")
        curves[label] = s.outputs
    rows = [["property", *curves]]
    rows += [[repr(float(p)), *(repr(float(c[i])) for c in curves.values())] for i, p in enumerate(grid)]
    write_atomic(args.output, "".join(",".join(r) + "\n" for r in rows))
    if args.svg:
        write_atomic(args.svg, line_chart_svg(grid, curves, threshold=args.threshold))
    sys.stdout.write(dump(envelope("curve", args, {"csv": os.path.abspath(args.output), "columns": list(curves)})))


def _write_curve_csv(path, grid, columns: dict):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["property", *columns])
        for i, p in enumerate(grid):
            w.writerow([repr(float(p)), *(repr(float(c[i])) for c in columns.values())])


def cmd_demo(args):
    seed = _resolve_seed(args)
    _prepare_outdir(args.outdir, args.force)
    cfg = DemoConfig(seed=seed, K=args.K, delta=args.delta)
    res = run_demo(cfg)
    out = args.outdir
    curve_dir = os.path.join(out, "curves")
    os.makedirs(curve_dir, exist_ok=True)
    for kind, scenes in res.curves.items():
        for i, sc in enumerate(scenes):
            cols = {f"output_{b}": sc[f"output_{b}"] for b in BIASES}
            _write_curve_csv(os.path.join(curve_dir, f"{kind}_scene_{i:02d}.csv"), sc["property"], cols)
        grid = scenes[0]["property"]
        mean_cols = {f"output_{b}": np.mean([sc[f"output_{b}"] for sc in scenes], axis=0) for b in BIASES}
        _write_curve_csv(os.path.join(curve_dir, f"{kind}_mean.csv"), grid, mean_cols)
        write_atomic(
            os.path.join(curve_dir, f"{kind}_mean.svg"),
            line_chart_svg(grid, mean_cols, threshold=cfg.threshold, xlabel=kind, ylabel="P(disk)"),
        )
    with open(os.path.join(out, "table.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(res.table[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(res.table)
    write_records_csv([FlipRecord(r["score"], r["flipped"]) for r in res.records], os.path.join(out, "records.csv"))
    doc = envelope("demo", args, res.to_dict(), seed)
    write_atomic(os.path.join(out, "demo_report.json"), dump(doc))
    summary = {"demo_report": os.path.abspath(os.path.join(out, "demo_report.json")), "table": res.table}
    sys.stdout.write(dump(summary))


def cmd_toy_train(args):
    seed = _resolve_seed(args)
    clf = train_toy(synth_dataset(args.bias, args.n, seed), args.epochs, args.lr, seed)
    write_atomic(args.output, clf.to_json())
    sys.stdout.write(dump(envelope("toy-train", args, {
        "model": os.path.abspath(args.output), "train_accuracy": clf.train_accuracy,
        "weights": clf.weights.tolist(), "bias": clf.bias,
    }, seed)))


def cmd_toy_scene(args):
    seed = _resolve_seed(args)
    scene = draw_scene(args.label, args.brightness, np.random.default_rng(seed))
    _prepare_outdir(args.outdir, args.force)
    write_png(os.path.join(args.outdir, "scene.png"), scene.image)
    write_png(os.path.join(args.outdir, "mask.png"), scene.fg_mask)
    sys.stdout.write(dump(envelope("toy-scene", args, {
        "image": os.path.abspath(os.path.join(args.outdir, "scene.png")),
        "mask": os.path.abspath(os.path.join(args.outdir, "mask.png")),
    }, seed)))


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    """Usage errors become InvalidConfig so they get the JSON error contract."""

    def error(self, message):
        raise InvalidConfig(f"{self.prog}: {message}")


def _add_test_flags(p, default_K, default_delta):
    p.add_argument("--selector", default="output", help="output column of the series CSV")
    p.add_argument("--boundary-order", type=int, choices=(1, 2), default=1)
    p.add_argument("--forward-only", action="store_true", help="forward differences everywhere")
    p.add_argument("-K", "--permutations", dest="K", type=int, default=default_K)
    p.add_argument("--delta", type=float, default=default_delta, help="significance level")
    p.add_argument("--side", choices=("two_sided", "upper", "lower"), default="two_sided")
    p.add_argument("--statistic", choices=("expected_gradient_magnitude", "pearson_abs"),
                   default="expected_gradient_magnitude")
    p.add_argument("--smoothed", action="store_true", help="use (count + 1) / (K + 1) p-values")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    default_K = _env_default(ENV_K, int, 10000)
    default_delta = _env_default(ENV_DELTA, float, 0.01)

    parser = _Parser(prog="propeffect", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"propeffect {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("score", help="score a series CSV and test its significance")
    p.add_argument("series")
    _add_test_flags(p, default_K, default_delta)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("test", help="export the permutation null distribution")
    p.add_argument("series")
    _add_test_flags(p, default_K, default_delta)
    p.add_argument("--null-csv", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("intervene", help="generate an intervention stack")
    p.add_argument("image")
    p.add_argument("--operator", required=True, choices=("patch_blend", "background_gauss", "fg_brightness"))
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--patch")
    p.add_argument("--mask")
    p.add_argument("--offset", default="0,0")
    p.add_argument("--sigma-rel", type=float, default=0.5)
    p.add_argument("--outdir", required=True)
    p.add_argument("--force", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_intervene)

    p = sub.add_parser("eval", help="evaluate a model adapter on a stack")
    p.add_argument("manifest")
    p.add_argument("--adapter", required=True, choices=("toy", "csv", "command"))
    p.add_argument("--model", help="toy classifier JSON")
    p.add_argument("--mask", help="foreground mask PNG for the toy adapter")
    p.add_argument("--outputs-csv", help="precomputed outputs for the csv adapter")
    p.add_argument("--command", help="external model command line")
    p.add_argument("--output-names", help="comma-separated names of the command's outputs")
    p.add_argument("--selector", default="0", help="output index or name")
    p.add_argument("-o", "--output", required=True, help="series CSV to write")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="flip-prediction benchmark on score,flipped records")
    p.add_argument("records")
    p.add_argument("--rounds", type=int, default=10)
    p.add_argument("--frac", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("curve", help="merge series CSVs into plot-ready data")
    p.add_argument("series", nargs="+")
    p.add_argument("--selector", default="output")
    p.add_argument("--labels")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--svg")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("demo", help="end-to-end toy bias study")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--outdir", required=True)
    p.add_argument("--force", action="store_true")
    p.add_argument("-K", "--permutations", dest="K", type=int, default=default_K)
    p.add_argument("--delta", type=float, default=default_delta)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("toy-train", help="train a toy classifier and save it as JSON")
    p.add_argument("--bias", choices=BIASES, default="none")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_toy_train)

    p = sub.add_parser("toy-scene", help="draw one synthetic scene and its mask")
    p.add_argument("--label", choices=("disk", "square"), required=True)
    p.add_argument("--brightness", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--outdir", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_toy_scene)
    return parser


def _fail(kind: str, message: str, code: int) -> int:
    sys.stdout.write(dump({"error": {"kind": kind, "message": message}}))
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except PropEffectError as exc:
        return _fail(exc.kind, str(exc), exc.exit_code)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        args.func(args)
    except PropEffectError as exc:
        return _fail(exc.kind, str(exc), exc.exit_code)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        return _fail("IOError", str(exc), 2)
    except Exception as exc:  # noqa: BLE001
        log.debug("unexpected failure", exc_info=True)
        return _fail(type(exc).__name__, str(exc), 3)
    return 0


if __name__ == "__main__":
    sys.exit(main())
