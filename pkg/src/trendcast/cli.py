"""``trendcast`` command-line front end.

Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.
Errors are reported as a single stderr line ``trendcast: error: <kind>: <msg>``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import cascade, wavelet
from .cascade import CascadeConfig, CascadeError, NumericalError, WienerCascadeModel
from .dataset import Dataset, DatasetError, parse_trends_csv
from .evaluation import MetricError, cross_validate, spearman_permutation_pvalue, summary_csv
from .selection import Mode, SelectionError, SelectionScope, SelectionSpec
from .synth import SynthError, SynthSpec, gen_panel
from .wavelet import WaveletConfig, WaveletError

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
VALIDATION_ERRORS = (DatasetError, SelectionError, CascadeError, WaveletError, SynthError, MetricError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _slug(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_-]+", "_", name).strip("_") or "series"


def _write(path: Path, text: str) -> Path:
    """Atomic write: temp file in the destination directory, then rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load_dataset(path: str) -> Dataset:
    text = _read(path)
    if path.lower().endswith(".csv"):
        return parse_trends_csv(text)
    return Dataset.from_json(text)


def resolve_name(dataset: Dataset, name: str) -> str:
    """Exact series name, or a unique case-insensitive match."""
    if name in dataset.names:
        return name
    hits = [n for n in dataset.names if n.lower() == name.lower()]
    if len(hits) == 1:
        return hits[0]
    raise DatasetError(f"unknown series {name!r}")


# commands --------------------------------------------------------------


def cmd_ingest(args) -> int:
    ds = parse_trends_csv(_read(args.csv))
    if args.targets:
        ds = ds.with_targets([resolve_name(ds, t) for t in args.targets.split(",") if t.strip()])
    out = _write(Path(args.out) / "dataset.json", ds.to_json())
    print(f"{len(ds.predictors)} predictors, {len(ds.targets)} variables; "
          f"{ds.T} weeks from {ds.start_week.isoformat()} -> {out}")
    return EXIT_OK


def _wavelet_config(args) -> WaveletConfig:
    return WaveletConfig(omega0=args.omega0, fmin=args.fmin, fmax=args.fmax, voices=args.voices)


def cmd_scalogram(args) -> int:
    ds = _load_dataset(args.dataset)
    name = resolve_name(ds, args.series)
    cfg = _wavelet_config(args)
    sc = wavelet.morlet_cwt(ds.column(name), cfg.grid(), cfg.sampling_rate, cfg.omega0)
    base = Path(args.out) / f"scalogram_{_slug(name)}"
    csv_path = _write(base.with_suffix(".csv"), wavelet.scalogram_csv(sc))
    meta = {
        "series": name,
        "omega0": cfg.omega0,
        "sampling_rate": cfg.sampling_rate,
        "grid": [float(f) for f in sc.grid.frequencies],
        "peak_frequency": sc.peak_frequency(),
    }
    _write(base.with_suffix(".meta.json"), json.dumps(meta, indent=1) + "\n")
    print(f"{name}: peak {sc.peak_frequency():.3f} cy/yr -> {csv_path}")
    return EXIT_OK


def cmd_periodicity(args) -> int:
    ds = _load_dataset(args.dataset)
    ranked = wavelet.rank_periodic(ds, _wavelet_config(args))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rank", "name", "annual_ratio", "semiannual_ratio", "score", "label"])
    for i, (name, s) in enumerate(ranked, 1):
        w.writerow([i, name, repr(s.annual_ratio), repr(s.semiannual_ratio), repr(s.total), s.label.value])
    out = _write(Path(args.out) / "periodicity.csv", buf.getvalue())
    for i, (name, s) in enumerate(ranked, 1):
        print(f"{i:3d}  {name:32s} {s.total:.3f}  {s.label.value}")
    print(f"-> {out}")
    return EXIT_OK


def _cascade_config(args) -> CascadeConfig:
    lam = None if args.lam == "auto" else float(args.lam)
    return CascadeConfig(lag_depth=args.lags, ridge_lambda=lam, refine_iters=args.refine)


def _run_cell(ds, target, spec, config, args, outdir: Path) -> "object":
    scope = SelectionScope(args.selection_scope)
    report = cross_validate(ds, target, spec, config, k=args.folds, scope=scope)
    if args.pvalue == "permutation":
        p = spearman_permutation_pvalue(report.predicted, report.actual, 1999, args.seed)
        report.pooled = type(report.pooled)(report.pooled.rho, p, report.pooled.mse, report.pooled.n)
    stem = f"{_slug(target)}_{spec.label.replace(':', '')}"
    _write(outdir / f"report_{stem}.json", report.to_json())
    _write(outdir / f"predictions_{stem}.csv", report.predictions_csv(ds))
    # full-data model for the importance bar chart
    features = report.features[0] if scope is SelectionScope.GLOBAL else _global_features(ds, target, spec, config)
    model = cascade.train(ds, target, features, config)
    _write(outdir / f"model_{stem}.json", model.to_json())
    return report


def _global_features(ds, target, spec, config):
    from .selection import select_features, selection_context

    return select_features(ds, spec, selection_context(ds, target, spec, config))


def cmd_evaluate(args) -> int:
    ds = _load_dataset(args.dataset)
    config = _cascade_config(args)
    outdir = Path(args.out)
    if args.matrix:
        targets = ds.targets
        if args.target:
            targets = [resolve_name(ds, t) for t in args.target.split(",")]
        if not targets:
            raise DatasetError("matrix mode needs target series (tag them at ingest)")
        k = min(10, len([n for n in ds.predictors if n not in targets]))
        cells = [SelectionSpec(Mode.ALL), SelectionSpec(Mode.TOP_PERIODIC, k), SelectionSpec(Mode.TOP_WEIGHTED, k)]
    else:
        if not args.target:
            raise UsageError("--target is required unless --matrix is given")
        targets = [resolve_name(ds, args.target)]
        cells = [SelectionSpec.parse(args.features)]

    reports = []
    for spec in cells:
        for target in targets:
            cell_ds = ds.with_targets(set(ds.targets) | {target})
            r = _run_cell(cell_ds, target, spec, config, args, outdir)
            reports.append(r)
            print(f"{spec.label:12s} {target:10s} mse={r.pooled.mse:.2f} rho={r.pooled.rho:.3f} "
                  f"p={r.pooled.p_value:.3g} n={r.pooled.n}")
    if args.matrix:
        out = _write(outdir / "summary.csv", summary_csv(reports))
        print(f"-> {out}")
    return EXIT_OK


def cmd_importance(args) -> int:
    model = WienerCascadeModel.from_json(_read(args.model))
    items = cascade.feature_importance(model.weights, model.feature_names)
    text = cascade.importance_csv(items)
    if args.out:
        _write(Path(args.out) / f"importance_{_slug(model.target_name)}.csv", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = SynthSpec.from_json(_read(args.spec))
    ds = gen_panel(spec)
    out = _write(Path(args.out), ds.to_csv())
    print(f"{ds.T} weeks x {ds.M} series -> {out}")
    return EXIT_OK


# parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="trendcast", description="Wiener cascade decoding of weekly search-index panels")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("ingest", help="validate a weekly CSV and write dataset.json")
    s.add_argument("csv")
    s.add_argument("--targets", default="", help="comma-separated target series")
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_ingest)

    def wavelet_args(s):
        s.add_argument("--omega0", type=float, default=6.0)
        s.add_argument("--fmin", type=float, default=0.5)
        s.add_argument("--fmax", type=float, default=4.0)
        s.add_argument("--voices", type=int, default=48)

    s = sub.add_parser("scalogram", help="Morlet scalogram of one series")
    s.add_argument("dataset")
    s.add_argument("--series", required=True)
    wavelet_args(s)
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_scalogram)

    s = sub.add_parser("periodicity", help="rank predictors by annual/semiannual band power")
    s.add_argument("dataset")
    wavelet_args(s)
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_periodicity)

    s = sub.add_parser("evaluate", help="blocked k-fold decoding of a target")
    s.add_argument("dataset")
    s.add_argument("--target", default=None)
    s.add_argument("--features", default="all", help="all | periodic:K | weighted:K")
    s.add_argument("--lags", type=int, default=52)
    s.add_argument("--lambda", dest="lam", default="auto", help="auto or a fixed penalty")
    s.add_argument("--folds", type=int, default=5)
    s.add_argument("--selection-scope", choices=["global", "per-fold"], default="global")
    s.add_argument("--refine", type=int, default=0, help="joint filter/polynomial refinement iterations")
    s.add_argument("--pvalue", choices=["t", "permutation"], default="t")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--matrix", action="store_true", help="run every target x selection cell")
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("importance", help="per-feature sum of |filter weights|")
    s.add_argument("model")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_importance)

    s = sub.add_parser("synth", help="generate a synthetic panel CSV from a JSON spec")
    s.add_argument("--spec", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def _fail(kind: str, message: str, code: int) -> int:
    message = " ".join(str(message).split())
    print(f"trendcast: error: {kind}: {message}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            parser.print_help()
            return EXIT_USAGE
        if getattr(args, "lam", "auto") != "auto":
            try:
                float(args.lam)
            except ValueError:
                raise UsageError(f"--lambda must be 'auto' or a number, got {args.lam!r}") from None
        return args.func(args)
    except UsageError as exc:
        return _fail("usage", exc, EXIT_USAGE)
    except VALIDATION_ERRORS as exc:
        return _fail("validation", exc, EXIT_USAGE)
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        return _fail("numerical", exc, EXIT_NUMERIC)


if __name__ == "__main__":
    sys.exit(main())
