"""Command-line entry point.

Every subcommand reads trip CSVs (or other documents), runs one pipeline
stage and writes a CSV or JSON result. With ``--output PATH`` the result is
written atomically and ``PATH.manifest.json`` records the SHA-256 of each
input, the effective config and the seed. Exit status: 0 success, 1 invalid
input or arguments, 2 internal error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from mddra import __version__, generator
from mddra.catalog import (
    BANDS,
    CLASS_LABELS,
    PARAMETER_NAMES,
    MddraConfig,
    ValidationError,
    config_to_document,
    read_config,
)
from mddra.classifiers import (
    FEATURE_NAMES,
    dataset,
    dumps_model,
    evaluate,
    kfold_cv,
    kruskal_wallis_ranks,
    loads_model,
    model_spec,
    read_entries_csv,
    reports_csv,
    train,
)
from mddra.dbn import CptSet, estimate_cpts, filter_trip
from mddra.segmentation import derive_band_edges, optimal_partition
from mddra.severity import encode_frames, score_trip, term_matrix
from mddra.stats import correlation_table, descriptive, ols_fit, residual_cross_correlation
from mddra.trip import TripRecord, parse_trip, serialize_trip

log = logging.getLogger("mddra")

EXIT_OK, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2
SCORE_HEADER = ("frame", "frame_score", "aggregate_score", "band", "rank", "likelihood", "risk_value", "takeover")


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- io helpers


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def atomic_write(path: str | Path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Run:
    """Inputs read and config used by one invocation, for the manifest."""

    def __init__(self, args: argparse.Namespace, config: MddraConfig):
        self.args = args
        self.config = config
        self.inputs: list[dict[str, str]] = []

    @property
    def catalog(self):
        return self.config.catalog

    @property
    def window(self) -> int:
        return self.config.window

    def read(self, path: str) -> str:
        try:
            data = Path(path).read_bytes()
        except OSError as exc:
            raise ValidationError(f"cannot read {path}: {exc.strerror}") from None
        self.inputs.append({"path": str(path), "sha256": sha256_bytes(data)})
        try:
            return data.decode("utf-8")
        except UnicodeDecodeError:
            raise ValidationError(f"{path} is not UTF-8 text") from None

    def trip(self, path: str) -> TripRecord:
        text = self.read(path)
        try:
            return parse_trip(text, self.catalog)
        except ValidationError as exc:
            raise ValidationError(f"{path}: {exc}") from None

    def trips(self, paths: Sequence[str]) -> list[TripRecord]:
        return [self.trip(p) for p in paths]

    def config_hash(self) -> str:
        return sha256_bytes(canonical_json(config_to_document(self.config)).encode())

    def emit(self, text: str) -> None:
        out = self.args.output
        if out is None:
            sys.stdout.write(text)
            return
        atomic_write(out, text)
        manifest = {
            "command": self.args.command,
            "version": __version__,
            "seed": self.args.seed,
            "window": self.window,
            "config_sha256": self.config_hash(),
            "inputs": self.inputs,
            "outputs": [{"path": str(out), "sha256": sha256_bytes(text.encode("utf-8"))}],
        }
        atomic_write(f"{out}.manifest.json", canonical_json(manifest, indent=2) + "\n")
        log.info("wrote %s", out)


def canonical_json(doc: Any, indent: int | None = None) -> str:
    return json.dumps(doc, sort_keys=True, indent=indent, allow_nan=False, separators=None if indent else (",", ":"))


def json_text(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(x: float | None) -> str:
    if x is None:
        return ""
    return repr(float(x))


# ---------------------------------------------------------------- subcommands


def cmd_generate(run: Run) -> None:
    a = run.args
    if a.scenario:
        try:
            doc = json.loads(run.read(a.scenario))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed scenario {a.scenario}: {exc}") from None
        cfg = generator.scenario_from_document(doc, a.seed, run.window)
        if a.frames is not None:
            cfg = dataclasses.replace(cfg, frame_count=a.frames)
    else:
        cfg = generator.preset(a.preset, a.frames, a.seed)
        cfg = dataclasses.replace(cfg, window=run.window)
    trip = generator.generate(cfg, run.catalog)
    if a.format == "json":
        run.emit(json_text({
            "trip_id": trip.trip_id,
            "driver_id": trip.driver_id,
            "frame_rate": trip.frame_rate,
            "seed": trip.seed,
            "header": list(trip_header(trip)),
            "rows": [list(r) for r in trip_rows(trip)],
        }))
    else:
        run.emit(serialize_trip(trip))


def trip_header(trip: TripRecord):
    return ("frame",) + PARAMETER_NAMES + ("speed_mph",) + (("label",) if trip.labels is not None else ())


def trip_rows(trip: TripRecord):
    for i, f in enumerate(trip.frames):
        yield (f.index, *f.actions(), f.speed) + ((trip.labels[i],) if trip.labels is not None else ())


def cmd_score(run: Run) -> None:
    trip = run.trip(run.args.trip)
    s = score_trip(trip, run.catalog, run.window)
    if run.args.format == "json":
        rows = [
            {
                "frame": a.frame_index,
                "frame_score": a.frame_score,
                "aggregate_score": a.aggregate_score,
                "band": a.band.color,
                "rank": a.rank,
                "likelihood": a.likelihood,
                "risk_value": a.risk_value,
                "takeover": a.takeover,
            }
            for a in s.assessments()
        ]
        run.emit(json_text({"trip_id": trip.trip_id, "frames": rows}))
        return
    colors = [b.color for b in BANDS]
    rows = (
        (i, f"{fs:.6f}", f"{ag:.6f}", colors[r - 1], r, lk, rv, "true" if tk else "false")
        for i, fs, ag, r, lk, rv, tk in zip(
            s.frame_index.tolist(),
            s.frame_score.tolist(),
            s.aggregate_score.tolist(),
            s.rank.tolist(),
            s.likelihood.tolist(),
            s.risk_value.tolist(),
            s.takeover.tolist(),
        )
    )
    run.emit(csv_text(SCORE_HEADER, rows))


def _segment_values(run: Run, path: str) -> list[float]:
    """Aggregate scores from a trip CSV or from a score report."""
    text = run.read(path)
    first = next((ln for ln in text.splitlines() if not ln.startswith("#")), "")
    if first.split(",")[:3] == list(SCORE_HEADER[:3]):
        reader = csv.DictReader(io.StringIO(text))
        try:
            return [float(r["aggregate_score"]) for r in reader]
        except (TypeError, ValueError):
            raise ValidationError(f"{path}: malformed score report") from None
    trip = parse_trip(text, run.catalog)
    return score_trip(trip, run.catalog, run.window).aggregate_score.tolist()


def cmd_segment(run: Run) -> None:
    values = sorted(_segment_values(run, run.args.input))
    k = run.args.k
    part = optimal_partition(values, k)
    edges = derive_band_edges(values, k)
    segments = []
    for start, end in part.segments():
        seg = values[start - 1 : end]
        segments.append({"start": start, "end": end, "count": len(seg), "min": seg[0], "max": seg[-1], "mean": math.fsum(seg) / len(seg)})
    if run.args.format == "json":
        run.emit(json_text({"k": k, "n": part.n, "loss": part.loss, "boundaries": list(part.boundaries), "thresholds": edges, "segments": segments}))
        return
    rows = []
    for i, s in enumerate(segments):
        upper = edges[i] if i < len(edges) else None
        rows.append((i + 1, s["start"], s["end"], s["count"], _num(s["min"]), _num(s["max"]), _num(s["mean"]), _num(upper)))
    text = csv_text(("segment", "start", "end", "count", "min", "max", "mean", "upper_threshold"), rows)
    run.emit(f"# k={k}\n# loss={part.loss!r}\n" + text)


def cmd_fit_dbn(run: Run) -> None:
    trips = run.trips(run.args.trips)
    items = []
    for t in trips:
        if t.labels is None:
            raise ValidationError(f"trip {t.trip_id!r} has no label column")
        items.append(list(zip(t.frames, t.labels)))
    cpts = estimate_cpts(items, alpha=run.args.alpha, catalog=run.catalog)
    run.emit(cpts.dumps() + "\n")


def cmd_filter(run: Run) -> None:
    cpts = CptSet.loads(run.read(run.args.cpts))
    trip = run.trip(run.args.trip)
    beliefs = filter_trip(trip, cpts, catalog=run.catalog)
    if run.args.format == "json":
        rows = [{"frame": f.index, "belief": dict(zip(cpts.states, b.probs.tolist())), "argmax": b.argmax} for f, b in zip(trip.frames, beliefs)]
        run.emit(json_text({"trip_id": trip.trip_id, "states": list(cpts.states), "frames": rows}))
        return
    header = ("frame",) + tuple(f"p_{s}" for s in cpts.states) + ("argmax",)
    rows = ((f.index, *(f"{p:.9f}" for p in b.probs), b.argmax) for f, b in zip(trip.frames, beliefs))
    run.emit(csv_text(header, rows))


def _dataset(run: Run, paths):
    return dataset(run.trips(paths), run.catalog, run.window)


def cmd_train(run: Run) -> None:
    X, y = _dataset(run, run.args.trips)
    model = train(model_spec(run.args.model), X, y, run.args.seed)
    log.info("trained %s on %d frames", model.name, X.shape[0])
    run.emit(dumps_model(model) + "\n")


def cmd_evaluate(run: Run) -> None:
    model = loads_model(run.read(run.args.model_file))
    X, y = _dataset(run, run.args.trips)
    report = evaluate(model, X, y)
    if run.args.format == "json":
        run.emit(json_text(report.to_document(timing=run.args.timing)))
        return
    text = reports_csv([report], timing=run.args.timing)
    matrix = csv_text(("actual",) + tuple(f"predicted_{c}" for c in CLASS_LABELS), ((c, *row) for c, row in zip(CLASS_LABELS, report.confusion_matrix)))
    run.emit(text + "\n" + matrix)


def cmd_cv(run: Run) -> None:
    X, y = _dataset(run, run.args.trips)
    result = kfold_cv(model_spec(run.args.model), X, y, run.args.folds, run.args.seed)
    if run.args.format == "json":
        run.emit(json_text(result.to_document()))
        return
    rows = [(i + 1, _num(a)) for i, a in enumerate(result.fold_accuracies)]
    rows += [("mean", _num(result.mean)), ("std", _num(result.std))]
    run.emit(csv_text(("fold", "accuracy"), rows))


def cmd_rank(run: Run) -> None:
    table = kruskal_wallis_ranks(read_entries_csv(run.read(run.args.input)))
    if run.args.format == "json":
        run.emit(json_text(table.to_document()))
    else:
        run.emit(table.to_csv())


def _regression_inputs(run: Run, trips):
    """Normalized terms and speed factor as predictors of the aggregate score."""
    X, target = [], []
    for t in trips:
        codes, speeds = encode_frames(t.frames, run.catalog)
        mat, sf = term_matrix(codes, speeds, run.catalog)
        X.append(np.column_stack([mat, sf]))
        target.append(score_trip(t, run.catalog, run.window).aggregate_score)
    return np.vstack(X), np.concatenate(target), list(FEATURE_NAMES[:-1])


def cmd_validate(run: Run) -> None:
    X, y, names = _regression_inputs(run, run.trips(run.args.trips))
    varying = [i for i in range(X.shape[1]) if not np.all(X[:, i] == X[0, i])]
    if not varying:
        raise ValidationError("every predictor is constant; nothing to regress on")
    dropped = [names[i] for i in range(len(names)) if i not in varying]
    fit = ols_fit(X[:, varying], y, names=[names[i] for i in varying])
    xcorr = residual_cross_correlation(fit.residuals, X[:, varying], run.args.threshold, [names[i] for i in varying])
    desc = descriptive(fit.residuals)
    if run.args.format == "json":
        run.emit(json_text({
            "dropped_constant_predictors": dropped,
            "coefficients": [r.__dict__ for r in fit.rows],
            "r_squared": fit.r_squared,
            "residual_standard_error": fit.residual_standard_error,
            "cross_correlation": [c.__dict__ for c in xcorr],
            "passed": all(c.passed for c in xcorr),
            "residual_statistics": dict(desc.rows()),
        }))
        return
    rows = [("coefficient", r.predictor, "estimate", _num(r.estimate)) for r in fit.rows]
    rows += [("coefficient", r.predictor, "p_value", _num(r.p_value)) for r in fit.rows]
    rows += [("fit", "", "r_squared", _num(fit.r_squared))]
    rows += [("cross_correlation", c.input, "r", _num(c.r)) for c in xcorr]
    rows += [("cross_correlation", c.input, "passed", str(c.passed).lower()) for c in xcorr]
    rows += [("residuals", "", name, _num(v)) for name, v in desc.rows()]
    rows += [("dropped", name, "constant", "true") for name in dropped]
    run.emit(csv_text(("section", "name", "field", "value"), rows))


def cmd_stats(run: Run) -> None:
    X, y, names = _regression_inputs(run, run.trips(run.args.trips))
    desc = descriptive(y)
    corr = correlation_table({n: X[:, i] for i, n in enumerate(names)}, y)
    if run.args.format == "json":
        run.emit(json_text({"aggregate_score": dict(desc.rows()), "correlation": {n: r for n, r in corr}}))
        return
    rows = [("aggregate_score", name, _num(v)) for name, v in desc.rows()]
    rows += [("correlation", name, _num(r)) for name, r in corr]
    run.emit(csv_text(("section", "name", "value"), rows))


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON config file (falls back to $MDDRA_CONFIG)")
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--window", type=int, help="aggregation window; overrides the config")
    common.add_argument("--output", "-o", help="output file; stdout when omitted")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--quiet", "-q", action="store_true", help="log warnings only")

    parser = _Parser(prog="mddra", description="Driver-distraction severity scoring and evaluation bench.")
    parser.add_argument("--version", action="version", version=f"mddra {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(func=func)
        return p

    p = add("generate", cmd_generate, "Generate a synthetic labelled trip.")
    p.add_argument("--preset", default="escalating", help=f"one of {sorted(generator.PRESETS)}")
    p.add_argument("--scenario", help="JSON scenario document instead of a preset")
    p.add_argument("--frames", type=int, help="frame count (preset or scenario default when omitted)")

    p = add("score", cmd_score, "Per-frame severity, band, risk and takeover report.")
    p.add_argument("trip")

    p = add("segment", cmd_segment, "Optimal k-segment partition of sorted aggregate scores.")
    p.add_argument("input", help="trip CSV or score report")
    p.add_argument("--k", type=int, required=True)

    p = add("fit-dbn", cmd_fit_dbn, "Estimate DBN tables from labelled trips.")
    p.add_argument("trips", nargs="+")
    p.add_argument("--alpha", type=float, default=1.0, help="additive smoothing (default 1)")

    p = add("filter", cmd_filter, "Forward-filter a trip with fitted DBN tables.")
    p.add_argument("trip")
    p.add_argument("--cpts", required=True, help="tables written by fit-dbn")

    p = add("train", cmd_train, "Train a classifier on labelled trips.")
    p.add_argument("trips", nargs="+")
    p.add_argument("--model", default="bagged_trees", help="preset name, e.g. fine_knn, bagged_trees")

    p = add("evaluate", cmd_evaluate, "Evaluate a trained model on labelled trips.")
    p.add_argument("model_file")
    p.add_argument("trips", nargs="+")
    p.add_argument("--timing", action="store_true", help="include wall-clock columns (non-deterministic)")

    p = add("cv", cmd_cv, "Stratified k-fold cross-validation.")
    p.add_argument("trips", nargs="+")
    p.add_argument("--model", default="bagged_trees")
    p.add_argument("--folds", type=int, default=5)

    p = add("rank", cmd_rank, "Rank classifier results (Model, Acc. %%, Speed, T-Time[, Group]).")
    p.add_argument("input")

    p = add("validate", cmd_validate, "Regression residual cross-correlation and descriptive statistics.")
    p.add_argument("trips", nargs="+")
    p.add_argument("--threshold", type=float, default=0.1, help="max |r| for a passing input")

    p = add("stats", cmd_stats, "Descriptive statistics and correlations of aggregate severity.")
    p.add_argument("trips", nargs="+")
    return parser


def _load_config(args) -> MddraConfig:
    path = args.config or os.environ.get("MDDRA_CONFIG") or None
    try:
        config = read_config(path)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror}") from None
    if args.window is not None:
        if args.window < 1:
            raise ValidationError("--window must be >= 1")
        config = dataclasses.replace(config, window=args.window)
    return config


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(format="mddra: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        try:
            args = build_parser().parse_args(argv)
        except SystemExit as stop:  # --help and --version
            return int(stop.code or 0)
        log.setLevel(logging.WARNING if args.quiet else logging.INFO)
        config = _load_config(args)
        run = Run(args, config)
        log.info(
            "command=%s seed=%d window=%d speed_mode=%s config_sha256=%s",
            args.command, args.seed, config.window, config.catalog.speed_mode.value, run.config_hash(),
        )
        args.func(run)
        return EXIT_OK
    except ValidationError as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - report any other failure as internal
        log.error("internal error: %s: %s", type(exc).__name__, exc)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
