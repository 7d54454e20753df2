"""Operator command line.

Subcommands: run, evaluate, sweep-report, kappa, balance-manifest,
manifest-stats, export-geojson. Exit codes: 0 success, 1 runtime failure,
2 usage or validation error. Only `run` writes anywhere implicit (the
configured store); every other subcommand leaves its inputs untouched.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import signal
import sys
import threading
from datetime import datetime
from pathlib import Path

from .evaluation.kappa import fleiss_kappa, load_annotation_csv
from .evaluation.manifests import (
    LABELS,
    SPLITS,
    balanced_manifest,
    dump_manifest_csv,
    load_manifest_csv,
    manifest_stats,
)
from .evaluation.metrics import (
    NEGATIVE_LABEL,
    POSITIVE_LABEL,
    ConfusionMatrix,
    metrics_from_confusion,
    round_half_up,
)
from .evaluation.sweeps import (
    architecture_summary,
    dump_sweep_csv,
    factor_effect_table,
    format_rate,
    leaderboard,
    load_sweep_csv,
    paired_win_count,
)
from .pipeline import ConfigError, load_config, run_pipeline
from .store import DetectionStore, FilterError, QueryFilter, StoreError


class CliError(Exception):
    """Validation or usage failure; maps to exit code 2."""


def _table(rows) -> str:
    rows = [[str(cell) for cell in row] for row in rows]
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    return "\n".join(
        "  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
        for row in rows
    )


def _metric_text(value: float) -> str:
    return f"{round_half_up(value, 3):.3f}"


def _write_output(text: str, output: str):
    if output == "-":
        sys.stdout.write(text)
    else:
        Path(output).write_text(text, encoding="utf-8")


def _load_label_csv(path) -> dict[str, str]:
    try:
        fh = open(Path(path), newline="", encoding="utf-8")
    except OSError as exc:
        raise CliError(str(exc)) from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["id", "label"]:
            raise CliError(f"{path}: expected header 'id,label'")
        labels: dict[str, str] = {}
        for line_no, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != 2:
                raise CliError(f"{path}:{line_no}: expected 2 columns")
            image_id, label = cells[0].strip(), cells[1].strip()
            if not image_id:
                raise CliError(f"{path}:{line_no}: empty id")
            if label not in (POSITIVE_LABEL, NEGATIVE_LABEL):
                raise CliError(f"{path}:{line_no}: unknown label {label!r}")
            if image_id in labels:
                raise CliError(f"{path}:{line_no}: duplicate id {image_id!r}")
            labels[image_id] = label
    if not labels:
        raise CliError(f"{path}: no rows")
    return labels


def cmd_evaluate(args) -> int:
    predictions = _load_label_csv(args.predictions)
    truth = _load_label_csv(args.truth)
    only_predicted = sorted(set(predictions) - set(truth))
    only_truth = sorted(set(truth) - set(predictions))
    if only_predicted or only_truth:
        print(
            f"id mismatch: {len(only_predicted)} only in predictions, "
            f"{len(only_truth)} only in truth",
            file=sys.stderr,
        )
        if only_predicted:
            print("  only in predictions: " + ", ".join(only_predicted[:10]), file=sys.stderr)
        if only_truth:
            print("  only in truth: " + ", ".join(only_truth[:10]), file=sys.stderr)
        return 2
    cm = ConfusionMatrix.from_labels(
        (truth[image_id], predictions[image_id]) for image_id in sorted(truth)
    )
    m = metrics_from_confusion(cm)
    print(
        _table(
            [
                ["truth \\ predicted", POSITIVE_LABEL, NEGATIVE_LABEL],
                [POSITIVE_LABEL, cm.tp, cm.fn],
                [NEGATIVE_LABEL, cm.fp, cm.tn],
            ]
        )
    )
    print()
    for name, value in zip(("accuracy", "precision", "recall", "f1"), m):
        print(f"{name:<9}  {_metric_text(value)}")
    return 0


def cmd_sweep_report(args) -> int:
    source = Path(args.sweep_csv)
    try:
        runs = load_sweep_csv(source, enforce_grid=not args.no_grid_check)
        ranked = leaderboard(runs, top_k=args.top_k)
        summaries = architecture_summary(runs, std=args.std)
        lr_effects = factor_effect_table(runs, "lr", std=args.std)
        wd_effects = factor_effect_table(runs, "wd", std=args.std)
        wins = [
            paired_win_count(runs, "optimizer"),
            paired_win_count(runs, "class_balancing"),
        ]
    except (OSError, ValueError) as exc:
        raise CliError(str(exc)) from None

    header = ["rank", "optimizer", "architecture", "balancing", "lr", "wd",
              "accuracy", "precision", "recall", "f1"]
    rows = [header]
    for rank, run in enumerate(ranked, start=1):
        rows.append(
            [
                rank,
                run.optimizer,
                run.architecture,
                "yes" if run.class_balancing else "no",
                format_rate(run.learning_rate),
                format_rate(run.weight_decay),
                run.accuracy,
                run.precision,
                run.recall,
                run.f1,
            ]
        )
    print("== leaderboard ==")
    print(_table(rows))

    print("\n== architecture summary ==")
    rows = [["architecture", "mean_f1", "std_f1", "avg_rank"]]
    for s in summaries:
        rows.append([s.architecture, f"{s.mean_f1:.4f}", f"{s.std_f1:.4f}", f"{s.avg_rank:.3f}"])
    print(_table(rows))

    for title, effects in (("learning rate", lr_effects), ("weight decay", wd_effects)):
        print(f"\n== effect of {title} ==")
        rows = [["optimizer", "value", "mean_f1", "std_f1", "runs"]]
        for e in effects:
            rows.append(
                [e.optimizer, format_rate(e.value), f"{e.mean_f1:.4f}", f"{e.std_f1:.4f}", e.count]
            )
        print(_table(rows))

    print("\n== paired wins ==")
    rows = [["factor", "a", "b", "wins_a", "wins_b", "ties", "pairs"]]
    for w in wins:
        rows.append([w.factor, w.level_a, w.level_b, w.wins_a, w.wins_b, w.ties, w.pairs])
    print(_table(rows))

    out_dir = Path(args.out_dir) if args.out_dir else source.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = source.stem
    (out_dir / f"{stem}.leaderboard.csv").write_text(dump_sweep_csv(ranked), encoding="utf-8")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["architecture", "mean_f1", "std_f1", "avg_rank"])
    for s in summaries:
        writer.writerow([s.architecture, repr(s.mean_f1), repr(s.std_f1), repr(s.avg_rank)])
    (out_dir / f"{stem}.architectures.csv").write_text(buf.getvalue(), encoding="utf-8")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["factor", "optimizer", "value", "mean_f1", "std_f1", "runs"])
    for factor, effects in (("lr", lr_effects), ("wd", wd_effects)):
        for e in effects:
            writer.writerow(
                [factor, e.optimizer, format_rate(e.value), repr(e.mean_f1), repr(e.std_f1), e.count]
            )
    (out_dir / f"{stem}.effects.csv").write_text(buf.getvalue(), encoding="utf-8")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["factor", "level_a", "level_b", "wins_a", "wins_b", "ties", "pairs"])
    for w in wins:
        writer.writerow([w.factor, w.level_a, w.level_b, w.wins_a, w.wins_b, w.ties, w.pairs])
    (out_dir / f"{stem}.wins.csv").write_text(buf.getvalue(), encoding="utf-8")
    return 0


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.threshold_bits is not None:
            cfg = dataclasses.replace(cfg, dedup_threshold_bits=args.threshold_bits)
    except ConfigError as exc:
        raise CliError(str(exc)) from None
    mode = "drain" if args.drain else "live"
    stop_event = threading.Event()
    if mode == "live":
        try:
            signal.signal(signal.SIGINT, lambda *_: stop_event.set())
            signal.signal(signal.SIGTERM, lambda *_: stop_event.set())
        except ValueError:
            pass  # not the main thread; rely on the caller's stop handling
    try:
        stats = run_pipeline(cfg, mode=mode, stop_event=stop_event)
    except StoreError as exc:
        print(f"store failure: {exc}", file=sys.stderr)
        return 1
    print(stats.format())
    return 1 if stats.aborted else 0


def cmd_kappa(args) -> int:
    try:
        matrix = load_annotation_csv(args.counts_csv)
    except (OSError, ValueError) as exc:
        raise CliError(str(exc)) from None
    value = fleiss_kappa(matrix)
    print(f"items {matrix.n_items}")
    print(f"raters {matrix.n_raters}")
    print(f"categories {matrix.n_categories}")
    print(f"kappa {value:.6f}")
    return 0


def cmd_balance_manifest(args) -> int:
    try:
        manifest = load_manifest_csv(args.manifest)
        balanced = balanced_manifest(manifest, split=args.split, seed=args.seed)
    except (OSError, ValueError) as exc:
        raise CliError(str(exc)) from None
    _write_output(dump_manifest_csv(balanced), args.output)
    return 0


def cmd_manifest_stats(args) -> int:
    try:
        manifest = load_manifest_csv(args.manifest)
    except (OSError, ValueError) as exc:
        raise CliError(str(exc)) from None
    stats = manifest_stats(manifest)

    def section(title: str, table: dict):
        print(title)
        rows = [["", *SPLITS, "total"]]
        for key in table:
            counts = table[key]
            rows.append([key, *(counts[split] for split in SPLITS), sum(counts.values())])
        rows.append(
            ["total", *(stats.split_totals[split] for split in SPLITS), stats.total]
        )
        print(_table(rows))

    section("counts by source", stats.by_source)
    print()
    section("counts by label", stats.by_label)
    return 0


def _parse_cli_timestamp(raw: str, name: str) -> datetime:
    try:
        value = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError:
        raise CliError(f"{name} is not an RFC 3339 timestamp: {raw!r}") from None
    if value.tzinfo is None:
        raise CliError(f"{name} must carry a timezone offset: {raw!r}")
    return value


def cmd_export_geojson(args) -> int:
    bbox = None
    if args.bbox is not None:
        parts = args.bbox.split(",")
        if len(parts) != 4:
            raise CliError("bbox must be minLon,minLat,maxLon,maxLat")
        try:
            bbox = tuple(float(part) for part in parts)
        except ValueError:
            raise CliError(f"bbox has a non-numeric component: {args.bbox!r}") from None
    try:
        flt = QueryFilter(
            label=args.label,
            since=_parse_cli_timestamp(args.since, "since") if args.since else None,
            until=_parse_cli_timestamp(args.until, "until") if args.until else None,
            bbox=bbox,
            min_prob=args.min_prob,
        )
    except FilterError as exc:
        raise CliError(str(exc)) from None
    try:
        with DetectionStore(args.store, read_only=True) as store:
            collection = store.export_geojson(flt)
    except StoreError as exc:
        raise CliError(str(exc)) from None
    _write_output(json.dumps(collection, sort_keys=True) + "\n", args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="landslide-watch",
        description="Social-media landslide monitoring pipeline and evaluation toolkit.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("run", help="run the pipeline from a config file")
    p.add_argument("config")
    p.add_argument("--drain", action="store_true", help="replay a finite feed to completion")
    p.add_argument("--threshold-bits", type=int, default=None,
                   help="override the dedup Hamming threshold")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("evaluate", help="confusion matrix and metrics from two label CSVs")
    p.add_argument("predictions")
    p.add_argument("truth")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep-report", help="leaderboard, summaries, effects, win counts")
    p.add_argument("sweep_csv")
    p.add_argument("--std", choices=("population", "sample"), default="population")
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--out-dir", default=None, help="where to write the CSV siblings")
    p.add_argument("--no-grid-check", action="store_true",
                   help="accept learning rates and weight decays off the standard grids")
    p.set_defaults(func=cmd_sweep_report)

    p = sub.add_parser("kappa", help="Fleiss' kappa from an annotation-count CSV")
    p.add_argument("counts_csv")
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("balance-manifest", help="oversample one split to class balance")
    p.add_argument("manifest")
    p.add_argument("--split", choices=SPLITS, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", "-o", default="-")
    p.set_defaults(func=cmd_balance_manifest)

    p = sub.add_parser("manifest-stats", help="per-source and per-label split counts")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_manifest_stats)

    p = sub.add_parser("export-geojson", help="GeoJSON FeatureCollection from a store")
    p.add_argument("store")
    p.add_argument("--label", choices=LABELS, default=None)
    p.add_argument("--since", default=None)
    p.add_argument("--until", default=None)
    p.add_argument("--bbox", default=None, help="minLon,minLat,maxLon,maxLat")
    p.add_argument("--min-prob", type=float, default=None)
    p.add_argument("--output", "-o", default="-")
    p.set_defaults(func=cmd_export_geojson)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
