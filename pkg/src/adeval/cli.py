"""Command-line front end for reproducible benchmark studies.

``prepare`` turns raw class-labeled tables into a benchmark cache,
``run`` executes the detector/measure grid into a resumable record
store, ``aggregate`` reduces a finished store to summary tables, and
``volume`` / ``scores`` are one-off helpers for a single split.

Runs are manifest-driven: the resolved configuration is hashed, every
output file carries the hash in a ``# manifest:`` comment line, and a
rerun against the same output directory verifies the manifest before
touching anything.  Exit codes: 0 success, 1 completed with
flagged-missing cells, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from collections import Counter
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from adeval import __version__
from adeval.curves import LabeledScores, build_roc, threshold_at_fpr
from adeval.datasets import (
    BenchmarkDataset,
    SplitSpec,
    _safe_name,
    list_benchmarks,
    load_benchmarks,
    make_benchmarks,
    minmax_scaled_table,
    read_benchmark,
    read_raw_table,
    split,
    write_benchmark,
)
from adeval.experiments import (
    Combo,
    GridConfig,
    MeasureId,
    RecordStore,
    fit_combo,
    kendall_matrix,
    loss_matrix_table,
    mean_rank_table,
    multiclass_sensitivity,
    roc_band,
    run_grid,
)
from adeval.seeding import derive_seed
from adeval.volume import bounding_box, mc_volume_at_fpr

_DETECTOR_LABELS = {"knn": "kNN", "lof": "LOF", "iforest": "IF"}
_DETECTOR_ORDER = {"knn": 0, "lof": 1, "iforest": 2}
_RUN_KEYS = ("dataset_dir", "output_dir", "only")


class CliError(Exception):
    """Usage or configuration problem; maps to exit code 2."""


# ---------------------------------------------------------------------------
# Configuration files and the run manifest
# ---------------------------------------------------------------------------


def read_config_file(path: str | Path) -> dict[str, str]:
    """Parse a ``key = value`` text file; ``#`` lines are comments."""
    pairs: dict[str, str] = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}") from None
    for lineno, line in enumerate(lines, start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        if "=" not in text:
            raise CliError(f"{path}: line {lineno}: expected key = value")
        key, _, value = text.partition("=")
        pairs[key.strip()] = value.strip()
    return pairs


def _coerce_config_value(type_text: str, key: str, raw: str):
    kind = type_text.replace(" ", "")
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        parts = [p for p in (s.strip() for s in raw.split(",")) if p]
        if kind == "tuple[int,...]":
            return tuple(int(p) for p in parts)
        if kind == "tuple[float,...]":
            return tuple(float(p) for p in parts)
        if kind == "tuple[str,...]":
            return tuple(parts)
    except ValueError:
        raise CliError(f"config key {key!r}: cannot parse {raw!r}") from None
    raise CliError(f"config key {key!r} has unsupported type {type_text!r}")


def resolve_config(pairs: dict[str, str]) -> tuple[GridConfig, dict[str, str]]:
    """Split raw key/value pairs into a GridConfig and run-level keys."""
    field_types = {f.name: str(f.type) for f in fields(GridConfig)}
    kwargs: dict[str, object] = {}
    run_keys: dict[str, str] = {}
    for key, raw in pairs.items():
        if key in _RUN_KEYS:
            run_keys[key] = raw
        elif key in field_types:
            kwargs[key] = _coerce_config_value(field_types[key], key, raw)
        else:
            known = ", ".join(sorted((*field_types, *_RUN_KEYS)))
            raise CliError(f"unknown config key {key!r} (known: {known})")
    try:
        return GridConfig(**kwargs), run_keys
    except ValueError as exc:
        raise CliError(f"invalid configuration: {exc}") from None


def manifest_hash(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class RunManifest:
    """Everything that identifies a grid run, written before it starts.

    The hash covers the resolved configuration and the tool version but
    not the directories, so the same study re-run from a different
    location produces byte-identical stores and tables.
    """

    config_path: str
    config: dict
    dataset_dir: str
    output_dir: str
    master_seed: int
    version: str
    only: tuple[str, ...] | None = None

    @property
    def hash(self) -> str:
        return manifest_hash({"config": self.config, "version": self.version})

    def to_json(self) -> str:
        payload = asdict(self)
        payload["hash"] = self.hash
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _config_payload(cfg: GridConfig) -> dict:
    return {key: list(v) if isinstance(v, tuple) else v for key, v in asdict(cfg).items()}


def _config_from_payload(payload: dict) -> GridConfig:
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in payload.items()}
    return GridConfig(**kwargs)


def _load_manifest(run_dir: Path) -> tuple[dict, GridConfig]:
    path = run_dir / "manifest.json"
    if not path.is_file():
        raise CliError(f"no manifest.json under {run_dir}; run the grid first")
    payload = json.loads(path.read_text())
    return payload, _config_from_payload(payload["config"])


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def _write_delimited(path: Path, header: Sequence[str], rows, hash_: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        handle.write(f"# manifest: {hash_}\n")
        writer = csv.writer(handle)
        writer.writerow(list(header))
        writer.writerows(rows)


def _write_text(path: Path, lines: Sequence[str], hash_: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(f"# manifest: {hash_}\n" + "\n".join(lines) + "\n")


def _aligned(header: Sequence[str], rows: Sequence[Sequence[str]]) -> list[str]:
    """Right-aligned columns (first column left-aligned)."""
    columns = [list(header)] + [list(r) for r in rows]
    widths = [max(len(row[i]) for row in columns) for i in range(len(header))]
    out = []
    for row in columns:
        cells = [row[0].ljust(widths[0])]
        cells += [cell.rjust(w) for cell, w in zip(row[1:], widths[1:])]
        out.append("  ".join(cells).rstrip())
    return out


def _fmt(value: float, digits: int = 3) -> str:
    if math.isnan(value):
        return "nan"
    return f"{value:.{digits}f}"


# ---------------------------------------------------------------------------
# Detector flags shared by volume / scores / rocband
# ---------------------------------------------------------------------------


def _add_detector_flags(parser: argparse.ArgumentParser, required: bool) -> None:
    parser.add_argument(
        "--detector", choices=tuple(_DETECTOR_LABELS), required=required,
        help="detector to fit on the training fold",
    )
    parser.add_argument(
        "--variant", choices=("kappa", "gamma", "delta"), default="kappa",
        help="k-nearest-neighbor score variant (knn only)",
    )
    parser.add_argument("--k", type=int, default=None, help="neighborhood size")
    parser.add_argument("--trees", type=int, default=100, help="forest size (iforest)")
    parser.add_argument(
        "--subsample", type=int, default=256, help="per-tree subsample (iforest)"
    )


def _combo_from_flags(args: argparse.Namespace) -> Combo:
    if args.detector is None:
        raise CliError("this command needs --detector")
    if args.detector == "knn":
        k = args.k if args.k is not None else 5
        return Combo(0, "knn", (("variant", args.variant), ("k", k)))
    if args.detector == "lof":
        k = args.k if args.k is not None else 20
        return Combo(0, "lof", (("k", k),))
    return Combo(0, "iforest", (("n_trees", args.trees), ("subsample", args.subsample)))


def _find_benchmark(dataset_dir: str | Path, name: str) -> BenchmarkDataset:
    stored = list_benchmarks(dataset_dir)
    for table, anomaly_class in stored:
        if f"{table}-{anomaly_class}" == name or (
            table == name and len([t for t, _ in stored if t == table]) == 1
        ):
            return read_benchmark(dataset_dir, table, anomaly_class)
    available = ", ".join(f"{t}-{a}" for t, a in stored) or "none"
    raise CliError(f"no benchmark named {name!r} (available: {available})")


# ---------------------------------------------------------------------------
# prepare
# ---------------------------------------------------------------------------


def cmd_prepare(args: argparse.Namespace) -> int:
    input_dir = Path(args.input)
    output_dir = Path(args.output)
    paths = sorted(input_dir.glob("*.csv"))
    if not paths:
        raise CliError(f"no raw tables (*.csv) under {input_dir}; nothing written")
    tables = [read_raw_table(p) for p in paths]  # abort before any write
    if args.minmax:
        tables = [minmax_scaled_table(t) for t in tables]
    existing = set(list_benchmarks(output_dir))
    written = present = 0
    for table in tables:
        for bench in make_benchmarks(table):
            key = (_safe_name(bench.table), _safe_name(bench.anomaly_class))
            if key in existing:
                present += 1
                continue
            write_benchmark(bench, output_dir)
            written += 1
            print(
                f"  {bench.name}: {bench.normal.shape[0]} normal, "
                f"{bench.anomaly.shape[0]} anomalous, dim {bench.dim}"
            )
    if written == 0:
        print(f"benchmark cache up to date ({present} benchmarks)")
    else:
        print(f"prepared {written} benchmarks ({present} already present) -> {output_dir}")
    return 0


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------


def _resolved_run_config(args: argparse.Namespace):
    pairs = read_config_file(args.config) if args.config else {}
    for override in args.set or []:
        if "=" not in override:
            raise CliError(f"--set expects key=value, got {override!r}")
        key, _, value = override.partition("=")
        pairs[key.strip()] = value.strip()
    if args.dataset:
        pairs["dataset_dir"] = args.dataset
    if args.out:
        pairs["output_dir"] = args.out
    cfg, run_keys = resolve_config(pairs)
    for key in ("dataset_dir", "output_dir"):
        if key not in run_keys:
            raise CliError(f"missing config key {key!r} (set it in the file or via flags)")
    only = tuple(s for s in (p.strip() for p in run_keys.get("only", "").split(",")) if s)
    return cfg, run_keys["dataset_dir"], run_keys["output_dir"], only or None


def cmd_run(args: argparse.Namespace) -> int:
    cfg, dataset_dir, output_dir, only = _resolved_run_config(args)
    benches = load_benchmarks(dataset_dir, list(only) if only else None)
    if not benches:
        raise CliError(f"no benchmarks under {dataset_dir}; run prepare first")
    manifest = RunManifest(
        config_path=str(args.config) if args.config else "<flags>",
        config=_config_payload(cfg),
        dataset_dir=str(dataset_dir),
        output_dir=str(output_dir),
        master_seed=cfg.master_seed,
        version=__version__,
        only=only,
    )
    out_root = Path(output_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    manifest_path = out_root / "manifest.json"
    if manifest_path.exists():
        recorded = json.loads(manifest_path.read_text()).get("hash")
        if recorded != manifest.hash:
            raise CliError(
                f"{manifest_path} records a different run ({recorded} != "
                f"{manifest.hash}); use a fresh output directory"
            )
        print(f"resuming run {manifest.hash}")
    else:
        manifest_path.write_text(manifest.to_json())
        print(f"run {manifest.hash}: {len(benches)} benchmarks, "
              f"{len(cfg.detector_combos())} combos, {cfg.repetitions} repetitions")
    store = RecordStore(out_root / "records", manifest_hash=manifest.hash)
    workers = args.workers if args.workers else (os.cpu_count() or 1)
    summary = run_grid(
        cfg, benches, store,
        progress=lambda msg: print(f"  {msg}"),
        workers=workers,
    )
    flagged = [r for r in store.load() if r.is_flagged_missing]
    print(
        f"cells: {summary.n_cells} total, {summary.n_new} new, "
        f"{len(flagged)} flagged-missing"
    )
    if flagged:
        counts = Counter(f for r in flagged for f in r.flags if f.startswith("error:"))
        for flag, n in sorted(counts.items()):
            print(f"  {flag}: {n} cells")
        return 1
    return 0


# ---------------------------------------------------------------------------
# aggregate
# ---------------------------------------------------------------------------


def _pick_contamination(args: argparse.Namespace, cfg: GridConfig) -> float:
    levels = cfg.contaminations
    if args.contamination is not None:
        if args.contamination not in levels:
            shown = ", ".join(f"{c:g}" for c in levels)
            raise CliError(
                f"contamination {args.contamination:g} not in this run (has: {shown})"
            )
        return args.contamination
    if len(levels) == 1:
        return levels[0]
    shown = ", ".join(f"{c:g}" for c in levels)
    raise CliError(f"store holds several contamination levels ({shown}); pass --contamination")


def _expected_benchmarks(payload: dict) -> list[tuple[str, str]]:
    stored = list_benchmarks(payload["dataset_dir"])
    only = payload.get("only")
    if only:
        stored = [
            (t, a) for t, a in stored if t in only or f"{t}-{a}" in only
        ]
    return stored


def _missing_cells(cfg, bench_names, records, contamination) -> list[tuple]:
    have = {r.cell_key for r in records}
    missing = []
    for table, anomaly_class in bench_names:
        for combo in cfg.detector_combos():
            for rep in range(cfg.repetitions):
                key = (table, anomaly_class, contamination, combo.index, rep)
                if key not in have:
                    missing.append(key)
    return missing


def _select_measures(
    cfg: GridConfig,
    measure_flags: list[str] | None,
    alpha: float | None,
    p: float | None,
) -> tuple[str, ...]:
    names = [m.name for m in cfg.measures()]
    if measure_flags:
        chosen = []
        for flag in measure_flags:
            for part in (s.strip() for s in flag.split(",")):
                if not part:
                    continue
                if part not in names:
                    raise CliError(
                        f"measure {part!r} not in this run (has: {', '.join(names)})"
                    )
                chosen.append(part)
        names = chosen

    def keep(name: str) -> bool:
        if "@" not in name:
            return True
        measure = MeasureId.parse(name)
        if measure.kind == "precision_at":
            return p is None or measure.level == p
        return alpha is None or measure.level == alpha

    names = [n for n in names if keep(n)]
    if not names:
        raise CliError("the measure filters removed every measure")
    return tuple(names)


def _rank_lines(records, names) -> tuple[list[list], list[str]]:
    tables = [mean_rank_table(records, name) for name in names]
    order = sorted(
        range(len(tables[0].detectors)),
        key=lambda i: _DETECTOR_ORDER.get(tables[0].detectors[i], 99),
    )
    detectors = [tables[0].detectors[i] for i in order]
    rows = []
    for table in tables:
        for i in order:
            rows.append(
                [table.measure, table.detectors[i], repr(float(table.mean[i])),
                 repr(float(table.std[i])), table.n_datasets]
            )
    header = ["measure"] + [_DETECTOR_LABELS.get(d, d) for d in detectors]
    text_rows = [
        [t.measure] + [f"{t.mean[i]:.2f}+-{t.std[i]:.2f}" for i in order]
        for t in tables
    ]
    return rows, _aligned(header, text_rows)


def _matrix_lines(names, matrix, fmt) -> list[str]:
    header = [""] + list(names)
    rows = [[name] + [fmt(matrix[i, j]) for j in range(len(names))]
            for i, name in enumerate(names)]
    return _aligned(header, rows)


def _aggregate_rocband(args, payload, cfg, out_dir: Path) -> int:
    if not args.benchmark:
        raise CliError("aggregate rocband needs --benchmark")
    bench = _find_benchmark(payload["dataset_dir"], args.benchmark)
    combo = _combo_from_flags(args)
    seed = cfg.master_seed if args.seed is None else args.seed
    band = roc_band(
        bench,
        lambda train, fit_seed: fit_combo(combo, train, fit_seed),
        n_splits=args.splits,
        train_fraction=cfg.train_fraction,
        contamination=args.contamination if args.contamination is not None else 0.0,
        master_seed=seed,
    )
    stem = _safe_name(f"rocband_{bench.name}_{combo.detector}_{combo.params_text}")
    path = out_dir / f"{stem}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        handle.write(f"# manifest: {payload['hash']}\n")
        handle.write(f"# splits: {band.n_splits_used} used, {band.n_skipped} skipped\n")
        writer = csv.writer(handle)
        writer.writerow(["fpr", "tpr_mean", "tpr_std", "ratio_mean", "ratio_std"])
        for i in range(band.fpr.shape[0]):
            writer.writerow(
                [repr(float(v)) for v in (
                    band.fpr[i], band.tpr_mean[i], band.tpr_std[i],
                    band.ratio_mean[i], band.ratio_std[i],
                )]
            )
    print(f"wrote {path} ({band.fpr.shape[0]} knots, {band.n_splits_used} splits)")
    return 0


def cmd_aggregate(args: argparse.Namespace) -> int:
    run_dir = Path(args.records)
    payload, cfg = _load_manifest(run_dir)
    hash_ = payload["hash"]
    out_dir = Path(args.out) if args.out else run_dir / "tables"

    if args.kind == "rocband":
        return _aggregate_rocband(args, payload, cfg, out_dir)

    contamination = _pick_contamination(args, cfg)
    records = RecordStore(run_dir / "records", manifest_hash=hash_).load()
    benches = _expected_benchmarks(payload)
    if not benches:  # cache moved or deleted: fall back to what the store has
        benches = sorted({(r.table, r.anomaly_class) for r in records})
    missing = _missing_cells(cfg, benches, records, contamination)
    if missing:
        shown = "\n".join(
            f"  {t}-{a} c={c:g} combo={g} rep={r}" for t, a, c, g, r in missing[:20]
        )
        extra = "" if len(missing) <= 20 else f"\n  ... and {len(missing) - 20} more"
        raise CliError(
            f"record store incomplete, {len(missing)} missing cells:\n{shown}{extra}"
        )
    records = [r for r in records if r.contamination == contamination]
    names = _select_measures(cfg, args.measure, args.alpha, args.p)
    tag = f"c{contamination:g}"

    if args.kind == "rank":
        rows, lines = _rank_lines(records, names)
        _write_delimited(
            out_dir / f"rank_{tag}.csv",
            ["measure", "detector", "mean_rank", "std_rank", "n_datasets"],
            rows, hash_,
        )
        _write_text(out_dir / f"rank_{tag}.txt", lines, hash_)
    elif args.kind == "kendall":
        result = kendall_matrix(records, measures=names)
        rows = [
            [result.measures[i], result.measures[j],
             repr(float(result.matrix[i, j])), int(result.pair_counts[i, j])]
            for i in range(len(names)) for j in range(len(names))
        ]
        _write_delimited(
            out_dir / f"kendall_{tag}.csv",
            ["measure_a", "measure_b", "tau", "n_benchmarks"],
            rows, hash_,
        )
        lines = _matrix_lines(result.measures, result.matrix, _fmt)
        means = np.nanmean(
            np.where(~np.eye(len(names), dtype=bool), result.matrix, np.nan), axis=1
        )
        lines += ["", "off-diagonal row means:"]
        lines += _aligned(
            ["measure", "mean tau"],
            [[name, _fmt(means[i])] for i, name in enumerate(result.measures)],
        )
        _write_text(out_dir / f"kendall_{tag}.txt", lines, hash_)
    elif args.kind == "loss":
        sel_names, matrix = loss_matrix_table(
            records, measures=names, select_on_validation=args.select_on_validation
        )
        suffix = "_val" if args.select_on_validation else ""
        rows = [
            [sel_names[i], sel_names[j], repr(float(matrix[i, j]))]
            for i in range(len(sel_names)) for j in range(len(sel_names))
        ]
        _write_delimited(
            out_dir / f"loss_{tag}{suffix}.csv",
            ["selection", "target", "mean_loss"], rows, hash_,
        )
        lines = ["mean relative loss, percent (rows select, columns judge):"]
        lines += _matrix_lines(sel_names, matrix * 100.0, lambda v: _fmt(v, 1))
        _write_text(out_dir / f"loss_{tag}{suffix}.txt", lines, hash_)
    elif args.kind == "multiclass":
        result = multiclass_sensitivity(records, measures=names)
        rows = [
            [result.measures[i], result.measures[j],
             repr(float(result.matrix[i, j]))]
            for i in range(len(names)) for j in range(len(names))
        ]
        _write_delimited(
            out_dir / f"multiclass_{tag}.csv",
            ["selection", "target", "mean_loss"], rows, hash_,
        )
        lines = [
            f"anomaly-class transfer loss, percent "
            f"({result.n_tables} tables, {result.n_skipped_tables} skipped):"
        ]
        lines += _matrix_lines(result.measures, result.matrix * 100.0, lambda v: _fmt(v, 1))
        _write_text(out_dir / f"multiclass_{tag}.txt", lines, hash_)
    else:  # pragma: no cover - argparse restricts choices
        raise CliError(f"unknown aggregate kind {args.kind!r}")

    for path in sorted(out_dir.glob(f"{args.kind}_{tag}*.txt")):
        print(path.read_text().rstrip())
    print(f"wrote tables under {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# volume and scores one-offs
# ---------------------------------------------------------------------------


def _one_off_split(args: argparse.Namespace):
    bench = _find_benchmark(args.dataset, args.benchmark)
    combo = _combo_from_flags(args)
    fold = split(
        bench,
        SplitSpec(
            train_fraction=args.train_fraction,
            contamination=args.contamination if args.contamination is not None else 0.0,
            seed=args.seed,
            repetition=args.rep,
        ),
    )
    model = fit_combo(
        combo, fold.train,
        derive_seed(args.seed, "fit", bench.name, combo.detector, combo.params, args.rep),
    )
    return bench, combo, fold, model


def cmd_volume(args: argparse.Namespace) -> int:
    bench, combo, fold, model = _one_off_split(args)
    data = LabeledScores(labels=fold.test_labels, scores=model.score(fold.test))
    estimate = mc_volume_at_fpr(
        model.score,
        bounding_box(bench.all_points()),
        data,
        args.alpha,
        n=args.n,
        seed=derive_seed(args.seed, "volume", bench.name, args.rep),
    )
    rows = [
        ("benchmark", bench.name),
        ("detector", combo.detector),
        ("params", combo.params_text),
        ("alpha", f"{args.alpha:g}"),
        ("threshold", repr(estimate.threshold)),
        ("vol", repr(estimate.vol)),
        ("cvol", repr(estimate.cvol)),
        ("n_samples", str(estimate.n_samples)),
    ]
    hash_ = manifest_hash(
        {"command": "volume", "version": __version__,
         "benchmark": bench.name, "params": combo.params_text,
         "alpha": args.alpha, "n": args.n, "seed": args.seed, "rep": args.rep}
    )
    if args.out:
        _write_delimited(Path(args.out), ["key", "value"], rows, hash_)
    for key, value in rows:
        print(f"{key},{value}")
    return 0


def cmd_scores(args: argparse.Namespace) -> int:
    bench, combo, fold, model = _one_off_split(args)
    scores = model.score(fold.test)
    rows = [(sid, repr(float(s))) for sid, s in zip(fold.test_ids, scores)]
    hash_ = manifest_hash(
        {"command": "scores", "version": __version__,
         "benchmark": bench.name, "params": combo.params_text,
         "seed": args.seed, "rep": args.rep}
    )
    if args.out:
        _write_delimited(Path(args.out), ["id", "score"], rows, hash_)
        print(f"wrote {len(rows)} scores to {args.out}")
    else:
        print("id,score")
        for sid, value in rows:
            print(f"{sid},{value}")
    return 0


# ---------------------------------------------------------------------------
# Parser and entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adeval",
        description="Anomaly-detector evaluation: benchmark preparation, "
        "grid runs, and measure-comparison tables.",
    )
    parser.add_argument("--version", action="version", version=f"adeval {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="build a benchmark cache from raw tables")
    p.add_argument("input", help="directory of raw *.csv tables (last column: class)")
    p.add_argument("output", help="benchmark cache directory")
    p.add_argument("--minmax", action="store_true",
                   help="scale each feature of each table to [0, 1] first")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("run", help="execute the detector grid into a record store")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one config key (repeatable; flags win)")
    p.add_argument("--dataset", help="benchmark cache directory (overrides dataset_dir)")
    p.add_argument("--out", help="run output directory (overrides output_dir)")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: available parallelism)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("aggregate", help="reduce a record store to summary tables")
    p.add_argument("kind", choices=("rank", "kendall", "loss", "multiclass", "rocband"))
    p.add_argument("records", help="run output directory (holds manifest.json)")
    p.add_argument("--out", help="table directory (default: <records>/tables)")
    p.add_argument("--measure", action="append",
                   help="restrict to these measures (repeatable, comma-separable)")
    p.add_argument("--alpha", type=float, default=None,
                   help="keep only curve measures at this FPR level")
    p.add_argument("--p", type=float, default=None,
                   help="keep only precision@p at this contamination level")
    p.add_argument("--contamination", type=float, default=None,
                   help="which training contamination level to aggregate")
    p.add_argument("--select-on-validation", action="store_true",
                   help="loss only: select combos on the validation columns")
    p.add_argument("--benchmark", help="rocband only: benchmark name (table-class)")
    p.add_argument("--splits", type=int, default=100, help="rocband only: resplit count")
    p.add_argument("--seed", type=int, default=None,
                   help="rocband only: master seed override")
    _add_detector_flags(p, required=False)
    p.set_defaults(func=cmd_aggregate)

    for name, func, extra in (
        ("volume", cmd_volume, True),
        ("scores", cmd_scores, False),
    ):
        p = sub.add_parser(
            name,
            help="one-off decision-volume estimate for one split"
            if extra else "emit per-sample test-fold scores for one split",
        )
        p.add_argument("--dataset", required=True, help="benchmark cache directory")
        p.add_argument("--benchmark", required=True, help="benchmark name (table-class)")
        _add_detector_flags(p, required=True)
        p.add_argument("--train-fraction", type=float, default=0.8)
        p.add_argument("--contamination", type=float, default=None)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--rep", type=int, default=0)
        if extra:
            p.add_argument("--alpha", type=float, default=0.05)
            p.add_argument("--n", type=int, default=100_000)
        p.add_argument("--out", help="write delimited output here instead of stdout"
                       if not extra else "also write the estimate to this file")
        p.set_defaults(func=func)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
