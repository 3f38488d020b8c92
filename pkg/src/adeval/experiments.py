"""Benchmark grid runner, persistent record store and result analytics.

A *cell* is one (benchmark, contamination, detector combo, repetition)
tuple.  Running the grid fits the combo on the training fold, scores the
test fold and evaluates every configured measure; records land in a
resumable delimited-text store, one file per (benchmark, detector).
Analytics collapse repetitions by averaging and then compare detectors
(mean ranks), measures (Kendall correlation), and selection strategies
(relative loss matrices, within and across anomaly classes).

All measures are oriented so that larger is better; CVOL is already the
complement of the decision-region volume.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.stats import rankdata

from adeval.curves import LabeledScores, auc, auc_at, auc_weighted, build_roc, tpr_at
from adeval.datasets import BenchmarkDataset, SplitSpec, TrainTestSplit, _safe_name, split
from adeval.detectors import iforest_fit, knn_fit, lof_fit
from adeval.seeding import derive_seed
from adeval.thresholded import PrecisionAtPConfig, f1_at_fpr, precision_at_p
from adeval.volume import bounding_box, cvol_at_fpr


# ---------------------------------------------------------------------------
# Measure identifiers
# ---------------------------------------------------------------------------

_LEVELED_KINDS = {
    "auc_at": "AUC",
    "precision_at": "precision",
    "tpr_at": "TPR",
    "f1_at": "F1",
    "cvol_at": "CVOL",
}
_PLAIN_KINDS = {"auc": "AUC", "auc_w": "AUC_w"}
_PREFIX_TO_KIND = {v: k for k, v in _LEVELED_KINDS.items()}


@dataclass(frozen=True)
class MeasureId:
    """One evaluation measure, e.g. AUC, or TPR at a false-positive level.

    ``level`` is the FPR budget alpha for the curve-based measures and
    the contamination p for ``precision_at``; plain AUC and the weighted
    AUC take no level.
    """

    kind: str
    level: float | None = None

    def __post_init__(self) -> None:
        if self.kind in _PLAIN_KINDS:
            if self.level is not None:
                raise ValueError(f"measure {self.kind!r} takes no level")
        elif self.kind in _LEVELED_KINDS:
            if self.level is None or not 0.0 < self.level <= 1.0:
                raise ValueError(f"measure {self.kind!r} needs a level in (0, 1]")
        else:
            raise ValueError(f"unknown measure kind {self.kind!r}")

    @property
    def name(self) -> str:
        if self.kind in _PLAIN_KINDS:
            return _PLAIN_KINDS[self.kind]
        return f"{_LEVELED_KINDS[self.kind]}@{self.level:g}"

    @classmethod
    def parse(cls, text: str) -> "MeasureId":
        text = text.strip()
        for kind, label in _PLAIN_KINDS.items():
            if text == label:
                return cls(kind=kind)
        if "@" in text:
            prefix, _, level = text.partition("@")
            if prefix in _PREFIX_TO_KIND:
                return cls(kind=_PREFIX_TO_KIND[prefix], level=float(level))
        raise ValueError(f"cannot parse measure name {text!r}")


# ---------------------------------------------------------------------------
# Grid configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Combo:
    """One detector plus hyperparameter setting, with its grid position."""

    index: int
    detector: str
    params: tuple[tuple[str, object], ...]

    @property
    def params_text(self) -> str:
        return " ".join(f"{k}={v}" for k, v in self.params)

    def param(self, key: str):
        for k, v in self.params:
            if k == key:
                return v
        raise KeyError(key)


@dataclass(frozen=True)
class GridConfig:
    """Everything a grid run needs besides the benchmarks themselves."""

    knn_variants: tuple[str, ...] = ("kappa", "gamma", "delta")
    knn_ks: tuple[int, ...] = (1, 3, 5, 7, 9, 13, 21, 31, 51)
    lof_ks: tuple[int, ...] = (10, 20, 50)
    iforest_trees: tuple[int, ...] = (50, 100, 200)
    iforest_subsample: int = 256
    alphas: tuple[float, ...] = (0.01, 0.05)
    ps: tuple[float, ...] = (0.01, 0.05)
    contaminations: tuple[float, ...] = (0.0,)
    repetitions: int = 10
    train_fraction: float = 0.8
    precision_rounds: int = 10
    volume_samples: int = 100_000
    validation_fraction: float = 0.0
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if not self.alphas or not self.ps:
            raise ValueError("need at least one alpha and one p level")
        for level in (*self.alphas, *self.ps):
            if not 0.0 < level <= 1.0:
                raise ValueError(f"levels must lie in (0, 1], got {level!r}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in [0, 1)")
        if self.volume_samples < 1:
            raise ValueError("volume_samples must be positive")

    def detector_combos(self) -> tuple[Combo, ...]:
        combos: list[Combo] = []
        for variant in self.knn_variants:
            for k in self.knn_ks:
                combos.append(
                    Combo(len(combos), "knn", (("variant", variant), ("k", k)))
                )
        for k in self.lof_ks:
            combos.append(Combo(len(combos), "lof", (("k", k),)))
        for n_trees in self.iforest_trees:
            combos.append(
                Combo(
                    len(combos),
                    "iforest",
                    (("n_trees", n_trees), ("subsample", self.iforest_subsample)),
                )
            )
        if not combos:
            raise ValueError("the detector grid is empty")
        return tuple(combos)

    def measures(self) -> tuple[MeasureId, ...]:
        out: list[MeasureId] = [MeasureId("auc"), MeasureId("auc_w")]
        for level in sorted(set(self.alphas) | set(self.ps), reverse=True):
            if level in self.alphas:
                out.append(MeasureId("auc_at", level))
            if level in self.ps:
                out.append(MeasureId("precision_at", level))
            if level in self.alphas:
                out.append(MeasureId("tpr_at", level))
                out.append(MeasureId("f1_at", level))
                out.append(MeasureId("cvol_at", level))
        return tuple(out)

    def measure_names(self) -> tuple[str, ...]:
        names = [m.name for m in self.measures()]
        if self.validation_fraction > 0:
            names += [f"val:{n}" for n in names]
        return tuple(names)


def fit_combo(combo: Combo, train: np.ndarray, seed: int):
    """Fit one grid combo; returns a model exposing ``score``."""
    if combo.detector == "knn":
        return knn_fit(train, k=int(combo.param("k")), variant=str(combo.param("variant")))
    if combo.detector == "lof":
        return lof_fit(train, k=int(combo.param("k")))
    if combo.detector == "iforest":
        return iforest_fit(
            train,
            n_trees=int(combo.param("n_trees")),
            subsample=int(combo.param("subsample")),
            seed=seed,
        )
    raise ValueError(f"unknown detector {combo.detector!r}")


# ---------------------------------------------------------------------------
# Records and their store
# ---------------------------------------------------------------------------

_ID_COLUMNS = (
    "grid_index",
    "table",
    "anomaly_class",
    "detector",
    "params",
    "contamination",
    "repetition",
    "flags",
)

_MISSING = "NA"


@dataclass(frozen=True)
class ExperimentRecord:
    """Measure values of one grid cell; ``None`` marks a missing value."""

    grid_index: int
    table: str
    anomaly_class: str
    detector: str
    params: str
    contamination: float
    repetition: int
    values: dict[str, float | None]
    flags: tuple[str, ...] = ()

    @property
    def benchmark(self) -> str:
        return f"{self.table}-{self.anomaly_class}"

    @property
    def combo_key(self) -> tuple:
        return (self.table, self.anomaly_class, self.contamination, self.grid_index)

    @property
    def cell_key(self) -> tuple:
        return self.combo_key + (self.repetition,)

    @property
    def is_flagged_missing(self) -> bool:
        return any(v is None for v in self.values.values())


class RecordStore:
    """Resumable record store: one delimited file per (benchmark, detector).

    Files carry the run-manifest hash in a leading comment line, then a
    header row, then one row per cell.  Appending never rewrites existing
    rows, so a finished store is byte-stable under reruns.
    """

    def __init__(self, root: str | Path, manifest_hash: str = "unmanaged"):
        self.root = Path(root)
        self.manifest_hash = manifest_hash
        self.root.mkdir(parents=True, exist_ok=True)

    def _file_for(self, record: ExperimentRecord) -> Path:
        stem = _safe_name(f"{record.table}-{record.anomaly_class}__{record.detector}")
        return self.root / f"{stem}.csv"

    def existing_keys(self) -> set[tuple]:
        return {r.cell_key for r in self.load()}

    def append(self, record: ExperimentRecord, measure_names: Sequence[str]) -> None:
        path = self._file_for(record)
        fresh = not path.exists()
        with open(path, "a", newline="") as handle:
            writer = csv.writer(handle)
            if fresh:
                handle.write(f"# manifest: {self.manifest_hash}\n")
                writer.writerow(list(_ID_COLUMNS) + list(measure_names))
            row = [
                record.grid_index,
                record.table,
                record.anomaly_class,
                record.detector,
                record.params,
                repr(record.contamination),
                record.repetition,
                ";".join(record.flags),
            ]
            for name in measure_names:
                value = record.values.get(name)
                row.append(_MISSING if value is None else repr(value))
            writer.writerow(row)

    def load(self) -> list[ExperimentRecord]:
        records: list[ExperimentRecord] = []
        for path in sorted(self.root.glob("*.csv")):
            with open(path, newline="") as handle:
                lines = (line for line in handle if not line.startswith("#"))
                reader = csv.reader(lines)
                header = next(reader, None)
                if header is None:
                    continue
                if tuple(header[: len(_ID_COLUMNS)]) != _ID_COLUMNS:
                    raise ValueError(f"{path}: unrecognized record header")
                measure_names = header[len(_ID_COLUMNS) :]
                for row in reader:
                    if not row:
                        continue
                    base = dict(zip(_ID_COLUMNS, row))
                    values = {
                        name: (None if raw == _MISSING else float(raw))
                        for name, raw in zip(measure_names, row[len(_ID_COLUMNS) :])
                    }
                    records.append(
                        ExperimentRecord(
                            grid_index=int(base["grid_index"]),
                            table=base["table"],
                            anomaly_class=base["anomaly_class"],
                            detector=base["detector"],
                            params=base["params"],
                            contamination=float(base["contamination"]),
                            repetition=int(base["repetition"]),
                            values=values,
                            flags=tuple(t for t in base["flags"].split(";") if t),
                        )
                    )
        records.sort(key=lambda r: r.cell_key)
        return records


# ---------------------------------------------------------------------------
# Running the grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunSummary:
    n_cells: int
    n_new: int
    n_flagged: int


def _evaluate_measures(
    data: LabeledScores,
    score_fn: Callable[[np.ndarray], np.ndarray],
    box,
    cfg: GridConfig,
    vol_seed: int,
    prec_seed: int,
) -> tuple[dict[str, float], list[str]]:
    values: dict[str, float] = {}
    flags: list[str] = []
    curve = build_roc(data)
    contamination = data.n_pos / len(data)
    for measure in cfg.measures():
        if measure.kind == "auc":
            values[measure.name] = auc(curve)
        elif measure.kind == "auc_w":
            values[measure.name] = auc_weighted(curve)
        elif measure.kind == "auc_at":
            values[measure.name] = auc_at(curve, measure.level, normalized=True)
        elif measure.kind == "tpr_at":
            values[measure.name] = tpr_at(curve, measure.level)
        elif measure.kind == "f1_at":
            values[measure.name] = f1_at_fpr(data, measure.level)
        elif measure.kind == "precision_at":
            if contamination < measure.level:
                flags.append(f"thinned-normals@{measure.level:g}")
            values[measure.name] = precision_at_p(
                data,
                PrecisionAtPConfig(
                    p=measure.level, rounds=cfg.precision_rounds, seed=prec_seed
                ),
            )
        elif measure.kind == "cvol_at":
            values[measure.name] = cvol_at_fpr(
                score_fn, box, data, measure.level, n=cfg.volume_samples, seed=vol_seed
            )
    return values, flags


def run_cell(
    cfg: GridConfig,
    bench: BenchmarkDataset,
    combo: Combo,
    contamination: float,
    repetition: int,
    box=None,
) -> ExperimentRecord:
    """Evaluate one grid cell; failures come back as flagged-missing."""
    if box is None:
        box = bounding_box(bench.all_points())
    names = cfg.measure_names()
    base = dict(
        grid_index=combo.index,
        table=bench.table,
        anomaly_class=bench.anomaly_class,
        detector=combo.detector,
        params=combo.params_text,
        contamination=contamination,
        repetition=repetition,
    )
    try:
        fold = split(
            bench,
            SplitSpec(
                train_fraction=cfg.train_fraction,
                contamination=contamination,
                seed=cfg.master_seed,
                repetition=repetition,
            ),
        )
        model = fit_combo(
            combo,
            fold.train,
            derive_seed(cfg.master_seed, "fit", bench.name, combo.detector,
                        combo.params, repetition),
        )
        scores = model.score(fold.test)
        data = LabeledScores(labels=fold.test_labels, scores=scores)
        vol_seed = derive_seed(cfg.master_seed, "volume", bench.name, repetition)
        prec_seed = derive_seed(cfg.master_seed, "precision", bench.name, repetition)

        if cfg.validation_fraction > 0:
            (eval_labels, eval_scores), (val_labels, val_scores) = _split_validation(
                data, cfg.validation_fraction,
                derive_seed(cfg.master_seed, "valsplit", bench.name, repetition),
            )
            eval_data = LabeledScores(labels=eval_labels, scores=eval_scores)
            values, flags = _evaluate_measures(
                eval_data, model.score, box, cfg, vol_seed, prec_seed
            )
            try:
                val_data = LabeledScores(labels=val_labels, scores=val_scores)
                val_values, _ = _evaluate_measures(
                    val_data, model.score, box, cfg, vol_seed, prec_seed
                )
                for key, value in val_values.items():
                    values[f"val:{key}"] = value
            except ValueError as exc:
                for name in names:
                    if name.startswith("val:"):
                        values[name] = None
                flags = list(flags) + [f"error:{type(exc).__name__}"]
        else:
            values, flags = _evaluate_measures(
                data, model.score, box, cfg, vol_seed, prec_seed
            )
        return ExperimentRecord(
            **base, values={n: values.get(n) for n in names}, flags=tuple(flags)
        )
    except (ValueError, FloatingPointError) as exc:
        return ExperimentRecord(
            **base,
            values={n: None for n in names},
            flags=(f"error:{type(exc).__name__}",),
        )


def _split_validation(data: LabeledScores, fraction: float, seed: int):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(data))
    n_val = int(round(fraction * len(data)))
    val_idx, eval_idx = perm[:n_val], perm[n_val:]
    return (
        (data.labels[eval_idx], data.scores[eval_idx]),
        (data.labels[val_idx], data.scores[val_idx]),
    )


def _run_block(args) -> list[ExperimentRecord]:
    """Worker entry: evaluate the pending cells of one benchmark block."""
    cfg, bench, contamination, pending = args
    box = bounding_box(bench.all_points())
    combos = cfg.detector_combos()
    return [
        run_cell(cfg, bench, combos[combo_index], contamination, repetition, box)
        for combo_index, repetition in pending
    ]


def run_grid(
    cfg: GridConfig,
    benchmarks: Sequence[BenchmarkDataset],
    store: RecordStore,
    progress: Callable[[str], None] | None = None,
    workers: int = 1,
) -> RunSummary:
    """Run every missing cell of the grid and append it to the store.

    Cells already present in the store are skipped, so an interrupted run
    resumes where it stopped and a completed run is a no-op.  A failing
    cell is recorded as flagged-missing; the grid itself never aborts.

    Cells are blocked by (benchmark, contamination) and blocks may be
    evaluated by ``workers`` processes; seeds derive from cell identity,
    never from scheduling, and records are appended in grid order, so the
    store content does not depend on the worker count.
    """
    if not benchmarks:
        raise ValueError("no benchmarks to run on")
    combos = cfg.detector_combos()
    names = cfg.measure_names()
    done = store.existing_keys()
    ordered = sorted(benchmarks, key=lambda b: (b.table, b.anomaly_class))

    blocks = []
    n_cells = 0
    for bench in ordered:
        for contamination in cfg.contaminations:
            pending = []
            for combo in combos:
                for repetition in range(cfg.repetitions):
                    n_cells += 1
                    key = (
                        bench.table,
                        bench.anomaly_class,
                        contamination,
                        combo.index,
                        repetition,
                    )
                    if key not in done:
                        pending.append((combo.index, repetition))
            if pending:
                blocks.append((cfg, bench, contamination, pending))

    n_new = n_flagged = 0

    def consume(block, records):
        nonlocal n_new, n_flagged
        _, bench, contamination, _ = block
        if progress:
            progress(f"{bench.name} c={contamination:g}: {len(records)} cells")
        for record in records:
            store.append(record, names)
            n_new += 1
            if record.is_flagged_missing:
                n_flagged += 1

    if workers > 1 and len(blocks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            for block, records in zip(blocks, pool.map(_run_block, blocks)):
                consume(block, records)
    else:
        for block in blocks:
            consume(block, _run_block(block))
    return RunSummary(n_cells=n_cells, n_new=n_new, n_flagged=n_flagged)


# ---------------------------------------------------------------------------
# Collapsing repetitions
# ---------------------------------------------------------------------------


def mean_records(records: Iterable[ExperimentRecord]) -> list[ExperimentRecord]:
    """Average measure values over repetitions (repetition becomes -1).

    A value missing in some repetitions averages over the present ones; a
    value missing everywhere stays missing.
    """
    groups: dict[tuple, list[ExperimentRecord]] = {}
    for record in records:
        groups.setdefault(record.combo_key, []).append(record)
    collapsed = []
    for group in groups.values():
        names: list[str] = []
        for record in group:
            for name in record.values:
                if name not in names:
                    names.append(name)
        values: dict[str, float | None] = {}
        for name in names:
            present = [r.values[name] for r in group if r.values.get(name) is not None]
            values[name] = float(np.mean(present)) if present else None
        first = group[0]
        flags = tuple(sorted({f for r in group for f in r.flags}))
        collapsed.append(replace(first, repetition=-1, values=values, flags=flags))
    collapsed.sort(key=lambda r: r.combo_key)
    return collapsed


def _single_contamination(records: Sequence[ExperimentRecord]) -> float:
    levels = sorted({r.contamination for r in records})
    if len(levels) != 1:
        raise ValueError(
            f"records mix contamination levels {levels}; filter to one first"
        )
    return levels[0]


def _measure_name(measure: MeasureId | str) -> str:
    return measure.name if isinstance(measure, MeasureId) else str(measure)


# ---------------------------------------------------------------------------
# Mean ranks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RankTable:
    """Mean +- std of detector ranks across benchmarks for one measure."""

    measure: str
    detectors: tuple[str, ...]
    mean: NDArray[np.float64]
    std: NDArray[np.float64]
    n_datasets: int


def mean_rank_table(
    records: Sequence[ExperimentRecord], measure: MeasureId | str
) -> RankTable:
    """Rank detectors per benchmark (best hyperparameters, rank 1 = best).

    Each detector is represented by its best hyperparameter setting under
    the measure; ties get fractional ranks.  Requires every detector to
    have a value on every benchmark.
    """
    name = _measure_name(measure)
    collapsed = mean_records(records)
    _single_contamination(collapsed)
    benchmarks = sorted({r.benchmark for r in collapsed})
    detectors = tuple(sorted({r.detector for r in collapsed}))
    best: dict[tuple[str, str], float] = {}
    for record in collapsed:
        value = record.values.get(name)
        if value is None:
            continue
        key = (record.benchmark, record.detector)
        if key not in best or value > best[key]:
            best[key] = value
    missing = [
        (b, d) for b in benchmarks for d in detectors if (b, d) not in best
    ]
    if missing:
        shown = ", ".join(f"{b}/{d}" for b, d in missing[:10])
        raise ValueError(f"missing detector results for: {shown}")
    ranks = np.empty((len(benchmarks), len(detectors)))
    for i, bench in enumerate(benchmarks):
        values = np.array([best[(bench, d)] for d in detectors])
        ranks[i] = rankdata(-values, method="average")
    return RankTable(
        measure=name,
        detectors=detectors,
        mean=ranks.mean(axis=0),
        std=ranks.std(axis=0),
        n_datasets=len(benchmarks),
    )


# ---------------------------------------------------------------------------
# Kendall correlation between measures
# ---------------------------------------------------------------------------


def kendall_tau(x: Sequence[float], y: Sequence[float]) -> float:
    """Tie-corrected Kendall tau-b by exhaustive pair comparison.

    Returns NaN when either sequence is fully tied (the coefficient is
    undefined there).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be equal-length vectors")
    n = x.shape[0]
    if n < 2:
        return float("nan")
    iu = np.triu_indices(n, k=1)
    sx = np.sign(x[:, None] - x[None, :])[iu]
    sy = np.sign(y[:, None] - y[None, :])[iu]
    concordant = int(((sx == sy) & (sx != 0)).sum())
    discordant = int(((sx == -sy) & (sx != 0)).sum())
    n_pairs = n * (n - 1) // 2
    ties_x = int((sx == 0).sum())
    ties_y = int((sy == 0).sum())
    denom = math.sqrt(float(n_pairs - ties_x) * float(n_pairs - ties_y))
    if denom == 0.0:
        return float("nan")
    return (concordant - discordant) / denom


@dataclass(frozen=True)
class KendallMatrix:
    measures: tuple[str, ...]
    matrix: NDArray[np.float64]
    pair_counts: NDArray[np.int64]  # benchmarks contributing per pair


def kendall_matrix(
    records: Sequence[ExperimentRecord], measures: Sequence[str] | None = None
) -> KendallMatrix:
    """Average per-benchmark Kendall tau between every measure pair.

    Per benchmark, each measure induces a vector over all detector combos;
    tau is computed per measure pair and averaged across benchmarks,
    skipping benchmarks where it is undefined (fully tied vectors).
    """
    collapsed = mean_records(records)
    _single_contamination(collapsed)
    names = tuple(measures) if measures else _value_names(collapsed)
    benchmarks = sorted({r.benchmark for r in collapsed})
    k = len(names)
    sums = np.zeros((k, k))
    counts = np.zeros((k, k), dtype=np.int64)
    for bench in benchmarks:
        rows = sorted(
            (r for r in collapsed if r.benchmark == bench),
            key=lambda r: r.grid_index,
        )
        if len(rows) < 2:
            raise ValueError(
                f"benchmark {bench} has {len(rows)} combo(s); need at least 2"
            )
        vectors = {
            name: np.array(
                [math.nan if r.values.get(name) is None else r.values[name] for r in rows]
            )
            for name in names
        }
        for i in range(k):
            for j in range(k):
                vx, vy = vectors[names[i]], vectors[names[j]]
                ok = np.isfinite(vx) & np.isfinite(vy)
                if ok.sum() < 2:
                    continue
                tau = kendall_tau(vx[ok], vy[ok])
                if math.isnan(tau):
                    continue
                sums[i, j] += tau
                counts[i, j] += 1
    matrix = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return KendallMatrix(measures=names, matrix=matrix, pair_counts=counts)


def _value_names(records: Sequence[ExperimentRecord]) -> tuple[str, ...]:
    names: list[str] = []
    for record in records:
        for name in record.values:
            if not name.startswith("val:") and name not in names:
                names.append(name)
    return tuple(names)


# ---------------------------------------------------------------------------
# Relative loss of hyperparameter selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LossResult:
    mean_loss: float
    n_datasets: int
    n_excluded_combos: int


def loss_matrix(
    records: Sequence[ExperimentRecord],
    selection: MeasureId | str,
    target: MeasureId | str,
    select_on_validation: bool = False,
) -> LossResult:
    """Mean relative loss of selecting combos by one measure, judging by another.

    Per benchmark the combo maximizing the selection measure is chosen
    (ties: first in grid order) and the loss is
    (best_target - target_at_choice) / best_target, zero when the best
    target value is zero.  Combos missing either value are excluded from
    both the argmax and the best, and counted.

    With ``select_on_validation`` the argmax reads the ``val:``-prefixed
    columns written by a run with a validation fraction, keeping selection
    and judgment on disjoint samples.
    """
    sel_name = _measure_name(selection)
    tgt_name = _measure_name(target)
    if select_on_validation:
        sel_name = f"val:{sel_name}"
    collapsed = mean_records(records)
    _single_contamination(collapsed)
    benchmarks = sorted({r.benchmark for r in collapsed})
    losses = []
    excluded = 0
    for bench in benchmarks:
        rows = sorted(
            (r for r in collapsed if r.benchmark == bench),
            key=lambda r: r.grid_index,
        )
        usable = [
            r
            for r in rows
            if r.values.get(sel_name) is not None and r.values.get(tgt_name) is not None
        ]
        excluded += len(rows) - len(usable)
        if not usable:
            raise ValueError(f"benchmark {bench} has no usable combo for {sel_name}")
        sel_values = np.array([r.values[sel_name] for r in usable])
        tgt_values = np.array([r.values[tgt_name] for r in usable])
        chosen = int(np.argmax(sel_values))  # first maximum = lowest grid index
        best = float(tgt_values.max())
        used = float(tgt_values[chosen])
        losses.append(0.0 if best == 0.0 else (best - used) / best)
    return LossResult(
        mean_loss=float(np.mean(losses)),
        n_datasets=len(benchmarks),
        n_excluded_combos=excluded,
    )


def loss_matrix_table(
    records: Sequence[ExperimentRecord],
    measures: Sequence[str] | None = None,
    select_on_validation: bool = False,
) -> tuple[tuple[str, ...], NDArray[np.float64]]:
    """Full selection-vs-target loss matrix over all measure pairs."""
    collapsed = mean_records(records)
    names = tuple(measures) if measures else _value_names(collapsed)
    matrix = np.zeros((len(names), len(names)))
    for i, sel in enumerate(names):
        for j, tgt in enumerate(names):
            matrix[i, j] = loss_matrix(
                records, sel, tgt, select_on_validation=select_on_validation
            ).mean_loss
    return names, matrix


# ---------------------------------------------------------------------------
# Sensitivity to the anomaly class used for selection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MulticlassResult:
    measures: tuple[str, ...]
    matrix: NDArray[np.float64]
    n_tables: int
    n_skipped_tables: int


def multiclass_sensitivity(
    records: Sequence[ExperimentRecord], measures: Sequence[str] | None = None
) -> MulticlassResult:
    """Loss of selecting hyperparameters on the wrong anomaly class.

    For every table with at least two anomaly classes and every ordered
    class pair (a, b), a != b: pick the combo maximizing the selection
    measure on class a, then compute its relative loss in the target
    measure on class b against class b's own best.  Entries average over
    ordered pairs and tables; single-class tables are skipped and counted.
    """
    collapsed = mean_records(records)
    _single_contamination(collapsed)
    names = tuple(measures) if measures else _value_names(collapsed)
    by_table: dict[str, dict[str, list[ExperimentRecord]]] = {}
    for record in collapsed:
        by_table.setdefault(record.table, {}).setdefault(
            record.anomaly_class, []
        ).append(record)
    k = len(names)
    sums = np.zeros((k, k))
    counts = np.zeros((k, k), dtype=np.int64)
    n_used = n_skipped = 0
    for table in sorted(by_table):
        classes = sorted(by_table[table])
        if len(classes) < 2:
            n_skipped += 1
            continue
        n_used += 1
        per_class = {
            cls: {r.grid_index: r for r in by_table[table][cls]} for cls in classes
        }
        for cls_a in classes:
            for cls_b in classes:
                if cls_a == cls_b:
                    continue
                rows_a, rows_b = per_class[cls_a], per_class[cls_b]
                common = sorted(set(rows_a) & set(rows_b))
                for i, sel in enumerate(names):
                    for j, tgt in enumerate(names):
                        usable = [
                            g
                            for g in common
                            if rows_a[g].values.get(sel) is not None
                            and rows_b[g].values.get(tgt) is not None
                        ]
                        if not usable:
                            continue
                        sel_values = np.array([rows_a[g].values[sel] for g in usable])
                        tgt_values = np.array([rows_b[g].values[tgt] for g in usable])
                        chosen = int(np.argmax(sel_values))
                        best = float(tgt_values.max())
                        used = float(tgt_values[chosen])
                        sums[i, j] += 0.0 if best == 0.0 else (best - used) / best
                        counts[i, j] += 1
    if n_used == 0:
        raise ValueError("no table has two or more anomaly classes")
    matrix = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return MulticlassResult(
        measures=names, matrix=matrix, n_tables=n_used, n_skipped_tables=n_skipped
    )


# ---------------------------------------------------------------------------
# ROC variability across resplits
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RocBand:
    """Pointwise mean +- std of TPR and TPR/FPR over seeded resplits."""

    fpr: NDArray[np.float64]
    tpr_mean: NDArray[np.float64]
    tpr_std: NDArray[np.float64]
    ratio_mean: NDArray[np.float64]
    ratio_std: NDArray[np.float64]
    n_splits_used: int
    n_skipped: int


def roc_band(
    bench: BenchmarkDataset,
    fit: Callable[[np.ndarray, int], object],
    n_splits: int,
    train_fraction: float = 0.8,
    contamination: float = 0.0,
    master_seed: int = 0,
    repetitions: Sequence[int] | None = None,
) -> RocBand:
    """Evaluate the ROC curve on repeated resplits and band its spread.

    Each repetition resplits the benchmark, refits via ``fit(train, seed)``
    and evaluates the test ROC.  All curves are interpolated onto the
    union of their vertex FPRs; the band reports mean and sample std of
    TPR and of the ratio TPR/FPR (0 at FPR = 0) per grid point.  Splits
    whose test fold degenerates to one class are skipped and counted.
    """
    if n_splits < 2:
        raise ValueError("need at least 2 splits for a band")
    reps = list(repetitions) if repetitions is not None else list(range(n_splits))
    if len(reps) != n_splits:
        raise ValueError("repetitions must provide one entry per split")
    curves = []
    skipped = 0
    for rep in reps:
        fold = split(
            bench,
            SplitSpec(
                train_fraction=train_fraction,
                contamination=contamination,
                seed=master_seed,
                repetition=rep,
            ),
        )
        try:
            labeled = LabeledScores(
                labels=fold.test_labels,
                scores=np.asarray(
                    fit(
                        fold.train,
                        derive_seed(master_seed, "rocband-fit", bench.name, rep),
                    ).score(fold.test)
                ),
            )
        except ValueError:
            skipped += 1
            continue
        curves.append(build_roc(labeled))
    if len(curves) < 2:
        raise ValueError("fewer than 2 usable splits; cannot band")
    grid = np.unique(np.concatenate([c.fpr for c in curves]))
    tprs = np.array([[tpr_at(c, a) for a in grid] for c in curves])
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(grid[None, :] > 0, tprs / grid[None, :], 0.0)
    return RocBand(
        fpr=grid,
        tpr_mean=tprs.mean(axis=0),
        tpr_std=tprs.std(axis=0, ddof=1),
        ratio_mean=ratios.mean(axis=0),
        ratio_std=ratios.std(axis=0, ddof=1),
        n_splits_used=len(curves),
        n_skipped=skipped,
    )
