"""Experimental protocol: repeated holdout, accuracy gain and irrelevance threshold.

For every dataset and repetition the data is split 50/50 (stratified).  On
the training half each learner gets a flat estimate, a nested estimate and a
flat-selected hyperparameter setting; the learner is then refit on the
training half with that setting and scored on the test half ("future
accuracy").  These per-learner rows form the raw table.  Everything else
(selections, gains, thresholds, scenario filtering, the alternative
analyses and the fixed-learner baseline) is derived from the raw table.
"""
from __future__ import annotations

import csv
import json
import logging
import multiprocessing
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .data import Dataset, stratified_holdout
from .errors import (
    ConfigError,
    FlatNestError,
    IncompleteTable,
    InsufficientRepetitions,
    LearnerError,
    LearnerFailure,
    MismatchedRecords,
    UnknownLearner,
)
from .learners import HyperPoint, LearnerSpec, accuracy, get_spec, train
from .rng import derive_seed
from .selection import flat_cv, nested_cv, select_algorithm

log = logging.getLogger(__name__)

THRESHOLDS = ("nested-gap", "stddev")
ANALYSES = ("primary", "avg_first", "per_repetition")


@dataclass(frozen=True)
class Scenario:
    name: str
    learners: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "learners", tuple(self.learners))
        if not self.learners:
            raise ConfigError(f"scenario {self.name!r} has no learners")
        if len(set(self.learners)) != len(self.learners):
            raise ConfigError(f"scenario {self.name!r} lists a learner twice")


@dataclass(frozen=True)
class LearnerRow:
    """One raw-table row: a learner's results on one (dataset, repetition)."""

    dataset: str
    n_instances: int
    repetition: int
    learner: str
    flat_estimate: float
    nested_estimate: float
    future_accuracy: float
    theta: HyperPoint
    nested_thetas: tuple[HyperPoint, ...] = ()

    @property
    def gap(self) -> float:
        """|nested estimate - future accuracy|."""
        return abs(self.nested_estimate - self.future_accuracy)


@dataclass(frozen=True)
class RepetitionRecord:
    dataset: str
    repetition: int
    rows: tuple[LearnerRow, ...]
    flat_choice: str
    nested_choice: str
    future_flat: float
    future_nested: float
    accgain: float
    delta_flat: float
    delta_nested: float
    threshold: float

    @property
    def same_choice(self) -> bool:
        return self.flat_choice == self.nested_choice

    def row(self, learner: str) -> LearnerRow:
        for r in self.rows:
            if r.learner == learner:
                return r
        raise KeyError(learner)


@dataclass(frozen=True)
class DatasetRecord:
    dataset: str
    n_instances: int
    accgain: float
    threshold: float
    records: tuple[RepetitionRecord, ...]

    @property
    def abs_gain(self) -> float:
        return abs(self.accgain)


@dataclass(frozen=True)
class Pair:
    """One unit entering the paired test: |gain| against its threshold."""

    dataset: str
    repetition: int | None
    n_instances: int
    gain: float
    threshold: float

    @property
    def abs_gain(self) -> float:
        return abs(self.gain)


@dataclass(frozen=True)
class AnalysisResult:
    scenario: Scenario
    method: str
    threshold: str
    reference: str
    pairs: tuple[Pair, ...]
    agreements: tuple[bool, ...]


def _mean(values: Iterable[float]) -> float:
    values = list(values)
    total = 0.0
    for v in values:
        total += v
    return total / len(values)


# -- single cell ---------------------------------------------------------------


def cell_seed(master_seed: int, dataset: str, repetition: int) -> int:
    return derive_seed(master_seed, "cell", dataset, repetition)


def compute_cell(
    data: Dataset,
    specs: Sequence[LearnerSpec],
    repetition: int,
    master_seed: int,
    fraction: float = 0.5,
    k_outer: int = 5,
    k_inner: int = 5,
) -> list[LearnerRow]:
    """Raw-table rows for every learner in ``specs`` on one repetition."""
    seed = cell_seed(master_seed, data.name, repetition)
    train_data, test_data = stratified_holdout(data, fraction, derive_seed(seed, "split")).apply(data)
    rows = []
    for spec in specs:
        lseed = derive_seed(seed, "learner", spec.id)
        try:
            flat = flat_cv(spec, train_data, k_outer, lseed)
            nested = nested_cv(spec, train_data, k_outer, k_inner, lseed)
            model = train(spec, train_data, flat.best_theta, derive_seed(lseed, "future"))
            future = accuracy(model, test_data)
        except LearnerError as exc:
            raise LearnerFailure(f"dataset {data.name} repetition {repetition} learner {spec.id}: {exc}") from exc
        except FlatNestError:
            raise
        except Exception as exc:
            raise LearnerFailure(
                f"dataset {data.name} repetition {repetition} learner {spec.id}: {type(exc).__name__}: {exc}"
            ) from exc
        rows.append(LearnerRow(
            data.name, data.original_size, repetition, spec.id,
            flat.estimate, nested.estimate, future, flat.best_theta, nested.fold_thetas,
        ))
    return rows


def make_record(
    rows: Sequence[LearnerRow],
    scenario: Scenario,
    fixed: str | None = None,
    thresholds: Mapping[str, float] | None = None,
) -> RepetitionRecord:
    """Selections, accuracy gain and threshold for one (dataset, repetition).

    ``fixed`` replaces the flat selection by a fixed learner (baseline
    comparison).  ``thresholds`` replaces each learner's |nested - future|
    gap by another per-learner threshold.
    """
    by_id = {r.learner: r for r in rows}
    missing = [a for a in scenario.learners if a not in by_id]
    if fixed is not None and fixed not in by_id:
        missing.append(fixed)
    if missing:
        raise IncompleteTable(f"no rows for learners {missing}")
    chosen = tuple(by_id[a] for a in scenario.learners)
    first = chosen[0]
    if fixed is None:
        flat_choice = select_algorithm([(r.learner, r.flat_estimate) for r in chosen])
    else:
        flat_choice = fixed
    nested_choice = select_algorithm([(r.learner, r.nested_estimate) for r in chosen])

    def delta(a):
        return thresholds[a] if thresholds is not None else by_id[a].gap

    fn = by_id[nested_choice].future_accuracy
    ff = by_id[flat_choice].future_accuracy
    d_n, d_f = delta(nested_choice), delta(flat_choice)
    return RepetitionRecord(
        first.dataset, first.repetition, chosen, flat_choice, nested_choice,
        ff, fn, fn - ff, d_f, d_n, min(d_n, d_f),
    )


def run_repetition(
    data: Dataset,
    scenario: Scenario,
    r: int,
    seed: int,
    specs: Mapping[str, LearnerSpec] | None = None,
    fraction: float = 0.5,
    k_outer: int = 5,
    k_inner: int = 5,
) -> RepetitionRecord:
    """One repetition restricted to ``scenario``; ``seed`` is the master seed."""
    resolved = _resolve_specs(scenario.learners, specs)
    rows = compute_cell(data, resolved, r, seed, fraction, k_outer, k_inner)
    return make_record(rows, scenario)


def aggregate_dataset(records: Sequence[RepetitionRecord], repetitions: int | None = None) -> DatasetRecord:
    """Average gains and thresholds over repetitions."""
    if not records:
        raise MismatchedRecords("no repetition records")
    names = {r.dataset for r in records}
    if len(names) != 1:
        raise MismatchedRecords(f"records span datasets {sorted(names)}")
    if repetitions is not None and len(records) != repetitions:
        raise MismatchedRecords(f"expected {repetitions} repetitions, got {len(records)}")
    reps = [r.repetition for r in records]
    if len(set(reps)) != len(reps):
        raise MismatchedRecords(f"duplicate repetitions {reps}")
    return DatasetRecord(
        records[0].dataset,
        records[0].rows[0].n_instances,
        _mean(r.accgain for r in records),
        _mean(r.threshold for r in records),
        tuple(records),
    )


# -- the study ----------------------------------------------------------------------


def _resolve_specs(learners: Iterable[str], specs: Mapping[str, LearnerSpec] | None) -> list[LearnerSpec]:
    out = []
    for a in learners:
        if specs is not None and a in specs:
            out.append(specs[a])
        elif specs is not None:
            raise UnknownLearner(f"learner {a!r} is not configured")
        else:
            out.append(get_spec(a))
    return out


@dataclass(frozen=True)
class StudyRecord:
    """The raw table: rows ordered by (dataset, repetition, learner order)."""

    rows: tuple[LearnerRow, ...]
    learners: tuple[str, ...]
    scenarios: tuple[Scenario, ...] = field(default=())

    @property
    def datasets(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(r.dataset for r in self.rows))

    def sizes(self) -> dict[str, int]:
        return {r.dataset: r.n_instances for r in self.rows}

    def cells(self, dataset: str) -> dict[int, list[LearnerRow]]:
        out: dict[int, list[LearnerRow]] = {}
        for r in self.rows:
            if r.dataset == dataset:
                out.setdefault(r.repetition, []).append(r)
        if not out:
            raise IncompleteTable(f"no rows for dataset {dataset!r}")
        return dict(sorted(out.items()))

    def repetition_count(self) -> int:
        counts = {len(self.cells(d)) for d in self.datasets}
        if len(counts) != 1:
            raise IncompleteTable(f"datasets have differing repetition counts {sorted(counts)}")
        return counts.pop()

    def series(self, learner: str, dataset: str) -> list[LearnerRow]:
        rows = []
        for rep, cell in self.cells(dataset).items():
            match = [r for r in cell if r.learner == learner]
            if not match:
                raise IncompleteTable(f"no row for {learner} on {dataset} repetition {rep}")
            rows.append(match[0])
        return rows

    def filter_min_size(self, min_size: int) -> "StudyRecord":
        return replace(self, rows=tuple(r for r in self.rows if r.n_instances >= min_size))

    def scenario(self, name: str) -> Scenario:
        for s in self.scenarios:
            if s.name == name:
                return s
        raise ConfigError(f"unknown scenario {name!r}")

    def check_complete(self) -> None:
        for d in self.datasets:
            for rep, cell in self.cells(d).items():
                have = [r.learner for r in cell]
                if sorted(have) != sorted(self.learners):
                    raise IncompleteTable(f"{d} repetition {rep}: learners {have}, expected {list(self.learners)}")
        self.repetition_count()


def _cell_job(args):
    data, specs, rep, master_seed, fraction, k_outer, k_inner = args
    return compute_cell(data, specs, rep, master_seed, fraction, k_outer, k_inner)


def run_study(
    datasets: Sequence[Dataset],
    scenarios: Scenario | Sequence[Scenario],
    repetitions: int = 6,
    master_seed: int = 0,
    specs: Mapping[str, LearnerSpec] | None = None,
    fraction: float = 0.5,
    k_outer: int = 5,
    k_inner: int = 5,
    workers: int = 1,
    extra_learners: Sequence[str] = (),
) -> StudyRecord:
    """Compute the raw table for every (dataset, repetition) cell.

    Learners are the ordered union of the scenarios' learners followed by
    ``extra_learners`` (e.g. a baseline outside every scenario).  Cells run in
    a process pool when ``workers > 1``; results are merged in dataset-name
    order, so the output does not depend on the pool size or on the order
    of ``datasets``.
    """
    if isinstance(scenarios, Scenario):
        scenarios = [scenarios]
    scenarios = tuple(scenarios)
    if not datasets:
        raise ConfigError("a study needs at least one dataset")
    if repetitions < 1:
        raise ConfigError(f"repetitions must be >= 1, got {repetitions}")
    names = [d.name for d in datasets]
    if len(set(names)) != len(names):
        raise ConfigError(f"dataset names must be unique: {names}")
    learners: list[str] = []
    for s in scenarios:
        learners.extend(a for a in s.learners if a not in learners)
    learners.extend(a for a in dict.fromkeys(extra_learners) if a not in learners)
    resolved = _resolve_specs(learners, specs)
    for d in datasets:
        d.check_classes()

    jobs = [
        (d, resolved, rep, master_seed, fraction, k_outer, k_inner)
        for d in sorted(datasets, key=lambda d: d.name)
        for rep in range(repetitions)
    ]
    if workers > 1 and len(jobs) > 1:
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            results = list(pool.map(_cell_job, jobs))
    else:
        results = []
        for job in jobs:
            log.info("dataset %s repetition %d", job[0].name, job[2])
            results.append(_cell_job(job))
    rows = tuple(row for cell in results for row in cell)
    return StudyRecord(rows, tuple(learners), scenarios)


# -- derived views --------------------------------------------------------------------


def repetition_records(
    study: StudyRecord,
    scenario: Scenario,
    fixed: str | None = None,
    threshold: str = "nested-gap",
) -> list[RepetitionRecord]:
    if threshold not in THRESHOLDS:
        raise ConfigError(f"unknown threshold {threshold!r}")
    out = []
    for d in study.datasets:
        sd = None
        if threshold == "stddev":
            wanted = list(scenario.learners) + ([fixed] if fixed else [])
            sd = {a: threshold_stddev(study, a, d) for a in wanted}
        for cell in study.cells(d).values():
            out.append(make_record(cell, scenario, fixed, sd))
    return out


def dataset_records(
    study: StudyRecord,
    scenario: Scenario,
    fixed: str | None = None,
    threshold: str = "nested-gap",
) -> list[DatasetRecord]:
    records = repetition_records(study, scenario, fixed, threshold)
    grouped: dict[str, list[RepetitionRecord]] = {}
    for r in records:
        grouped.setdefault(r.dataset, []).append(r)
    reps = study.repetition_count()
    return [aggregate_dataset(v, reps) for v in grouped.values()]


def baseline_fixed(
    study: StudyRecord,
    scenario: Scenario,
    fixed: str,
    threshold: str = "nested-gap",
) -> list[DatasetRecord]:
    """Gain of nested selection over always using ``fixed``."""
    if fixed not in study.learners:
        raise UnknownLearner(f"baseline learner {fixed!r} is not in the study")
    return dataset_records(study, scenario, fixed, threshold)


def threshold_stddev(study: StudyRecord, learner: str, dataset: str) -> float:
    """Smallest across-repetition sample standard deviation of the three accuracy series."""
    rows = study.series(learner, dataset)
    if len(rows) < 2:
        raise InsufficientRepetitions(f"{dataset}: {len(rows)} repetition(s), need >= 2")
    return min(
        statistics.stdev([r.nested_estimate for r in rows]),
        statistics.stdev([r.flat_estimate for r in rows]),
        statistics.stdev([r.future_accuracy for r in rows]),
    )


@dataclass(frozen=True)
class AveragedSelection:
    dataset: str
    n_instances: int
    flat_choice: str
    nested_choice: str
    accgain: float
    threshold: float


def analysis_avg_first(
    study: StudyRecord,
    scenario: Scenario,
    fixed: str | None = None,
    threshold: str = "nested-gap",
) -> list[AveragedSelection]:
    """Average every accuracy over repetitions first, then select once per dataset."""
    study.check_complete()
    out = []
    for d in study.datasets:
        avg = {}
        for a in dict.fromkeys(list(scenario.learners) + ([fixed] if fixed else [])):
            rows = study.series(a, d)
            avg[a] = (
                _mean(r.flat_estimate for r in rows),
                _mean(r.nested_estimate for r in rows),
                _mean(r.future_accuracy for r in rows),
            )
        nested_choice = select_algorithm([(a, avg[a][1]) for a in scenario.learners])
        flat_choice = fixed or select_algorithm([(a, avg[a][0]) for a in scenario.learners])

        def delta(a):
            if threshold == "stddev":
                return threshold_stddev(study, a, d)
            return abs(avg[a][1] - avg[a][2])

        out.append(AveragedSelection(
            d, study.sizes()[d], flat_choice, nested_choice,
            avg[nested_choice][2] - avg[flat_choice][2],
            min(delta(nested_choice), delta(flat_choice)),
        ))
    return out


def analysis_per_repetition(
    study: StudyRecord,
    scenario: Scenario,
    fixed: str | None = None,
    threshold: str = "nested-gap",
) -> list[Pair]:
    """Every (dataset, repetition) as its own paired unit."""
    study.check_complete()
    return [
        Pair(r.dataset, r.repetition, r.rows[0].n_instances, r.accgain, r.threshold)
        for r in repetition_records(study, scenario, fixed, threshold)
    ]


def analyze(
    study: StudyRecord,
    scenario: Scenario,
    method: str = "primary",
    threshold: str = "nested-gap",
    fixed: str | None = None,
) -> AnalysisResult:
    """Paired units and agreement flags for one scenario under one analysis method."""
    if method not in ANALYSES:
        raise ConfigError(f"unknown analysis {method!r}")
    if fixed is not None and fixed not in study.learners:
        raise UnknownLearner(f"baseline learner {fixed!r} is not in the study")
    study.check_complete()
    reference = fixed or "flat"
    if method == "avg_first":
        sel = analysis_avg_first(study, scenario, fixed, threshold)
        pairs = tuple(Pair(s.dataset, None, s.n_instances, s.accgain, s.threshold) for s in sel)
        agree = tuple(s.flat_choice == s.nested_choice for s in sel)
        return AnalysisResult(scenario, method, threshold, reference, pairs, agree)
    records = repetition_records(study, scenario, fixed, threshold)
    agree = tuple(r.same_choice for r in records)
    if method == "per_repetition":
        pairs = tuple(Pair(r.dataset, r.repetition, r.rows[0].n_instances, r.accgain, r.threshold) for r in records)
    else:
        pairs = tuple(
            Pair(dr.dataset, None, dr.n_instances, dr.accgain, dr.threshold)
            for dr in dataset_records(study, scenario, fixed, threshold)
        )
    return AnalysisResult(scenario, method, threshold, reference, pairs, agree)


# -- raw table file ---------------------------------------------------------------------

RAW_COLUMNS = (
    "dataset", "n_instances", "repetition", "learner",
    "flat_estimate", "nested_estimate", "future_accuracy", "theta", "nested_thetas",
)


def _theta_json(theta: HyperPoint) -> str:
    return json.dumps(theta.as_dict(), separators=(",", ":"))


def write_raw_table(study: StudyRecord, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RAW_COLUMNS)
        for r in study.rows:
            w.writerow([
                r.dataset, r.n_instances, r.repetition, r.learner,
                repr(float(r.flat_estimate)), repr(float(r.nested_estimate)), repr(float(r.future_accuracy)),
                _theta_json(r.theta),
                json.dumps([t.as_dict() for t in r.nested_thetas], separators=(",", ":")),
            ])


def read_raw_table(path: str | Path, scenarios: Sequence[Scenario] = ()) -> StudyRecord:
    """Load a raw table; learner order is the order of first appearance."""
    rows, learners = [], []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RAW_COLUMNS:
            raise IncompleteTable(f"{path}: expected columns {','.join(RAW_COLUMNS)}")
        for rec in reader:
            a = rec["learner"]
            if a not in learners:
                learners.append(a)
            try:
                rows.append(LearnerRow(
                    rec["dataset"], int(rec["n_instances"]), int(rec["repetition"]), a,
                    float(rec["flat_estimate"]), float(rec["nested_estimate"]), float(rec["future_accuracy"]),
                    HyperPoint(a, tuple(json.loads(rec["theta"]).items())),
                    tuple(HyperPoint(a, tuple(t.items())) for t in json.loads(rec["nested_thetas"])),
                ))
            except (ValueError, TypeError, AttributeError) as exc:
                raise IncompleteTable(f"{path} line {reader.line_num}: {exc}") from None
    if not rows:
        raise IncompleteTable(f"{path}: no rows")
    if not scenarios:
        scenarios = (Scenario("full", tuple(learners)),)
    return StudyRecord(tuple(rows), tuple(learners), tuple(scenarios))
