"""Study reports and plot data.

A report file is plain text made of sections.  Each section starts with a
``[name]`` line, followed by a CSV header and rows, and ends with a blank
line.  Sections, in order:

``summary``
    scenario, reference, analysis, threshold, n, same_choice,
    same_choice_dataset, random_baseline, p_value, mean, low_ci, high_ci, note
``mean_rank_nested`` / ``mean_rank_flat``
    learner, mean_rank (sorted best first)
``pairs``
    scenario, reference, dataset, repetition, n_instances, accgain,
    abs_accgain, delta, difference
``repetitions``
    scenario, reference, dataset, repetition, flat_choice, nested_choice,
    future_flat, future_nested, accgain, delta_flat, delta_nested, delta

``reference`` is ``flat`` for the flat-vs-nested comparison or the id of the
fixed baseline learner.  Floats are written with ``repr`` so every value
can be recomputed from the raw table and compared exactly.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import IncompleteStudy, IncompleteTable
from .protocol import (
    AnalysisResult,
    Scenario,
    StudyRecord,
    analysis_avg_first,
    analyze,
    repetition_records,
)
from .rng import derive_seed
from .stats import bootstrap_ci_mean, mean_ranks, same_choice_rate, wilcoxon_one_sided

LOW_POWER_N = 5  # below this an exact one-sided p-value cannot reach 0.05

SUMMARY_COLUMNS = (
    "scenario", "reference", "analysis", "threshold", "n", "same_choice", "same_choice_dataset",
    "random_baseline", "p_value", "mean", "low_ci", "high_ci", "note",
)
PAIR_COLUMNS = (
    "scenario", "reference", "dataset", "repetition", "n_instances",
    "accgain", "abs_accgain", "delta", "difference",
)
REPETITION_COLUMNS = (
    "scenario", "reference", "dataset", "repetition", "flat_choice", "nested_choice",
    "future_flat", "future_nested", "accgain", "delta_flat", "delta_nested", "delta",
)
SCATTER_COLUMNS = ("dataset", "abs_accgain", "delta")
DISTRIBUTION_COLUMNS = ("series", "dataset", "value")


@dataclass(frozen=True)
class SummaryRow:
    scenario: str
    reference: str
    analysis: str
    threshold: str
    n: int
    same_choice: float
    same_choice_dataset: float
    random_baseline: float
    p_value: float
    mean: float
    low_ci: float
    high_ci: float
    note: str = ""


@dataclass(frozen=True)
class StudyReport:
    summary: tuple[SummaryRow, ...]
    rank_nested: tuple[tuple[str, float], ...]
    rank_flat: tuple[tuple[str, float], ...]
    analyses: tuple[AnalysisResult, ...]
    repetitions: tuple[tuple[str, str, object], ...]


def _unit_id(pair) -> str:
    return pair.dataset if pair.repetition is None else f"{pair.dataset}/{pair.repetition}"


def summarize(study: StudyRecord, result: AnalysisResult, seed: int = 0) -> SummaryRow:
    """Summary row: agreement, Wilcoxon p and bootstrap CI of |gain| - delta."""
    if not result.pairs:
        raise IncompleteStudy(f"scenario {result.scenario.name}: no datasets to summarize")
    x = [p.abs_gain for p in result.pairs]
    y = [p.threshold for p in result.pairs]
    test = wilcoxon_one_sided(x, y)
    ci = bootstrap_ci_mean(
        [a - b for a, b in zip(x, y)],
        seed=derive_seed(seed, "bootstrap", result.scenario.name, result.reference, result.method, result.threshold),
    )
    n_candidates = len(result.scenario.learners)
    rate = same_choice_rate(result.agreements, n_candidates)
    fixed = None if result.reference == "flat" else result.reference
    per_dataset = analysis_avg_first(study, result.scenario, fixed, result.threshold)
    rate_ds = same_choice_rate([s.flat_choice == s.nested_choice for s in per_dataset], n_candidates)
    return SummaryRow(
        result.scenario.name, result.reference, result.method, result.threshold, len(result.pairs),
        rate.rate, rate_ds.rate, rate.baseline, test.p_value, ci.mean, ci.lower, ci.upper,
        "low power" if len(result.pairs) < LOW_POWER_N else "",
    )


def rank_table(study: StudyRecord, which: str) -> list[tuple[str, float]]:
    """Mean ranks over every (dataset, repetition) cell, best first."""
    attr = {"nested": "nested_estimate", "flat": "flat_estimate"}[which]
    cells = []
    for d in study.datasets:
        for cell in study.cells(d).values():
            cells.append({r.learner: getattr(r, attr) for r in cell})
    ranks = mean_ranks(cells, study.learners)
    return sorted(ranks.items(), key=lambda kv: (kv[1], study.learners.index(kv[0])))


def emit_report(
    study: StudyRecord,
    analysis: str = "primary",
    threshold: str = "nested-gap",
    min_size: int | None = None,
    baseline: str | None = None,
    seed: int = 0,
    scenarios: Sequence[Scenario] | None = None,
) -> StudyReport:
    """Summaries for every scenario (plus baseline rows when ``baseline`` is set)."""
    if min_size is not None:
        study = study.filter_min_size(min_size)
    if not study.rows:
        raise IncompleteStudy(f"no datasets with at least {min_size} instances")
    try:
        study.check_complete()
    except IncompleteTable as exc:
        raise IncompleteStudy(str(exc)) from None
    scenarios = tuple(scenarios or study.scenarios)
    summary, analyses, reps = [], [], []
    for scenario in scenarios:
        for fixed in [None] + ([baseline] if baseline else []):
            result = analyze(study, scenario, analysis, threshold, fixed)
            analyses.append(result)
            summary.append(summarize(study, result, seed))
            for rec in repetition_records(study, scenario, fixed, threshold):
                reps.append((scenario.name, result.reference, rec))
    return StudyReport(
        tuple(summary),
        tuple(rank_table(study, "nested")),
        tuple(rank_table(study, "flat")),
        tuple(analyses),
        tuple(reps),
    )


def _section(out: io.StringIO, name: str, header: Sequence[str], rows) -> None:
    out.write(f"[{name}]\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
    out.write("\n")


def format_report(report: StudyReport) -> str:
    out = io.StringIO()
    _section(out, "summary", SUMMARY_COLUMNS, [
        (s.scenario, s.reference, s.analysis, s.threshold, s.n, s.same_choice, s.same_choice_dataset,
         s.random_baseline, s.p_value, s.mean, s.low_ci, s.high_ci, s.note)
        for s in report.summary
    ])
    _section(out, "mean_rank_nested", ("learner", "mean_rank"), report.rank_nested)
    _section(out, "mean_rank_flat", ("learner", "mean_rank"), report.rank_flat)
    _section(out, "pairs", PAIR_COLUMNS, [
        (a.scenario.name, a.reference, p.dataset, "" if p.repetition is None else p.repetition,
         p.n_instances, p.gain, p.abs_gain, p.threshold, p.abs_gain - p.threshold)
        for a in report.analyses for p in a.pairs
    ])
    _section(out, "repetitions", REPETITION_COLUMNS, [
        (name, ref, r.dataset, r.repetition, r.flat_choice, r.nested_choice, r.future_flat,
         r.future_nested, r.accgain, r.delta_flat, r.delta_nested, r.threshold)
        for name, ref, r in report.repetitions
    ])
    return out.getvalue()


def write_report(report: StudyReport, path: str | Path) -> None:
    Path(path).write_text(format_report(report), encoding="utf-8")


def read_report(path: str | Path) -> dict[str, list[dict[str, str]]]:
    """Parse a report file back into ``{section: rows}``."""
    sections: dict[str, list[dict[str, str]]] = {}
    for block in Path(path).read_text(encoding="utf-8").split("\n\n"):
        block = block.strip("\n")
        if not block:
            continue
        head, _, body = block.partition("\n")
        sections[head.strip("[]")] = list(csv.DictReader(io.StringIO(body)))
    return sections


def summary_table(report: StudyReport) -> str:
    """Fixed-width text rendering of the summary rows."""
    lines = [f"{'scenario':<16}{'reference':<12}{'same choice':>12}{'p.value':>11}{'mean':>9}{'low CI':>9}{'high CI':>9}  note"]
    for s in report.summary:
        lines.append(
            f"{s.scenario:<16}{s.reference:<12}{s.same_choice:>11.0%} {s.p_value:>10.3g}"
            f"{s.mean:>9.3f}{s.low_ci:>9.3f}{s.high_ci:>9.3f}  {s.note}".rstrip()
        )
    return "\n".join(lines)


def emit_plot_data(
    study: StudyRecord,
    out_dir: str | Path,
    analysis: str = "primary",
    threshold: str = "nested-gap",
    scenarios: Sequence[Scenario] | None = None,
) -> list[Path]:
    """Write scatter and distribution files for each scenario.

    ``plot_scatter_<scenario>.csv`` has one row per unit (dataset, or
    dataset/repetition for the per-repetition analysis); points with
    abs_accgain below delta are irrelevant gains.
    ``plot_distribution_<scenario>.csv`` stacks both series in long format.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        study.check_complete()
    except IncompleteTable as exc:
        raise IncompleteStudy(str(exc)) from None
    written = []
    for scenario in scenarios or study.scenarios:
        result = analyze(study, scenario, analysis, threshold)
        scatter = out_dir / f"plot_scatter_{scenario.name}.csv"
        dist = out_dir / f"plot_distribution_{scenario.name}.csv"
        with scatter.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SCATTER_COLUMNS)
            for p in result.pairs:
                w.writerow([_unit_id(p), repr(float(p.abs_gain)), repr(float(p.threshold))])
        with dist.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(DISTRIBUTION_COLUMNS)
            for series, attr in (("abs_accgain", "abs_gain"), ("delta", "threshold")):
                for p in result.pairs:
                    w.writerow([series, _unit_id(p), repr(float(getattr(p, attr)))])
        written += [scatter, dist]
    return written
