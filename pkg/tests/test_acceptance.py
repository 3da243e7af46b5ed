"""Acceptance criteria, one test per criterion.

Every test records a PASS/FAIL line (shown in the terminal summary, or
inline with ``pytest -s``) before asserting, so a failing criterion is
still reported with its measured values.
"""
import time

import numpy as np
import pytest

from flatnest.data import gaussian_mixture, pure_noise, stratified_holdout, stratified_kfold
from flatnest.learners import LEARNER_IDS, HyperPoint, create_grid, get_spec
from flatnest.protocol import (
    LearnerRow,
    Scenario,
    StudyRecord,
    analyze,
    baseline_fixed,
    repetition_records,
    run_study,
    threshold_stddev,
    write_raw_table,
)
from flatnest.report import emit_report, format_report
from flatnest.selection import flat_cv, nested_cv
from flatnest.stats import bootstrap_ci_mean, wilcoxon_one_sided
from oracles import bootstrap_exhaustive, signed_rank_p_enumerated

MINI_SCENARIO = Scenario("mini", ("knn", "rf", "linridge"))
MINI_SEED = 7
MINI_REPS = 3


def mini_datasets():
    errors = np.linspace(0.05, 0.3, 8)
    return [gaussian_mixture(f"gauss{i}", 200, 5, float(e), seed=100 + i) for i, e in enumerate(errors)]


def run_mini(workers):
    return run_study(mini_datasets(), MINI_SCENARIO, MINI_REPS, MINI_SEED, workers=workers)


def study_bytes(study, tmp_path, tag):
    path = tmp_path / f"raw_{tag}.csv"
    write_raw_table(study, path)
    return path.read_bytes(), format_report(emit_report(study)).encode()


@pytest.fixture(scope="module")
def mini():
    start = time.perf_counter()
    study = run_mini(workers=1)
    return study, time.perf_counter() - start


# -- 1 ------------------------------------------------------------------------------


def test_1_flat_cv_optimism_bias(criterion):
    start = time.perf_counter()
    spec = get_spec("knn")
    flat, nested = [], []
    for seed in range(50):
        data = pure_noise(f"noise{seed}", 200, 10, seed=10_000 + seed)
        flat.append(flat_cv(spec, data, 5, seed).estimate)
        nested.append(nested_cv(spec, data, 5, 5, seed).estimate)
    elapsed = time.perf_counter() - start
    gap = float(np.mean(flat) - np.mean(nested))
    mean_nested = float(np.mean(nested))
    ok = gap > 0.01 and 0.47 <= mean_nested <= 0.53 and elapsed < 120
    criterion(1, "flat-CV optimism bias", ok,
              f"mean flat - mean nested = {gap:.4f} (> 0.01), mean nested = {mean_nested:.4f} "
              f"(in [0.47, 0.53]), {elapsed:.1f}s (< 120s)")
    assert ok


# -- 2 ------------------------------------------------------------------------------


def test_2_wilcoxon_exactness(criterion):
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 11))
        magnitudes = rng.permutation(np.arange(1, n + 1)) + rng.uniform(0, 0.5, n)
        d = magnitudes * rng.choice([-1.0, 1.0], size=n)
        got = wilcoxon_one_sided(d, np.zeros(n)).p_value
        worst = max(worst, abs(got - signed_rank_p_enumerated(d)))
    p5 = wilcoxon_one_sided([-1, -2, -3, -4, -5], [0] * 5).p_value
    p3 = wilcoxon_one_sided([-3, -2, 1], [0] * 3).p_value
    ok = worst <= 1e-12 and p5 == 0.03125 and p3 == 0.25
    criterion(2, "Wilcoxon exactness", ok,
              f"max |p - enumeration| over 200 vectors = {worst:.1e} (<= 1e-12), "
              f"p(5 negatives) = {p5}, p({{-3,-2,+1}}) = {p3}")
    assert ok


# -- 3 ------------------------------------------------------------------------------


def test_3_bootstrap(criterion):
    const = bootstrap_ci_mean([0.5] * 10)
    degenerate = const.lower == const.upper == 0.5

    lo, hi = bootstrap_exhaustive([1, 2, 3, 4, 5])
    ci = bootstrap_ci_mean([1, 2, 3, 4, 5], resamples=5000, seed=3)
    err = max(abs(ci.lower - lo), abs(ci.upper - hi))

    rng = np.random.default_rng(33)
    covered = 0
    for trial in range(200):
        sample = rng.normal(0.0, 1.0, 30)
        c = bootstrap_ci_mean(sample, seed=trial)
        covered += c.lower <= 0.0 <= c.upper
    coverage = covered / 200

    ok = degenerate and err <= 0.2 and 0.90 <= coverage <= 0.98
    criterion(3, "bootstrap correctness", ok,
              f"constant input -> [{const.lower}, {const.upper}], "
              f"endpoint error vs 3125-resample oracle = {err:.3f} (<= 0.2), "
              f"coverage = {coverage:.1%} (in [90%, 98%])")
    assert ok


# -- 4 ------------------------------------------------------------------------------


def _kfold_violations(y, k, seed):
    plan = stratified_kfold(y, k, seed)
    bad = 0
    tests = np.concatenate([p.test_indices for p in plan.pairs()])
    bad += sorted(tests.tolist()) != list(range(y.size))
    for p in plan.pairs():
        bad += bool(set(p.train_indices.tolist()) & set(p.test_indices.tolist()))
    for c in (0, 1):
        per_fold = np.bincount(plan.assignment[y == c], minlength=k)
        bad += per_fold.max() - per_fold.min() > 1
    bad += not np.array_equal(plan.assignment, stratified_kfold(y, k, seed).assignment)
    return bad


def _holdout_violations(y, fraction, seed):
    split = stratified_holdout(y, fraction, seed)
    tr, te = split.train_indices.tolist(), split.test_indices.tolist()
    bad = 0
    bad += bool(set(tr) & set(te)) or sorted(tr + te) != list(range(y.size))
    for c in (0, 1):
        n_c = int(np.count_nonzero(y == c))
        got = int(np.count_nonzero(y[split.train_indices] == c))
        bad += abs(got - fraction * n_c) > 1 or got == 0 or got == n_c
    again = stratified_holdout(y, fraction, seed)
    bad += not (np.array_equal(again.train_indices, split.train_indices)
                and np.array_equal(again.test_indices, split.test_indices))
    return bad


def test_4_splitter_properties(criterion):
    rng = np.random.default_rng(4)
    violations = 0
    for _ in range(1000):
        counts = rng.integers(4, 60, size=2)
        y = rng.permutation(np.repeat([0, 1], counts))
        seed = int(rng.integers(0, 2**63))
        violations += _kfold_violations(y, int(rng.integers(2, 11)), seed)
        violations += _holdout_violations(y, float(rng.uniform(0.3, 0.7)), seed)
    ok = violations == 0
    criterion(4, "splitter properties", ok, f"{violations} violations in 1000 randomized trials of each splitter")
    assert ok


# -- 5 ------------------------------------------------------------------------------


@pytest.mark.slow
def test_5_protocol_identities(criterion, mini, tmp_path):
    study, elapsed = mini
    records = repetition_records(study, MINI_SCENARIO)
    broken = 0
    for rec in records:
        fn = rec.row(rec.nested_choice).future_accuracy
        ff = rec.row(rec.flat_choice).future_accuracy
        broken += rec.accgain != fn - ff
        broken += rec.threshold != min(rec.row(rec.nested_choice).gap, rec.row(rec.flat_choice).gap)
        broken += rec.same_choice and rec.accgain != 0.0

    start = time.perf_counter()
    second = run_mini(workers=1)
    wide = run_mini(workers=8)
    rerun_time = time.perf_counter() - start
    reference = study_bytes(study, tmp_path, "a")
    same_twice = study_bytes(second, tmp_path, "b") == reference
    same_workers = study_bytes(wide, tmp_path, "c") == reference

    ok = len(records) == 24 and broken == 0 and same_twice and same_workers and elapsed < 600
    criterion(5, "protocol identities", ok,
              f"{len(records)} records, {broken} identity violations, "
              f"bit-identical rerun = {same_twice}, workers 1 vs 8 identical = {same_workers}, "
              f"study {elapsed:.0f}s (< 600s), two reruns {rerun_time:.0f}s")
    assert ok


# -- 6 ------------------------------------------------------------------------------


def test_6_singleton_grid_equivalence(criterion):
    rng = np.random.default_rng(6)
    mismatches = []
    for i in range(20):
        learner = LEARNER_IDS[i % len(LEARNER_IDS)]
        full = get_spec(learner)
        if learner == "rf":
            full = get_spec("rf", {"trees": (20, 60), "mtry_fraction": (0.25, 0.5, 1.0)})
        if learner == "gbstump":
            full = get_spec("gbstump", {"rounds": (10, 30), "learning_rate": (0.1, 0.2), "depth": (1, 2, 3)})
        point = create_grid(full)[int(rng.integers(len(create_grid(full))))]
        spec = get_spec(learner, {name: (value,) for name, value in point.values})
        data = gaussian_mixture(f"s{i}", int(rng.integers(50, 150)), int(rng.integers(1, 6)),
                                float(rng.uniform(0.05, 0.4)), seed=600 + i)
        seed = int(rng.integers(0, 2**32))
        f = flat_cv(spec, data, 5, seed).estimate
        n = nested_cv(spec, data, 5, 5, seed).estimate
        if f != n:
            mismatches.append((learner, f, n))
    ok = not mismatches
    criterion(6, "singleton-grid equivalence", ok,
              f"flat == nested exactly on {20 - len(mismatches)}/20 randomized datasets"
              + (f"; mismatches {mismatches}" if mismatches else ""))
    assert ok


# -- 7 ------------------------------------------------------------------------------


@pytest.mark.slow
def test_7_appendix_variants(criterion, mini):
    study, _ = mini
    one_rep = StudyRecord(tuple(r for r in study.rows if r.repetition == 0), study.learners, study.scenarios)
    primary = analyze(one_rep, MINI_SCENARIO, "primary")
    per_rep = analyze(one_rep, MINI_SCENARIO, "per_repetition")
    per_rep_ok = (
        [(p.dataset, p.gain, p.threshold) for p in primary.pairs]
        == [(p.dataset, p.gain, p.threshold) for p in per_rep.pairs]
    )

    def series(values):
        rows = tuple(
            LearnerRow("d", 100, r, "a", f, n, fu, HyperPoint("a", ()))
            for r, (f, n, fu) in enumerate(values)
        )
        return StudyRecord(rows, ("a",))

    sd_const = threshold_stddev(series([(0.8, 0.8, 0.8)] * 6), "a", "d")
    sd_two = threshold_stddev(series([(0.5, 0.7, 0.2), (0.9, 0.9, 0.9)]), "a", "d")
    hand = ((0.7 - 0.8) ** 2 + (0.9 - 0.8) ** 2) ** 0.5  # sample sd, n - 1 = 1
    sd_ok = sd_const == 0.0 and abs(sd_two - hand) <= 1e-12

    # fixed = the nested choice everywhere: a single-learner scenario and its learner
    gains = []
    for a in MINI_SCENARIO.learners:
        gains += [d.accgain for d in baseline_fixed(study, Scenario(a, (a,)), a)]
        gains += [r.accgain for r in repetition_records(study, Scenario(a, (a,)), a)]
    baseline_ok = all(g == 0.0 for g in gains)

    ok = per_rep_ok and sd_ok and baseline_ok
    criterion(7, "appendix variants", ok,
              f"per_repetition(R=1) == primary: {per_rep_ok}; stddev constant -> {sd_const}, "
              f"two-point -> {sd_two:.10f} (hand {hand:.10f}); baseline fixed = n(i,r): "
              f"{len(gains)} gains all zero = {baseline_ok}")
    assert ok


# -- 8 ------------------------------------------------------------------------------


@pytest.mark.slow
def test_8_same_choice_above_chance(criterion, mini):
    study, _ = mini
    (row,) = emit_report(study).summary
    ok = row.same_choice > 1 / 3 and row.random_baseline == pytest.approx(1 / 3)
    criterion(8, "mini-study same-choice rate", ok,
              f"same choice = {row.same_choice:.1%} over {len(study.datasets) * MINI_REPS} selections "
              f"(> random baseline {row.random_baseline:.1%}); p = {row.p_value:.4f}, "
              f"mean |gain| - delta = {row.mean:.4f} [{row.low_ci:.4f}, {row.high_ci:.4f}]")
    assert ok
