"""Paired nonparametric statistics used by the reports."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import EmptySample, IncompleteMatrix
from .rng import generator

EXACT_MAX_N = 25


@dataclass(frozen=True)
class TestResult:
    p_value: float
    statistic: float
    n_effective: int
    method: str

    __test__ = False  # keep pytest from collecting this class


@dataclass(frozen=True)
class IntervalEstimate:
    mean: float
    lower: float
    upper: float
    level: float
    resamples: int


def _signed_ranks(x: Sequence[float], y: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size == 0:
        raise EmptySample("Wilcoxon test on an empty sample")
    if x.shape != y.shape:
        raise ValueError(f"paired samples differ in length: {x.size} vs {y.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("paired samples must be finite")
    d = x - y
    d = d[d != 0.0]
    return d, rankdata(np.abs(d))


def _exact_lower_tail(ranks: np.ndarray, observed: float) -> float:
    """P(W+ <= observed) over all 2^n equally likely sign assignments.

    Ranks are doubled so tied (half-integer) ranks become integers; the
    subset-sum counts are then accumulated exactly with Python integers.
    """
    doubled = [int(round(2 * r)) for r in ranks]
    counts = [0] * (sum(doubled) + 1)
    counts[0] = 1
    top = 0
    for r in doubled:
        for s in range(top, -1, -1):
            if counts[s]:
                counts[s + r] += counts[s]
        top += r
    limit = int(round(2 * observed))
    return sum(counts[: limit + 1]) / 2 ** len(doubled)


def wilcoxon_one_sided(x: Sequence[float], y: Sequence[float]) -> TestResult:
    """Signed-rank test of the alternative "x tends to be smaller than y".

    Zero differences are dropped, tied magnitudes get average ranks and the
    statistic is the positive rank sum W+.  Up to 25 nonzero differences the
    p-value is exact; above that it uses the normal approximation with tie
    correction and a 0.5 continuity correction.
    """
    d, ranks = _signed_ranks(x, y)
    n = d.size
    if n == 0:
        return TestResult(1.0, 0.0, 0, "exact")
    w_plus = float(ranks[d > 0].sum())
    if n <= EXACT_MAX_N:
        return TestResult(min(1.0, _exact_lower_tail(ranks, w_plus)), w_plus, n, "exact")
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    z = (w_plus - mean + 0.5) / math.sqrt(var)
    p = 0.5 * math.erfc(-z / math.sqrt(2.0))
    return TestResult(min(1.0, max(0.0, p)), w_plus, n, "normal-approximation")


def bootstrap_ci_mean(
    values: Sequence[float], resamples: int = 5000, level: float = 0.95, seed: int = 0
) -> IntervalEstimate:
    """Percentile bootstrap interval for the mean."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise EmptySample("bootstrap of an empty sample")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    rng = generator(seed)
    idx = rng.integers(0, v.size, size=(resamples, v.size))
    means = v[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(means, [alpha, 1.0 - alpha])
    mean = float(v.mean())
    if np.all(v == v[0]):
        lo = hi = mean = float(v[0])
    return IntervalEstimate(mean, float(lo), float(hi), level, resamples)


def mean_ranks(estimates: Sequence[Mapping[str, float]], learners: Sequence[str] | None = None) -> dict[str, float]:
    """Mean rank of each learner over cells, rank 1 = highest accuracy.

    ``estimates`` holds one mapping (learner -> accuracy) per (dataset,
    repetition) cell.  Ties share the average rank.
    """
    if not estimates:
        raise IncompleteMatrix("no cells to rank")
    learners = list(learners or estimates[0].keys())
    totals = np.zeros(len(learners))
    for cell in estimates:
        missing = [a for a in learners if a not in cell]
        if missing:
            raise IncompleteMatrix(f"cell lacks learners {missing}")
        totals += rankdata([-cell[a] for a in learners])
    return {a: float(t / len(estimates)) for a, t in zip(learners, totals)}


@dataclass(frozen=True)
class ChoiceRate:
    rate: float
    baseline: float
    n: int


def same_choice_rate(agreements: Sequence[bool], n_candidates: int) -> ChoiceRate:
    """Fraction of agreeing selections, next to the 1/|candidates| chance level."""
    if not agreements:
        raise EmptySample("no selections to compare")
    if n_candidates < 1:
        raise ValueError("need at least one candidate")
    return ChoiceRate(sum(bool(a) for a in agreements) / len(agreements), 1.0 / n_candidates, len(agreements))
