"""Slow, obviously-correct reference computations used by the tests."""
from __future__ import annotations

import itertools

import numpy as np


def average_ranks(values):
    """Ranks 1..n of ``values`` with ties sharing their average rank."""
    values = list(values)
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for t in range(i, j + 1):
            ranks[order[t]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def signed_rank_p_enumerated(d):
    """P(W+ <= observed) by enumerating all 2^n sign patterns of the nonzero |d|."""
    d = [v for v in d if v != 0]
    if not d:
        return 1.0
    ranks = average_ranks([abs(v) for v in d])
    observed = sum(r for r, v in zip(ranks, d) if v > 0)
    hits = 0
    for signs in itertools.product((0, 1), repeat=len(d)):
        w = sum(r for r, s in zip(ranks, signs) if s)
        hits += w <= observed + 1e-9
    return hits / 2 ** len(d)


def bootstrap_exhaustive(values, level=0.95):
    """Percentile interval over every one of the n^n equally likely resamples."""
    v = np.asarray(values, dtype=float)
    n = v.size
    means = np.array([v[list(idx)].mean() for idx in itertools.product(range(n), repeat=n)])
    alpha = (1 - level) / 2
    lo, hi = np.quantile(means, [alpha, 1 - alpha])
    return float(lo), float(hi)
