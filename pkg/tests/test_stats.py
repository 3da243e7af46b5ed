import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from flatnest.errors import EmptySample, IncompleteMatrix
from flatnest.stats import (
    bootstrap_ci_mean,
    mean_ranks,
    same_choice_rate,
    wilcoxon_one_sided,
)
from oracles import bootstrap_exhaustive, signed_rank_p_enumerated


def wilcoxon_d(d):
    return wilcoxon_one_sided(d, np.zeros(len(d)))


# -- Wilcoxon ---------------------------------------------------------------------


def test_all_negative():
    res = wilcoxon_d([-1, -2, -3, -4, -5])
    assert res.p_value == 0.03125
    assert res.statistic == 0.0
    assert res.n_effective == 5


def test_small_mixed():
    res = wilcoxon_d([-3, -2, 1])
    assert res.statistic == 1.0
    assert res.p_value == 0.25


def test_all_zero():
    res = wilcoxon_d([0.0, 0.0, 0.0])
    assert res.p_value == 1.0 and res.n_effective == 0


def test_zeros_dropped():
    assert wilcoxon_d([-1, -2, 0, -3, -4, 0, -5]).p_value == 0.03125


def test_ties_get_average_ranks():
    # |d| = 1, 1, 2: ranks 1.5, 1.5, 3; W+ = 1.5
    res = wilcoxon_d([1, -1, -2])
    assert res.statistic == 1.5
    assert res.p_value == pytest.approx(signed_rank_p_enumerated([1, -1, -2]), abs=1e-15)


def test_x_smaller_than_y_gives_small_p():
    x = np.arange(10) * 0.1
    assert wilcoxon_one_sided(x, x + 1).p_value < 0.01
    assert wilcoxon_one_sided(x + 1, x).p_value > 0.99


def test_empty_sample():
    with pytest.raises(EmptySample):
        wilcoxon_one_sided([], [])


def test_exact_against_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 11))
        d = rng.permutation(np.arange(1, n + 1)) * rng.choice([-1, 1], size=n) * 0.01
        assert abs(wilcoxon_d(d).p_value - signed_rank_p_enumerated(d)) <= 1e-12


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(-4, 4), min_size=1, max_size=10))
def test_exact_against_enumeration_with_ties(d):
    assert abs(wilcoxon_d(d).p_value - signed_rank_p_enumerated(d)) <= 1e-12


def test_exact_matches_scipy_without_ties():
    rng = np.random.default_rng(1)
    for n in (6, 12, 20, 25):
        d = rng.permutation(np.arange(1, n + 1)) * rng.choice([-1, 1], size=n)
        ref = scipy.stats.wilcoxon(d, alternative="less", method="exact").pvalue
        assert wilcoxon_d(d).p_value == pytest.approx(ref, abs=1e-12)


@pytest.mark.parametrize("n", [26, 40, 120])
def test_normal_approximation_matches_scipy(n):
    rng = np.random.default_rng(n)
    d = np.round(rng.normal(-0.2, 1, size=n), 1)  # rounding creates ties
    d = d[d != 0]
    res = wilcoxon_d(d)
    assert res.method == "normal-approximation"
    ref = scipy.stats.wilcoxon(d, alternative="less", correction=True, method="approx").pvalue
    assert res.p_value == pytest.approx(ref, rel=1e-9)


def test_monotone_in_shift():
    rng = np.random.default_rng(3)
    d = rng.normal(size=15)
    ps = [wilcoxon_d(d + s).p_value for s in np.linspace(-2, 2, 9)]
    assert all(a <= b for a, b in zip(ps, ps[1:]))


# -- bootstrap ------------------------------------------------------------------------


def test_constant_input():
    ci = bootstrap_ci_mean([0.5] * 10)
    assert (ci.lower, ci.mean, ci.upper) == (0.5, 0.5, 0.5)


def test_against_exhaustive_oracle():
    lo, hi = bootstrap_exhaustive([1, 2, 3, 4, 5])
    ci = bootstrap_ci_mean([1, 2, 3, 4, 5], resamples=5000, seed=0)
    assert abs(ci.lower - lo) <= 0.2 and abs(ci.upper - hi) <= 0.2
    assert ci.mean == 3.0


def test_deterministic_and_seeded():
    v = np.random.default_rng(0).normal(size=20)
    assert bootstrap_ci_mean(v, seed=4) == bootstrap_ci_mean(v, seed=4)
    assert bootstrap_ci_mean(v, seed=4) != bootstrap_ci_mean(v, seed=5)


def test_percentile_definition():
    v = np.random.default_rng(2).normal(size=12)
    ci = bootstrap_ci_mean(v, resamples=400, level=0.9, seed=1)
    assert ci.lower <= ci.mean <= ci.upper
    wide = bootstrap_ci_mean(v, resamples=400, level=0.99, seed=1)
    assert wide.lower <= ci.lower and wide.upper >= ci.upper


def test_bootstrap_errors():
    with pytest.raises(EmptySample):
        bootstrap_ci_mean([])
    with pytest.raises(ValueError):
        bootstrap_ci_mean([1.0], level=1.0)


# -- ranks and agreement ------------------------------------------------------------------


def test_mean_ranks_ties():
    assert mean_ranks([{"a": 0.9, "b": 0.8, "c": 0.8}]) == {"a": 1.0, "b": 2.5, "c": 2.5}


def test_mean_ranks_over_cells():
    ranks = mean_ranks([{"a": 0.9, "b": 0.8}, {"a": 0.7, "b": 0.6}])
    assert ranks == {"a": 1.0, "b": 2.0}


def test_mean_ranks_sum():
    rng = np.random.default_rng(0)
    cells = [{k: float(v) for k, v in zip("abcd", rng.integers(0, 3, 4))} for _ in range(7)]
    assert sum(mean_ranks(cells).values()) == pytest.approx(10.0)


def test_mean_ranks_incomplete():
    with pytest.raises(IncompleteMatrix):
        mean_ranks([{"a": 0.9, "b": 0.8}, {"a": 0.7}])
    with pytest.raises(IncompleteMatrix):
        mean_ranks([])


def test_same_choice_rate():
    rate = same_choice_rate([True] * 9 + [False] * 3, 3)
    assert rate.rate == 0.75 and rate.baseline == pytest.approx(1 / 3) and rate.n == 12
    single = same_choice_rate([True] * 4, 1)
    assert single.rate == 1.0 and single.baseline == 1.0
