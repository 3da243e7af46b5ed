import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flatnest.data import Dataset, gaussian_mixture, pure_noise
from flatnest.errors import EmptyCandidateSet
from flatnest.learners import create_grid, get_spec
from flatnest.selection import flat_cv, nested_cv, select_algorithm


def separable(n=40, seed=0):
    # Two tight clusters far apart: 1-NN is right on every fold.
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    x = rng.normal(scale=0.1, size=(n, 2)) + np.where(y == 1, 10.0, 0.0)[:, None]
    return Dataset("sep", x, y)


def test_singleton_grid_flat():
    data = gaussian_mixture("g", 60, 2, 0.2, seed=1)
    spec = get_spec("knn", {"k": (5,)})
    res = flat_cv(spec, data, k=5, seed=3)
    assert res.best_theta == spec.point(k=5)
    assert res.grid_means == (res.estimate,)


@pytest.mark.parametrize("learner,axes", [
    ("knn", {"k": (3,)}),
    ("rf", {"trees": (15,), "mtry_fraction": (0.5,)}),
    ("gbstump", {"rounds": (10,), "learning_rate": (0.1,), "depth": (2,)}),
])
def test_singleton_grid_nested_equals_flat(learner, axes):
    data = gaussian_mixture("g", 70, 3, 0.25, seed=2)
    spec = get_spec(learner, axes)
    assert flat_cv(spec, data, 5, seed=4).estimate == nested_cv(spec, data, 5, 5, seed=4).estimate


def test_dominant_point_is_selected():
    # k larger than any training fold predicts the training majority everywhere.
    spec = get_spec("knn", {"k": (1000, 1)})
    res = flat_cv(spec, separable(), k=5, seed=0)
    assert res.best_theta == spec.point(k=1)
    assert res.estimate == 1.0
    assert res.grid_means[0] == pytest.approx(0.5, abs=0.1)


def test_argmax_tie_takes_first_grid_point():
    spec = get_spec("knn", {"k": (3, 1)})
    res = flat_cv(spec, separable(), k=5, seed=0)
    assert res.grid_means == (1.0, 1.0)
    assert res.best_theta == spec.point(k=3)


def test_flat_estimate_dominates_grid_means():
    data = gaussian_mixture("g", 80, 4, 0.3, seed=5)
    res = flat_cv(get_spec("knn"), data, 5, seed=1)
    assert res.estimate == max(res.grid_means)
    assert len(res.grid_means) == len(create_grid("knn"))


def test_nested_shape_k2():
    data = gaussian_mixture("g", 60, 2, 0.2, seed=6)
    res = nested_cv(get_spec("knn"), data, k_outer=2, k_inner=3, seed=0)
    assert len(res.fold_thetas) == 2 and len(res.fold_accuracies) == 2
    assert res.estimate == pytest.approx(np.mean(res.fold_accuracies))


def test_deterministic():
    data = gaussian_mixture("g", 60, 2, 0.2, seed=6)
    spec = get_spec("rf", {"trees": (5, 10), "mtry_fraction": (0.5, 1.0)})
    assert flat_cv(spec, data, 5, 9) == flat_cv(spec, data, 5, 9)
    assert nested_cv(spec, data, 5, 5, 9) == nested_cv(spec, data, 5, 5, 9)


# Accuracy-like scores on a 1/1000 grid, where every transform below stays
# strictly increasing in floating point as well.
accuracies = st.lists(st.integers(0, 1000).map(lambda i: i / 1000), min_size=1, max_size=8)


@settings(max_examples=100, deadline=None)
@given(
    scores=accuracies,
    transform=st.sampled_from([np.exp, np.log1p, lambda v: 3 * v - 2, lambda v: v ** 3]),
)
def test_select_algorithm_invariant_to_increasing_transform(scores, transform):
    names = [f"a{i}" for i in range(len(scores))]
    moved = [float(transform(v)) for v in scores]
    assert select_algorithm(list(zip(names, scores))) == select_algorithm(list(zip(names, moved)))


def test_select_algorithm():
    assert select_algorithm({"rf": 0.90, "knn": 0.85}) == "rf"
    assert select_algorithm([("rf", 0.90), ("knn", 0.90)]) == "rf"
    assert select_algorithm([("knn", 0.90), ("rf", 0.90)]) == "knn"
    with pytest.raises(EmptyCandidateSet):
        select_algorithm({})


@settings(max_examples=60, deadline=None)
@given(scores=st.lists(st.floats(0, 1), min_size=1, max_size=8))
def test_select_algorithm_is_first_argmax(scores):
    names = [f"a{i}" for i in range(len(scores))]
    assert select_algorithm(list(zip(names, scores))) == names[scores.index(max(scores))]


def test_noise_bias_examples():
    # Labels independent of features: flat CV is optimistic, nested CV is not.
    spec = get_spec("knn")
    flat, nested = [], []
    for s in range(50):
        data = pure_noise("noise", 200, 10, seed=1000 + s)
        flat.append(flat_cv(spec, data, 5, s).estimate)
        nested.append(nested_cv(spec, data, 5, 5, s).estimate)
    assert np.mean(flat) > 0.51
    assert abs(np.mean(nested) - 0.5) <= 0.03
    assert np.mean(flat) > np.mean(nested)
