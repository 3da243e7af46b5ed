"""Classifier abstraction: hyperparameter grids, training and accuracy.

Six learners are built in, each with a small regular grid::

    knn      k                                  {1, 3, ..., 15}
    gnb      var_smoothing                      {1e-9, 1e-6, 1e-3}
    proto    prototypes (per class)             {1, 2, 4, 8}
    rf       trees x mtry_fraction              {100, 300, 500} x {0.25, 0.5, 1.0}
    gbstump  rounds x learning_rate x depth     {50, 150, 450} x {0.05, 0.1, 0.2} x {1, 2, 3}
    linridge penalty                            {1e-3, 1e-2, ..., 1e2}

Grids are row-major over the declared axes: the last axis varies fastest.
Features are z-scored with training statistics inside :func:`train`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np

from ..data import Dataset
from ..errors import (
    DimensionMismatch,
    EmptyTestSet,
    InvalidHyperPoint,
    SingleClassTrainingSet,
    UnknownLearner,
)
from . import estimators as est

Value = int | float


def _int_at_least(lo):
    def check(v):
        return isinstance(v, (int, np.integer)) and not isinstance(v, bool) and v >= lo
    return check


def _real(lo, hi=math.inf, lo_open=False):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, float, np.floating, np.integer)):
            return False
        v = float(v)
        above = v > lo if lo_open else v >= lo
        return above and v <= hi
    return check


@dataclass(frozen=True)
class _Kind:
    fit: Callable
    grid_predict: Callable | None
    bounds: Mapping[str, Callable[[Value], bool]]
    default_axes: tuple
    stochastic: bool


_KINDS: dict[str, _Kind] = {
    "knn": _Kind(
        est.fit_knn, est.grid_knn,
        {"k": _int_at_least(1)},
        (("k", (1, 3, 5, 7, 9, 11, 13, 15)),),
        False,
    ),
    "gnb": _Kind(
        est.fit_gnb, None,
        {"var_smoothing": _real(0.0)},
        (("var_smoothing", (1e-9, 1e-6, 1e-3)),),
        False,
    ),
    "proto": _Kind(
        est.fit_proto, None,
        {"prototypes": _int_at_least(1)},
        (("prototypes", (1, 2, 4, 8)),),
        False,
    ),
    "rf": _Kind(
        est.fit_rf, est.grid_rf,
        {"trees": _int_at_least(1), "mtry_fraction": _real(0.0, 1.0, lo_open=True)},
        (("trees", (100, 300, 500)), ("mtry_fraction", (0.25, 0.5, 1.0))),
        True,
    ),
    "gbstump": _Kind(
        est.fit_gbstump, est.grid_gbstump,
        {"rounds": _int_at_least(1), "learning_rate": _real(0.0, lo_open=True), "depth": _int_at_least(1)},
        (("rounds", (50, 150, 450)), ("learning_rate", (0.05, 0.1, 0.2)), ("depth", (1, 2, 3))),
        True,
    ),
    "linridge": _Kind(
        est.fit_linridge, None,
        {"penalty": _real(0.0, lo_open=True)},
        (("penalty", (1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2)),),
        False,
    ),
}

LEARNER_IDS: tuple[str, ...] = tuple(_KINDS)


@dataclass(frozen=True)
class HyperPoint:
    """One hyperparameter setting, ordered as the learner's axes."""

    learner: str
    values: tuple[tuple[str, Value], ...]

    def __getitem__(self, name: str) -> Value:
        for key, value in self.values:
            if key == name:
                return value
        raise KeyError(name)

    def as_dict(self) -> dict[str, Value]:
        return dict(self.values)

    def __str__(self) -> str:
        inner = ", ".join(f"{k}={v!r}" for k, v in self.values)
        return f"{self.learner}({inner})"


@dataclass(frozen=True)
class HyperGrid:
    learner: str
    points: tuple[HyperPoint, ...]

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[HyperPoint]:
        return iter(self.points)

    def __getitem__(self, i: int) -> HyperPoint:
        return self.points[i]

    def index(self, point: HyperPoint) -> int:
        return self.points.index(point)


@dataclass(frozen=True)
class LearnerSpec:
    """A learner id plus the value list of each of its hyperparameter axes."""

    id: str
    axes: tuple[tuple[str, tuple[Value, ...]], ...]

    def __post_init__(self):
        kind = _KINDS.get(self.id)
        if kind is None:
            raise UnknownLearner(f"unknown learner {self.id!r}; known: {', '.join(LEARNER_IDS)}")
        axes = tuple((str(name), tuple(values)) for name, values in self.axes)
        names = [name for name, _ in axes]
        if sorted(names) != sorted(kind.bounds):
            raise InvalidHyperPoint(f"{self.id}: axes {names} do not match {sorted(kind.bounds)}")
        for name, values in axes:
            if not values:
                raise InvalidHyperPoint(f"{self.id}: axis {name!r} is empty")
            if len(set(values)) != len(values):
                raise InvalidHyperPoint(f"{self.id}: axis {name!r} has duplicate values")
            for v in values:
                if not kind.bounds[name](v):
                    raise InvalidHyperPoint(f"{self.id}: {name}={v!r} out of bounds")
        object.__setattr__(self, "axes", axes)

    @property
    def n_hyperparameters(self) -> int:
        return len(self.axes)

    @property
    def stochastic(self) -> bool:
        return _KINDS[self.id].stochastic

    def point(self, **values: Value) -> HyperPoint:
        return HyperPoint(self.id, tuple((name, values[name]) for name, _ in self.axes))


def get_spec(learner_id: str, axes: Mapping[str, Sequence[Value]] | None = None) -> LearnerSpec:
    """Spec for ``learner_id`` with the default grid, optionally overriding axes."""
    kind = _KINDS.get(learner_id)
    if kind is None:
        raise UnknownLearner(f"unknown learner {learner_id!r}; known: {', '.join(LEARNER_IDS)}")
    axes = dict(axes or {})
    unknown = set(axes) - set(kind.bounds)
    if unknown:
        raise InvalidHyperPoint(f"{learner_id}: unknown hyperparameters {sorted(unknown)}")
    return LearnerSpec(
        learner_id,
        tuple((name, tuple(axes.get(name, values))) for name, values in kind.default_axes),
    )


def create_grid(spec: LearnerSpec | str) -> HyperGrid:
    if isinstance(spec, str):
        spec = get_spec(spec)
    names = [name for name, _ in spec.axes]
    points = tuple(
        HyperPoint(spec.id, tuple(zip(names, combo)))
        for combo in itertools.product(*(values for _, values in spec.axes))
    )
    return HyperGrid(spec.id, points)


def _check_point(spec: LearnerSpec, theta: HyperPoint) -> None:
    if theta.learner != spec.id:
        raise InvalidHyperPoint(f"{theta} does not belong to learner {spec.id}")
    axes = dict(spec.axes)
    if [k for k, _ in theta.values] != list(axes):
        raise InvalidHyperPoint(f"{theta}: expected hyperparameters {list(axes)}")
    for name, value in theta.values:
        if value not in axes[name]:
            raise InvalidHyperPoint(f"{theta}: {name}={value!r} is not on the grid")


@dataclass(frozen=True)
class TrainedModel:
    learner: str
    n_features: int
    mean: np.ndarray
    scale: np.ndarray
    estimator: object

    def predict(self, features) -> np.ndarray:
        X = np.asarray(features, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DimensionMismatch(f"model expects {self.n_features} features, got {X.shape[1]}")
        return self.estimator.predict((X - self.mean) / self.scale)


def _standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0.0] = 1.0
    return mean, scale


def _require_two_classes(data: Dataset, spec: LearnerSpec) -> None:
    if data.n_instances == 0 or np.unique(data.labels).size < 2:
        raise SingleClassTrainingSet(f"{spec.id}: training set of {data.name} has a single class")


def train(spec: LearnerSpec, data: Dataset, theta: HyperPoint, seed: int) -> TrainedModel:
    """Fit ``spec`` with hyperparameters ``theta``; only rf and gbstump use ``seed``."""
    _check_point(spec, theta)
    _require_two_classes(data, spec)
    mean, scale = _standardize(data.features)
    Z = (data.features - mean) / scale
    fitted = _KINDS[spec.id].fit(Z, data.labels, theta.as_dict(), seed)
    return TrainedModel(spec.id, data.n_features, mean, scale, fitted)


def majority_model(data: Dataset) -> TrainedModel:
    """Constant predictor of the most frequent training class (ties to class 0)."""
    counts = np.bincount(data.labels, minlength=2)
    label = int(np.argmax(counts))
    d = data.n_features
    return TrainedModel("majority", d, np.zeros(d), np.ones(d), est.Constant(label))


def _check_test(n_features: int, test: Dataset) -> None:
    if test.n_instances == 0:
        raise EmptyTestSet("accuracy on an empty test set")
    if test.n_features != n_features:
        raise DimensionMismatch(f"model expects {n_features} features, test set has {test.n_features}")


def accuracy(model: TrainedModel, test: Dataset) -> float:
    """Fraction of ``test`` instances the model labels correctly."""
    _check_test(model.n_features, test)
    correct = int(np.count_nonzero(model.predict(test.features) == test.labels))
    return correct / test.n_instances


def grid_accuracies(
    spec: LearnerSpec,
    train_data: Dataset,
    test_data: Dataset,
    points: Sequence[HyperPoint],
    seed: int,
) -> np.ndarray:
    """Accuracy of every point in ``points`` trained on ``train_data``.

    Equivalent to ``[accuracy(train(spec, train_data, p, seed), test_data) for p in points]``
    but shares work between points where the learner allows it.
    """
    kind = _KINDS[spec.id]
    if kind.grid_predict is None:
        return np.array([accuracy(train(spec, train_data, p, seed), test_data) for p in points])
    for p in points:
        _check_point(spec, p)
    _require_two_classes(train_data, spec)
    _check_test(train_data.n_features, test_data)
    mean, scale = _standardize(train_data.features)
    Z = (train_data.features - mean) / scale
    Zt = (test_data.features - mean) / scale
    preds = kind.grid_predict(Z, train_data.labels, Zt, [p.as_dict() for p in points], seed)
    n = test_data.n_instances
    return np.array([int(np.count_nonzero(p == test_data.labels)) / n for p in preds])


__all__ = [
    "LEARNER_IDS",
    "HyperGrid",
    "HyperPoint",
    "LearnerSpec",
    "TrainedModel",
    "accuracy",
    "create_grid",
    "get_spec",
    "grid_accuracies",
    "majority_model",
    "train",
]
