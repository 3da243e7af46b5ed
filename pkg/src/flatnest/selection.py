"""Flat and nested cross-validation estimators and algorithm selection.

Flat CV tunes the hyperparameters and reports the tuned fold-mean accuracy
from the same folds.  Nested CV re-tunes inside every outer training set
and scores the tuned model on the untouched outer test fold.

Both use the same outer fold plan and the same per-fold training seeds for
a given ``(data, k, seed)``, so with a one-point grid the two estimates are
identical.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import Dataset, FoldPlan, stratified_kfold
from .errors import EmptyCandidateSet, SingleClassTrainingSet
from .learners import (
    HyperGrid,
    HyperPoint,
    LearnerSpec,
    accuracy,
    create_grid,
    grid_accuracies,
    majority_model,
    train,
)
from .rng import derive_seed


@dataclass(frozen=True)
class FlatResult:
    learner: str
    best_theta: HyperPoint
    estimate: float
    grid_means: tuple[float, ...]


@dataclass(frozen=True)
class NestedResult:
    learner: str
    estimate: float
    fold_thetas: tuple[HyperPoint, ...]
    fold_accuracies: tuple[float, ...]


def outer_plan(data: Dataset, k: int, seed: int) -> FoldPlan:
    return stratified_kfold(data, k, derive_seed(seed, "folds"))


def fit_seed(seed: int, fold: int) -> int:
    return derive_seed(seed, "fit", fold)


def _fold_matrix(spec: LearnerSpec, data: Dataset, plan: FoldPlan, grid: HyperGrid, seed: int) -> np.ndarray:
    """Accuracy of each grid point (columns) on each test fold (rows).

    A training fold missing a class scores the majority-class model for
    every grid point.
    """
    acc = np.empty((plan.k, len(grid)))
    for j, pair in enumerate(plan.pairs()):
        tr, te = pair.apply(data)
        try:
            acc[j] = grid_accuracies(spec, tr, te, grid.points, fit_seed(seed, j))
        except SingleClassTrainingSet:
            acc[j] = accuracy(majority_model(tr), te)
    return acc


def _fold_means(acc: np.ndarray) -> np.ndarray:
    # rows are added in fold order so the result does not depend on numpy's reduction strategy
    total = np.zeros(acc.shape[1])
    for row in acc:
        total += row
    return total / acc.shape[0]


def _best(means: np.ndarray) -> int:
    return int(np.argmax(means))  # first maximum in grid order


def flat_cv(spec: LearnerSpec, data: Dataset, k: int = 5, seed: int = 0, grid: HyperGrid | None = None) -> FlatResult:
    """Tune on k folds and report the best fold-mean accuracy."""
    grid = grid or create_grid(spec)
    means = _fold_means(_fold_matrix(spec, data, outer_plan(data, k, seed), grid, seed))
    best = _best(means)
    return FlatResult(spec.id, grid[best], float(means[best]), tuple(float(m) for m in means))


def nested_cv(
    spec: LearnerSpec,
    data: Dataset,
    k_outer: int = 5,
    k_inner: int = 5,
    seed: int = 0,
    grid: HyperGrid | None = None,
) -> NestedResult:
    """Outer k-fold estimate of "tune by inner k-fold, then fit"."""
    grid = grid or create_grid(spec)
    thetas, accs = [], []
    for j, pair in enumerate(outer_plan(data, k_outer, seed).pairs()):
        tr, te = pair.apply(data)
        inner_seed = derive_seed(seed, "inner", j)
        if len(grid) == 1:
            theta = grid[0]
        else:
            inner = stratified_kfold(tr, k_inner, derive_seed(inner_seed, "folds"))
            theta = grid[_best(_fold_means(_fold_matrix(spec, tr, inner, grid, inner_seed)))]
        try:
            model = train(spec, tr, theta, fit_seed(seed, j))
        except SingleClassTrainingSet:
            model = majority_model(tr)
        thetas.append(theta)
        accs.append(accuracy(model, te))
    total = 0.0
    for a in accs:
        total += a
    return NestedResult(spec.id, total / len(accs), tuple(thetas), tuple(accs))


def select_algorithm(results: Sequence[tuple[str, float]] | Mapping[str, float]) -> str:
    """Learner with the highest estimate; ties go to the earliest candidate."""
    items = list(results.items()) if isinstance(results, Mapping) else list(results)
    if not items:
        raise EmptyCandidateSet("no candidate learners")
    best_id, best = items[0]
    for learner, estimate in items[1:]:
        if estimate > best:
            best_id, best = learner, estimate
    return best_id
