"""Datasets, CSV ingestion and stratified splitting.

Features are stored raw.  Standardization happens inside the learners with
training-side statistics only, so nothing computed here can leak test
information into a model.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    DataError,
    DegenerateSplit,
    MalformedRow,
    NonBinaryLabels,
    TooFewInstances,
)
from .rng import generator

MIN_PER_CLASS = 4


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Binary classification data.

    ``features`` has shape (n_instances, n_features) and ``labels`` holds
    0/1 class ids.  Subsets created with :meth:`take` share the same name and
    may contain a single class; the per-class minimum is only enforced for
    datasets entering a study (see :meth:`check_classes`).
    """

    name: str
    features: np.ndarray
    labels: np.ndarray
    source_size: int | None = field(default=None, compare=False)

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if x.ndim != 2:
            raise DataError(f"{self.name}: features must be 2-d, got shape {x.shape}")
        if x.shape[1] < 1:
            raise DataError(f"{self.name}: need at least one feature")
        if y.shape != (x.shape[0],):
            raise DataError(f"{self.name}: {y.shape[0]} labels for {x.shape[0]} rows")
        if not np.all(np.isfinite(x)):
            raise DataError(f"{self.name}: NaN or infinite feature values")
        if y.size and not np.all((y == 0) | (y == 1)):
            raise NonBinaryLabels(f"{self.name}: labels must be 0/1 class ids")
        object.__setattr__(self, "features", _frozen(x))
        object.__setattr__(self, "labels", _frozen(y.astype(np.int64)))

    @property
    def n_instances(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def original_size(self) -> int:
        """Instance count before any subsampling."""
        return self.source_size if self.source_size is not None else self.n_instances

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=2)

    def check_classes(self, min_per_class: int = MIN_PER_CLASS) -> "Dataset":
        counts = self.class_counts()
        if np.count_nonzero(counts) != 2:
            raise NonBinaryLabels(f"{self.name}: need exactly 2 classes, counts {counts.tolist()}")
        if counts.min() < min_per_class:
            raise TooFewInstances(
                f"{self.name}: class counts {counts.tolist()}, need >= {min_per_class} each"
            )
        return self

    def take(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.name, self.features[idx], self.labels[idx], self.original_size)


@dataclass(frozen=True)
class SplitPair:
    train_indices: np.ndarray
    test_indices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "train_indices", _frozen(np.asarray(self.train_indices, dtype=np.int64)))
        object.__setattr__(self, "test_indices", _frozen(np.asarray(self.test_indices, dtype=np.int64)))

    def apply(self, data: Dataset) -> tuple[Dataset, Dataset]:
        return data.take(self.train_indices), data.take(self.test_indices)


@dataclass(frozen=True)
class FoldPlan:
    """Fold id per instance; fold ``j`` is the test side of pair ``j``."""

    k: int
    assignment: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "assignment", _frozen(np.asarray(self.assignment, dtype=np.int64)))

    def pairs(self) -> list[SplitPair]:
        out = []
        for j in range(self.k):
            test = np.flatnonzero(self.assignment == j)
            train = np.flatnonzero(self.assignment != j)
            out.append(SplitPair(train, test))
        return out


def _parse_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {text!r}")
    return value


def _label_key(values: Sequence[str]):
    try:
        numeric = {v: float(v) for v in values}
    except ValueError:
        return None
    return numeric.__getitem__


def load_csv(
    path: str | Path,
    label_column: str | int = -1,
    header: bool = True,
    name: str | None = None,
    min_per_class: int = MIN_PER_CLASS,
) -> Dataset:
    """Read a comma separated file into a :class:`Dataset`.

    ``label_column`` is a header name or a zero-based index (negative
    indices count from the end).  The two label values are mapped to 0 and
    1 in sorted order, numerically when both parse as numbers.  Each class
    needs ``min_per_class`` rows (4 by default, enough for a stratified
    5-fold split inside a 50% holdout).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    first_row = 1
    if header:
        if not rows:
            raise DataError(f"{path}: empty file")
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
        first_row = 2
    else:
        names = None
    if not rows:
        raise TooFewInstances(f"{path}: no data rows")

    arity = len(names) if names is not None else len(rows[0])
    if isinstance(label_column, str) and not label_column.lstrip("-").isdigit():
        if names is None or label_column not in names:
            raise DataError(f"{path}: label column {label_column!r} not found")
        col = names.index(label_column)
    else:
        col = int(label_column)
        if not -arity <= col < arity:
            raise DataError(f"{path}: label column index {col} out of range for {arity} columns")
        col %= arity

    feats, raw_labels = [], []
    for offset, row in enumerate(rows):
        lineno = first_row + offset
        if len(row) != arity:
            raise MalformedRow(lineno, f"expected {arity} fields, got {len(row)}")
        label = row[col].strip()
        if not label:
            raise MalformedRow(lineno, "missing label")
        values = []
        for j, cell in enumerate(row):
            if j == col:
                continue
            cell = cell.strip()
            if not cell:
                raise MalformedRow(lineno, f"missing value in column {j}")
            try:
                values.append(_parse_float(cell))
            except ValueError:
                raise MalformedRow(lineno, f"non-numeric value {cell!r} in column {j}") from None
        feats.append(values)
        raw_labels.append(label)

    distinct = sorted(set(raw_labels), key=_label_key(list(set(raw_labels))))
    if len(distinct) != 2:
        raise NonBinaryLabels(f"{path}: expected 2 distinct labels, found {len(distinct)}")
    mapping = {v: i for i, v in enumerate(distinct)}
    data = Dataset(
        name or path.stem,
        np.array(feats, dtype=np.float64),
        np.array([mapping[v] for v in raw_labels], dtype=np.int64),
    )
    return data.check_classes(min_per_class)


def _labels_of(data_or_labels) -> np.ndarray:
    if isinstance(data_or_labels, Dataset):
        return data_or_labels.labels
    return np.asarray(data_or_labels, dtype=np.int64)


def _allocate(counts: np.ndarray, fraction: float, total: int) -> np.ndarray:
    """Per-class share of ``total`` by largest remainder.

    Each class gets floor(fraction * count) plus at most one extra unit, so
    every class stays within 1 of exact proportionality.  Ties in the
    remainder go to the lower class id.
    """
    exact = fraction * counts
    base = np.floor(exact).astype(np.int64)
    rest = total - int(base.sum())
    order = sorted(range(len(counts)), key=lambda c: (-(exact[c] - base[c]), c))
    for c in order[:rest]:
        base[c] += 1
    return base


def stratified_holdout(data, fraction: float, seed: int) -> SplitPair:
    """Stratified train/test split with ``fraction`` of each class in train.

    The train total is round-half-up of ``fraction * n``; per-class counts
    come from :func:`_allocate`.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    y = _labels_of(data)
    counts = np.bincount(y, minlength=2)
    if np.any(counts < 2):
        raise DegenerateSplit(f"each class needs >= 2 instances, counts {counts.tolist()}")
    total = int(math.floor(fraction * y.size + 0.5))
    n_train = _allocate(counts, fraction, total)
    if np.any(n_train == 0) or np.any(n_train == counts):
        raise DegenerateSplit(f"split of class counts {counts.tolist()} leaves a class empty on one side")
    rng = generator(seed)
    train, test = [], []
    for c in range(2):
        idx = rng.permutation(np.flatnonzero(y == c))
        train.append(idx[: n_train[c]])
        test.append(idx[n_train[c]:])
    return SplitPair(np.sort(np.concatenate(train)), np.sort(np.concatenate(test)))


def stratified_kfold(data_or_labels, k: int, seed: int) -> FoldPlan:
    """Stratified k-fold plan.

    Each class is shuffled and dealt round-robin; the dealing position
    carries over from one class to the next so fold sizes also differ by
    at most one.
    """
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    y = _labels_of(data_or_labels)
    if y.size < k:
        raise TooFewInstances(f"{y.size} instances for {k} folds")
    rng = generator(seed)
    assignment = np.empty(y.size, dtype=np.int64)
    pos = 0
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        assignment[idx] = (pos + np.arange(idx.size)) % k
        pos = (pos + idx.size) % k
    return FoldPlan(k, assignment)


def subsample(data: Dataset, cap: int, seed: int) -> Dataset:
    """Stratified random subset of size ``cap``; no-op when n <= cap."""
    if cap < 4:
        raise ValueError(f"cap must allow 2 instances per class, got {cap}")
    if data.n_instances <= cap:
        return data
    counts = data.class_counts()
    keep = _allocate(counts, cap / data.n_instances, cap)
    rng = generator(seed)
    chosen = []
    for c in range(2):
        idx = rng.permutation(np.flatnonzero(data.labels == c))
        chosen.append(idx[: keep[c]])
    return data.take(np.sort(np.concatenate(chosen)))


def gaussian_mixture(
    name: str, n: int, n_features: int, bayes_error: float, seed: int
) -> Dataset:
    """Two unit-covariance Gaussians with equal priors.

    The class means sit at +/- mu along the first axis with
    ``Phi(-mu) = bayes_error``; the remaining axes are pure noise.
    """
    from scipy.stats import norm

    mu = float(norm.isf(bayes_error))
    rng = generator(seed)
    y = np.zeros(n, dtype=np.int64)
    y[n // 2:] = 1
    y = rng.permutation(y)
    x = rng.standard_normal((n, n_features))
    x[:, 0] += np.where(y == 1, mu, -mu)
    return Dataset(name, x, y)


def pure_noise(name: str, n: int, n_features: int, seed: int) -> Dataset:
    """Balanced random labels independent of standard normal features."""
    rng = generator(seed)
    y = np.zeros(n, dtype=np.int64)
    y[n // 2:] = 1
    return Dataset(name, rng.standard_normal((n, n_features)), rng.permutation(y))


def write_csv(data: Dataset, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j + 1}" for j in range(data.n_features)] + ["label"])
        for row, label in zip(data.features, data.labels):
            w.writerow([repr(float(v)) for v in row] + [int(label)])
