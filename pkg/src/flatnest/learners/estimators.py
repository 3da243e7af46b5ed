"""Built-in classifiers operating on standardized features.

Every estimator exposes ``predict(Z) -> int array``.  Ties always resolve
to class 0.  ``grid_predict`` functions evaluate several grid points in one
pass where a learner allows it (shared distance matrix, tree prefixes,
boosting stages) and must agree exactly with fitting each point alone.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _trees

_BLOCK = 256
_GBM_BAG_FRACTION = 0.5
_LVQ_RATE = 0.05
_KMEANS_ITER = 100


def _sq_dists(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return ((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)


# -- k nearest neighbours ---------------------------------------------------


@dataclass(frozen=True)
class KNN:
    Z: np.ndarray
    y: np.ndarray
    k: int

    def _neighbour_votes(self, Zt, ks):
        """Class-1 vote counts for each k in ``ks``; neighbours ordered by (distance, index)."""
        out = np.empty((len(ks), Zt.shape[0]), dtype=np.int64)
        cols = np.minimum(np.asarray(ks), self.y.size) - 1
        for s in range(0, Zt.shape[0], _BLOCK):
            d2 = _sq_dists(Zt[s:s + _BLOCK], self.Z)
            order = np.argsort(d2, axis=1, kind="stable")
            cum = np.cumsum(self.y[order], axis=1)
            out[:, s:s + _BLOCK] = cum[:, cols].T
        return out

    def predict(self, Zt):
        k = min(self.k, self.y.size)
        return (2 * self._neighbour_votes(Zt, [k])[0] > k).astype(np.int64)


def fit_knn(Z, y, params, seed):
    return KNN(Z, y, int(params["k"]))


def grid_knn(Z, y, Zt, points, seed):
    ks = [int(p["k"]) for p in points]
    votes = KNN(Z, y, max(ks))._neighbour_votes(Zt, ks)
    return [(2 * v > min(k, y.size)).astype(np.int64) for v, k in zip(votes, ks)]


# -- Gaussian naive Bayes ---------------------------------------------------


@dataclass(frozen=True)
class GaussianNB:
    log_prior: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def predict(self, Zt):
        jll = []
        for c in range(2):
            var = self.variances[c]
            ll = -0.5 * np.sum(np.log(2.0 * np.pi * var)) - 0.5 * np.sum((Zt - self.means[c]) ** 2 / var, axis=1)
            jll.append(self.log_prior[c] + ll)
        return (jll[1] > jll[0]).astype(np.int64)


def fit_gnb(Z, y, params, seed):
    eps = float(params["var_smoothing"]) * float(Z.var(axis=0).max())
    means, variances, priors = [], [], []
    for c in range(2):
        Zc = Z[y == c]
        var = Zc.var(axis=0) + eps
        var[var == 0.0] = 1.0
        means.append(Zc.mean(axis=0))
        variances.append(var)
        priors.append(Zc.shape[0] / Z.shape[0])
    return GaussianNB(np.log(priors), np.array(means), np.array(variances))


# -- prototype classifier (LVQ1) ----------------------------------------------


def _kmeans(Zc: np.ndarray, m: int) -> np.ndarray:
    """Lloyd's algorithm from a deterministic farthest-point start."""
    first = int(np.argmin(((Zc - Zc.mean(axis=0)) ** 2).sum(axis=1)))
    centers = [Zc[first]]
    mind = ((Zc - Zc[first]) ** 2).sum(axis=1)
    while len(centers) < m:
        nxt = int(np.argmax(mind))
        centers.append(Zc[nxt])
        mind = np.minimum(mind, ((Zc - Zc[nxt]) ** 2).sum(axis=1))
    centers = np.array(centers)
    assign = None
    for _ in range(_KMEANS_ITER):
        new = np.argmin(_sq_dists(Zc, centers), axis=1)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for j in range(m):
            members = Zc[assign == j]
            if members.shape[0]:
                centers[j] = members.mean(axis=0)
    return centers


@dataclass(frozen=True)
class Prototypes:
    W: np.ndarray
    labels: np.ndarray

    def predict(self, Zt):
        out = np.empty(Zt.shape[0], dtype=np.int64)
        for s in range(0, Zt.shape[0], _BLOCK):
            out[s:s + _BLOCK] = self.labels[np.argmin(_sq_dists(Zt[s:s + _BLOCK], self.W), axis=1)]
        return out


def fit_proto(Z, y, params, seed):
    per_class = int(params["prototypes"])
    W, labels = [], []
    for c in range(2):
        Zc = Z[y == c]
        centers = _kmeans(Zc, min(per_class, Zc.shape[0]))
        W.append(centers)
        labels.extend([c] * centers.shape[0])
    W = np.vstack(W)
    labels = np.array(labels, dtype=np.int64)
    n = Z.shape[0]
    for t in range(n):
        rate = _LVQ_RATE * (1.0 - t / n)
        j = int(np.argmin(((W - Z[t]) ** 2).sum(axis=1)))
        step = rate * (Z[t] - W[j])
        W[j] += step if labels[j] == y[t] else -step
    return Prototypes(W, labels)


# -- ridge regression on +/-1 targets ---------------------------------------


@dataclass(frozen=True)
class LinearRidge:
    coef: np.ndarray
    intercept: float

    def predict(self, Zt):
        return (Zt @ self.coef + self.intercept > 0.0).astype(np.int64)


def fit_linridge(Z, y, params, seed):
    t = 2.0 * y - 1.0
    b = float(t.mean())
    A = Z.T @ Z + float(params["penalty"]) * np.eye(Z.shape[1])
    return LinearRidge(np.linalg.solve(A, Z.T @ (t - b)), b)


# -- random forest ------------------------------------------------------------


def _mtry(fraction: float, d: int) -> int:
    return max(1, int(np.floor(fraction * d)))


@dataclass(frozen=True)
class Forest:
    arrays: tuple

    @property
    def n_trees(self) -> int:
        return self.arrays[-1].shape[0] - 1

    def votes(self, Zt, checkpoints):
        return _trees.forest_votes(*self.arrays, np.ascontiguousarray(Zt), np.asarray(checkpoints, dtype=np.int64))

    def predict(self, Zt):
        return self.votes(Zt, [self.n_trees])[0]


def fit_rf(Z, y, params, seed):
    mtry = _mtry(float(params["mtry_fraction"]), Z.shape[1])
    return Forest(_trees.grow_forest(np.ascontiguousarray(Z), y, int(params["trees"]), mtry, np.uint64(seed)))


def grid_rf(Z, y, Zt, points, seed):
    out = [None] * len(points)
    groups: dict[float, list[int]] = {}
    for i, p in enumerate(points):
        groups.setdefault(float(p["mtry_fraction"]), []).append(i)
    for frac, members in groups.items():
        counts = sorted({int(points[i]["trees"]) for i in members})
        forest = fit_rf(Z, y, {"mtry_fraction": frac, "trees": counts[-1]}, seed)
        votes = forest.votes(Zt, counts)
        for i in members:
            out[i] = votes[counts.index(int(points[i]["trees"]))]
    return out


# -- gradient boosted trees -----------------------------------------------------


@dataclass(frozen=True)
class Boosting:
    learning_rate: float
    init: float
    arrays: tuple

    @property
    def rounds(self) -> int:
        return self.arrays[-1].shape[0] - 1

    def votes(self, Zt, checkpoints):
        return _trees.boosting_votes(
            self.init, self.learning_rate, *self.arrays,
            np.ascontiguousarray(Zt), np.asarray(checkpoints, dtype=np.int64),
        )

    def predict(self, Zt):
        return self.votes(Zt, [self.rounds])[0]


def fit_gbstump(Z, y, params, seed):
    lr = float(params["learning_rate"])
    init, *arrays = _trees.grow_boosting(
        np.ascontiguousarray(Z), y, int(params["rounds"]), lr, int(params["depth"]),
        _GBM_BAG_FRACTION, np.uint64(seed),
    )
    return Boosting(lr, init, tuple(arrays))


def grid_gbstump(Z, y, Zt, points, seed):
    out = [None] * len(points)
    groups: dict[tuple, list[int]] = {}
    for i, p in enumerate(points):
        groups.setdefault((float(p["learning_rate"]), int(p["depth"])), []).append(i)
    for (lr, depth), members in groups.items():
        counts = sorted({int(points[i]["rounds"]) for i in members})
        model = fit_gbstump(Z, y, {"learning_rate": lr, "depth": depth, "rounds": counts[-1]}, seed)
        votes = model.votes(Zt, counts)
        for i in members:
            out[i] = votes[counts.index(int(points[i]["rounds"]))]
    return out


@dataclass(frozen=True)
class Constant:
    label: int

    def predict(self, Zt):
        return np.full(Zt.shape[0], self.label, dtype=np.int64)
