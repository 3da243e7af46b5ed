"""Compiled CART kernels for the tree learners.

Trees are stored flat: ``feature[node] < 0`` marks a leaf, otherwise
samples with ``x[feature] <= threshold`` go to ``left``.  A forest or a
boosted ensemble is the concatenation of its trees plus an offsets array.

Each tree (or boosting round) draws from its own splitmix64 stream keyed by
(seed, tree index), so the first T trees of a larger ensemble are identical
to an ensemble grown with T trees.
"""
import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)


@njit(cache=True)
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def _next(state):
    state[0] = state[0] + _GOLDEN
    return _mix(state[0])


@njit(cache=True)
def _randbelow(state, n):
    return np.int64(_next(state) % np.uint64(n))


@njit(cache=True)
def _stream(seed, index):
    state = np.empty(1, dtype=np.uint64)
    state[0] = _mix(np.uint64(seed) ^ _mix(np.uint64(index) + _GOLDEN))
    return state


@njit(cache=True)
def _threshold(lo, hi):
    t = 0.5 * (lo + hi)
    if t >= hi:
        t = lo
    return t


@njit(cache=True)
def _partition(X, idx, start, end, f, thr):
    i = start
    j = end - 1
    while i <= j:
        if X[idx[i], f] <= thr:
            i += 1
        else:
            tmp = idx[i]
            idx[i] = idx[j]
            idx[j] = tmp
            j -= 1
    return i


@njit(cache=True)
def _grow_classifier(X, y, w, idx, mtry, state, feat, thr, left, right, value):
    """Gini CART on the samples in ``idx`` weighted by ``w``; returns node count."""
    d = X.shape[1]
    cap = feat.shape[0]
    stack_node = np.empty(cap, dtype=np.int64)
    stack_start = np.empty(cap, dtype=np.int64)
    stack_end = np.empty(cap, dtype=np.int64)
    perm = np.empty(d, dtype=np.int64)
    n_nodes = 1
    top = 0
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = idx.shape[0]
    top = 1
    while top > 0:
        top -= 1
        node = stack_node[top]
        start = stack_start[top]
        end = stack_end[top]
        w0 = 0.0
        w1 = 0.0
        for i in range(start, end):
            if y[idx[i]] == 1:
                w1 += w[idx[i]]
            else:
                w0 += w[idx[i]]
        total = w0 + w1
        value[node] = w1 / total
        feat[node] = -1
        if w0 == 0.0 or w1 == 0.0 or end - start < 2:
            continue

        for j in range(d):
            perm[j] = j
        best_score = -1.0
        best_f = -1
        best_t = 0.0
        informative = 0
        drawn = 0
        m = end - start
        vals = np.empty(m, dtype=np.float64)
        while drawn < d and (informative < mtry or best_f < 0):
            r = drawn + _randbelow(state, d - drawn)
            f = perm[r]
            perm[r] = perm[drawn]
            perm[drawn] = f
            drawn += 1
            for i in range(m):
                vals[i] = X[idx[start + i], f]
            order = np.argsort(vals, kind="mergesort")
            if vals[order[0]] == vals[order[m - 1]]:
                continue
            informative += 1
            l0 = 0.0
            l1 = 0.0
            for p in range(m - 1):
                s = idx[start + order[p]]
                if y[s] == 1:
                    l1 += w[s]
                else:
                    l0 += w[s]
                if vals[order[p]] == vals[order[p + 1]]:
                    continue
                wl = l0 + l1
                wr = total - wl
                if wl <= 0.0 or wr <= 0.0:
                    continue
                r0 = w0 - l0
                r1 = w1 - l1
                score = (l0 * l0 + l1 * l1) / wl + (r0 * r0 + r1 * r1) / wr
                if score > best_score:
                    best_score = score
                    best_f = f
                    best_t = _threshold(vals[order[p]], vals[order[p + 1]])
        if best_f < 0:
            continue
        mid = _partition(X, idx, start, end, best_f, best_t)
        if mid == start or mid == end:
            continue
        feat[node] = best_f
        thr[node] = best_t
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack_node[top] = n_nodes
        stack_start[top] = start
        stack_end[top] = mid
        top += 1
        stack_node[top] = n_nodes + 1
        stack_start[top] = mid
        stack_end[top] = end
        top += 1
        n_nodes += 2
    return n_nodes


@njit(cache=True)
def grow_forest(X, y, n_trees, mtry, seed):
    """Bagged Gini trees; returns (feature, threshold, left, right, value, offsets)."""
    n, d = X.shape
    cap = 2 * n + 1
    total_cap = n_trees * cap
    feat = np.empty(total_cap, dtype=np.int64)
    thr = np.zeros(total_cap, dtype=np.float64)
    left = np.zeros(total_cap, dtype=np.int64)
    right = np.zeros(total_cap, dtype=np.int64)
    value = np.zeros(total_cap, dtype=np.float64)
    offsets = np.zeros(n_trees + 1, dtype=np.int64)
    w = np.zeros(n, dtype=np.float64)
    for t in range(n_trees):
        state = _stream(seed, t)
        w[:] = 0.0
        for _ in range(n):
            w[_randbelow(state, n)] += 1.0
        count = 0
        for i in range(n):
            if w[i] > 0.0:
                count += 1
        idx = np.empty(count, dtype=np.int64)
        c = 0
        for i in range(n):
            if w[i] > 0.0:
                idx[c] = i
                c += 1
        base = offsets[t]
        k = _grow_classifier(
            X, y, w, idx, mtry, state,
            feat[base:base + cap], thr[base:base + cap],
            left[base:base + cap], right[base:base + cap], value[base:base + cap],
        )
        offsets[t + 1] = base + k
    end = offsets[n_trees]
    return feat[:end].copy(), thr[:end].copy(), left[:end].copy(), right[:end].copy(), value[:end].copy(), offsets


@njit(cache=True)
def _leaf(feat, thr, left, right, base, x):
    node = 0
    while feat[base + node] >= 0:
        if x[feat[base + node]] <= thr[base + node]:
            node = left[base + node]
        else:
            node = right[base + node]
    return base + node


@njit(cache=True)
def forest_votes(feat, thr, left, right, value, offsets, X, checkpoints):
    """Predicted labels after each checkpoint tree count, shape (len(checkpoints), n).

    Class-1 probabilities are summed tree by tree in a fixed order; an
    exact 50/50 average predicts class 0.
    """
    n = X.shape[0]
    out = np.zeros((checkpoints.shape[0], n), dtype=np.int64)
    acc = np.zeros(n, dtype=np.float64)
    c = 0
    n_trees = offsets.shape[0] - 1
    for t in range(n_trees):
        base = offsets[t]
        for i in range(n):
            acc[i] += value[_leaf(feat, thr, left, right, base, X[i])]
        while c < checkpoints.shape[0] and checkpoints[c] == t + 1:
            for i in range(n):
                out[c, i] = 1 if acc[i] > 0.5 * (t + 1) else 0
            c += 1
    return out


@njit(cache=True)
def _grow_regressor(X, r, h, idx, max_depth, feat, thr, left, right, value):
    """Least-squares CART on residuals ``r`` with Newton leaf values sum(r)/sum(h)."""
    d = X.shape[1]
    cap = feat.shape[0]
    stack_node = np.empty(cap, dtype=np.int64)
    stack_start = np.empty(cap, dtype=np.int64)
    stack_end = np.empty(cap, dtype=np.int64)
    stack_depth = np.empty(cap, dtype=np.int64)
    n_nodes = 1
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = idx.shape[0]
    stack_depth[0] = 0
    top = 1
    while top > 0:
        top -= 1
        node = stack_node[top]
        start = stack_start[top]
        end = stack_end[top]
        depth = stack_depth[top]
        m = end - start
        sr = 0.0
        sh = 0.0
        for i in range(start, end):
            sr += r[idx[i]]
            sh += h[idx[i]]
        value[node] = sr / sh if abs(sh) >= 1e-150 else 0.0
        feat[node] = -1
        if depth >= max_depth or m < 2:
            continue
        best_score = -np.inf
        best_f = -1
        best_t = 0.0
        parent = sr * sr / m
        vals = np.empty(m, dtype=np.float64)
        for f in range(d):
            for i in range(m):
                vals[i] = X[idx[start + i], f]
            order = np.argsort(vals, kind="mergesort")
            if vals[order[0]] == vals[order[m - 1]]:
                continue
            sl = 0.0
            for p in range(m - 1):
                sl += r[idx[start + order[p]]]
                if vals[order[p]] == vals[order[p + 1]]:
                    continue
                nl = p + 1
                nr = m - nl
                srr = sr - sl
                score = sl * sl / nl + srr * srr / nr
                if score > best_score:
                    best_score = score
                    best_f = f
                    best_t = _threshold(vals[order[p]], vals[order[p + 1]])
        if best_f < 0 or best_score <= parent:
            continue
        mid = _partition(X, idx, start, end, best_f, best_t)
        if mid == start or mid == end:
            continue
        feat[node] = best_f
        thr[node] = best_t
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack_node[top] = n_nodes
        stack_start[top] = start
        stack_end[top] = mid
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = n_nodes + 1
        stack_start[top] = mid
        stack_end[top] = end
        stack_depth[top] = depth + 1
        top += 1
        n_nodes += 2
    return n_nodes


@njit(cache=True)
def grow_boosting(X, y, rounds, learning_rate, max_depth, bag_fraction, seed):
    """Logistic-loss gradient boosting with row subsampling per round.

    Returns (init_score, feature, threshold, left, right, value, offsets).
    """
    n, d = X.shape
    cap = min(2 ** (max_depth + 1) - 1, 2 * n + 1)
    total_cap = rounds * cap
    feat = np.empty(total_cap, dtype=np.int64)
    thr = np.zeros(total_cap, dtype=np.float64)
    left = np.zeros(total_cap, dtype=np.int64)
    right = np.zeros(total_cap, dtype=np.int64)
    value = np.zeros(total_cap, dtype=np.float64)
    offsets = np.zeros(rounds + 1, dtype=np.int64)

    pos = 0.0
    for i in range(n):
        pos += y[i]
    prior = pos / n
    init = np.log(prior / (1.0 - prior))
    score = np.full(n, init)
    r = np.empty(n, dtype=np.float64)
    h = np.empty(n, dtype=np.float64)
    bag = max(1, int(np.floor(bag_fraction * n)))
    perm = np.empty(n, dtype=np.int64)
    for t in range(rounds):
        for i in range(n):
            p = 1.0 / (1.0 + np.exp(-score[i]))
            r[i] = y[i] - p
            h[i] = p * (1.0 - p)
        state = _stream(seed, t)
        for i in range(n):
            perm[i] = i
        for i in range(bag):
            j = i + _randbelow(state, n - i)
            tmp = perm[i]
            perm[i] = perm[j]
            perm[j] = tmp
        idx = np.sort(perm[:bag])
        base = offsets[t]
        k = _grow_regressor(
            X, r, h, idx, max_depth,
            feat[base:base + cap], thr[base:base + cap],
            left[base:base + cap], right[base:base + cap], value[base:base + cap],
        )
        offsets[t + 1] = base + k
        for i in range(n):
            score[i] += learning_rate * value[_leaf(feat, thr, left, right, base, X[i])]
    end = offsets[rounds]
    return init, feat[:end].copy(), thr[:end].copy(), left[:end].copy(), right[:end].copy(), value[:end].copy(), offsets


@njit(cache=True)
def boosting_votes(init, learning_rate, feat, thr, left, right, value, offsets, X, checkpoints):
    """Predicted labels after each checkpoint round count; score 0 predicts class 0."""
    n = X.shape[0]
    out = np.zeros((checkpoints.shape[0], n), dtype=np.int64)
    score = np.full(n, init)
    c = 0
    rounds = offsets.shape[0] - 1
    for t in range(rounds):
        base = offsets[t]
        for i in range(n):
            score[i] += learning_rate * value[_leaf(feat, thr, left, right, base, X[i])]
        while c < checkpoints.shape[0] and checkpoints[c] == t + 1:
            for i in range(n):
                out[c, i] = 1 if score[i] > 0.0 else 0
            c += 1
    return out
