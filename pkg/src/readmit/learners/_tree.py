"""Exact CART growth with presorted feature orders, compiled with numba.

Each row carries a statistic vector ``Y[r]``: one-hot class indicators for
classification trees, the residual for regression trees. A split maximizes

    sum_q S_left[q]**2 / n_left + sum_q S_right[q]**2 / n_right

which is the weighted Gini decrease for one-hot rows and the squared-error
decrease for residuals. Candidate thresholds are midpoints between
consecutive distinct values; rows with ``x <= threshold`` go left.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

LEAF = -1
NO_LIMIT = np.iinfo(np.int64).max


def transpose(X) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(X, dtype=np.float64).T)


@nb.njit(cache=True)
def _next(state):
    # splitmix64
    state[0] += np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@nb.njit(cache=True)
def _below(state, n):
    return np.int64(_next(state) % np.uint64(n))


@nb.njit(nogil=True, cache=True)
def presort(XT):
    """Stable per-feature argsort of the transposed matrix, shape (p, n)."""
    p, n = XT.shape
    out = np.empty((p, n), dtype=np.int32)
    for f in range(p):
        out[f] = np.argsort(XT[f], kind="mergesort").astype(np.int32)
    return out


@nb.njit(nogil=True, cache=True)
def expand_presort(global_sorted, counts):
    """Sorted local positions for a multiset of rows (bootstrap counts).

    Returns (samples, sorted_local) where samples[j] is the row of local
    position j and sorted_local[f] orders local positions by feature f.
    """
    p, n = global_sorted.shape
    m = 0
    for r in range(n):
        m += counts[r]
    samples = np.empty(m, dtype=np.int64)
    first = np.empty(n, dtype=np.int64)
    pos = 0
    for r in range(n):
        first[r] = pos
        for c in range(counts[r]):
            samples[pos] = r
            pos += 1
    out = np.empty((p, m), dtype=np.int32)
    for f in range(p):
        pos = 0
        for i in range(n):
            r = global_sorted[f, i]
            for c in range(counts[r]):
                out[f, pos] = first[r] + c
                pos += 1
    return samples, out


@nb.njit(nogil=True, cache=True)
def grow(XT, Y, samples, sorted_idx, max_depth, min_split, min_leaf, max_features, seed):
    """Grow one tree depth-first. ``sorted_idx`` is consumed (partitioned in place).

    ``XT`` is the feature matrix transposed, shape (p, n).
    Returns (feature, threshold, left, right, value, n_node, leaf_of) where
    value holds the summed statistic vector of each node and leaf_of maps
    each local position to its leaf.
    """
    m = samples.shape[0]
    p = XT.shape[0]
    q = Y.shape[1]
    cap = max(2 * m - 1, 1)
    feature = np.full(cap, LEAF, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, LEAF, dtype=np.int64)
    right = np.full(cap, LEAF, dtype=np.int64)
    value = np.zeros((cap, q))
    n_node = np.zeros(cap, dtype=np.int64)
    leaf_of = np.empty(m, dtype=np.int64)

    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    perm = np.arange(p)
    goes_left = np.zeros(m, dtype=np.bool_)
    buf = np.empty(m, dtype=np.int32)
    total = np.zeros(q)
    lsum = np.zeros(q)

    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    st_node = np.empty(cap, dtype=np.int64)
    top = 0
    n_nodes = 1
    if m == 0:
        return feature[:1], threshold[:1], left[:1], right[:1], value[:1], n_node[:1], leaf_of
    st_start[0] = 0
    st_end[0] = m
    st_depth[0] = 0
    st_node[0] = 0
    top = 1

    while top > 0:
        top -= 1
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        node = st_node[top]
        count = end - start

        total[:] = 0.0
        ss = 0.0
        for pos in range(start, end):
            r = samples[sorted_idx[0, pos]]
            for k in range(q):
                v = Y[r, k]
                total[k] += v
                ss += v * v
        value[node] = total
        n_node[node] = count
        parent = 0.0
        for k in range(q):
            parent += total[k] * total[k]
        parent /= count

        is_leaf = (depth >= max_depth or count < min_split
                   or count < 2 * min_leaf or ss - parent <= 1e-12 * ss)

        best_f = -1
        best_pos = -1
        best_thr = 0.0
        best = -np.inf
        if not is_leaf:
            for i in range(p):
                perm[i] = i
            n_visit = 0
            n_informative = 0
            while n_visit < p and n_informative < max_features:
                if max_features < p:
                    j = n_visit + _below(state, p - n_visit)
                    tmp = perm[n_visit]
                    perm[n_visit] = perm[j]
                    perm[j] = tmp
                f = perm[n_visit]
                n_visit += 1
                lo = XT[f, samples[sorted_idx[f, start]]]
                hi = XT[f, samples[sorted_idx[f, end - 1]]]
                if not hi > lo:
                    continue
                n_informative += 1
                lsum[:] = 0.0
                for pos in range(start, end - 1):
                    r = samples[sorted_idx[f, pos]]
                    for k in range(q):
                        lsum[k] += Y[r, k]
                    nl = pos - start + 1
                    nr = count - nl
                    if nl < min_leaf:
                        continue
                    if nr < min_leaf:
                        break
                    x_cur = XT[f, r]
                    x_next = XT[f, samples[sorted_idx[f, pos + 1]]]
                    if not x_next > x_cur:
                        continue
                    a = 0.0
                    b = 0.0
                    for k in range(q):
                        a += lsum[k] * lsum[k]
                        d = total[k] - lsum[k]
                        b += d * d
                    proxy = a / nl + b / nr
                    if best_f < 0 or proxy > best + 1e-12 * abs(best):
                        best = proxy
                        best_f = f
                        best_pos = pos
                        thr = 0.5 * (x_cur + x_next)
                        if not thr < x_next:
                            thr = x_cur
                        best_thr = thr
            if best_f < 0:
                is_leaf = True

        if is_leaf:
            for pos in range(start, end):
                leaf_of[sorted_idx[0, pos]] = node
            continue

        feature[node] = best_f
        threshold[node] = best_thr
        for pos in range(start, end):
            goes_left[sorted_idx[best_f, pos]] = pos <= best_pos
        n_left = best_pos - start + 1
        # children that must be leaves only need feature 0's order
        small = max(min_split, 2 * min_leaf)
        n_part = p
        if depth + 1 >= max_depth or (n_left < small and count - n_left < small):
            n_part = 1
        for f in range(n_part):
            a = 0
            b = n_left
            for pos in range(start, end):
                j = sorted_idx[f, pos]
                if goes_left[j]:
                    buf[a] = j
                    a += 1
                else:
                    buf[b] = j
                    b += 1
            for t in range(count):
                sorted_idx[f, start + t] = buf[t]

        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        # right pushed first so the left subtree is numbered first
        st_start[top] = start + n_left
        st_end[top] = end
        st_depth[top] = depth + 1
        st_node[top] = rnode
        top += 1
        st_start[top] = start
        st_end[top] = start + n_left
        st_depth[top] = depth + 1
        st_node[top] = lnode
        top += 1

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), n_node[:n_nodes].copy(), leaf_of)


@nb.njit(nogil=True, cache=True)
def apply(X, feature, threshold, left, right):
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] != LEAF:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_node: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.feature)

    def apply(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return apply(X, self.feature, self.threshold, self.left, self.right)

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_node": self.n_node.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        q = len(d["value"][0]) if d["value"] else 1
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.float64).reshape(-1, q),
            np.asarray(d["n_node"], dtype=np.int64),
        )


def grow_tree(XT, Y, samples, sorted_idx, *, max_depth=None, min_samples_split=2,
              min_samples_leaf=1, max_features=None, seed=0):
    """Python entry point taking the transposed feature matrix (p, n);
    returns (Tree, leaf of each local position)."""
    p = XT.shape[0]
    mf = p if max_features is None else max(1, min(int(max_features), p))
    md = NO_LIMIT if max_depth is None else int(max_depth)
    out = grow(
        XT,
        np.ascontiguousarray(Y, dtype=np.float64),
        np.ascontiguousarray(samples, dtype=np.int64),
        sorted_idx, md, int(min_samples_split), int(min_samples_leaf), mf,
        np.uint64(seed % (1 << 64)),
    )
    return Tree(*out[:6]), out[6]
