"""Majority undersampling followed by SMOTE oversampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import N_CLASSES, FeatureMatrix
from .seeding import rng

MAJORITY, REFERENCE = 0, 1  # "NO" is undersampled down to the size of ">30"


@dataclass(frozen=True)
class BalanceConfig:
    seed: int = 0
    k_neighbors: int = 5
    target_per_class: int | str = "auto"

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if self.target_per_class != "auto" and int(self.target_per_class) < 1:
            raise ValueError("target_per_class must be positive or 'auto'")


@dataclass(frozen=True)
class BalancedDataset:
    matrix: FeatureMatrix
    synthetic: np.ndarray  # bool per row
    # for synthetic rows: the two parent row indices (into ``matrix``) and the gap
    parents: np.ndarray
    gaps: np.ndarray


def undersample_majority(m: FeatureMatrix, cfg: BalanceConfig) -> FeatureMatrix:
    """Keep every ">30" row and an equally sized uniform subset of "NO".

    Surviving rows keep their original relative order.
    """
    counts = m.class_counts()
    if counts[REFERENCE] == 0:
        raise ValueError("class '>30' is empty; nothing to match the majority to")
    target = counts[REFERENCE]
    majority = np.flatnonzero(m.y == MAJORITY)
    if len(majority) <= target:
        return m
    chosen = rng(cfg.seed, "undersample").choice(majority, size=target, replace=False)
    keep = np.ones(m.n, dtype=bool)
    keep[majority] = False
    keep[chosen] = True
    return m.take(np.flatnonzero(keep))


def nearest_neighbors(points: np.ndarray, k: int, chunk: int = 512) -> np.ndarray:
    """Exact k nearest neighbors (Euclidean) of every point among the others,
    ordered by distance then row index. Brute force, chunked over queries."""
    n = len(points)
    sq = np.einsum("ij,ij->i", points, points)
    out = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        d = sq[start:stop, None] - 2.0 * points[start:stop] @ points.T + sq[None, :]
        np.maximum(d, 0.0, out=d)
        d[np.arange(stop - start), np.arange(start, stop)] = np.inf
        # everything within the k-th smallest distance, so ties at the
        # boundary are settled by row index rather than by partition order
        kth = np.partition(d, k - 1, axis=1)[:, k - 1]
        for r in range(stop - start):
            cand = np.flatnonzero(d[r] <= kth[r])
            order = np.lexsort((cand, d[r, cand]))[:k]
            out[start + r] = cand[order]
    return out


def _resolve_target(m: FeatureMatrix, cfg: BalanceConfig) -> int:
    if cfg.target_per_class == "auto":
        return m.class_counts()[REFERENCE]
    return int(cfg.target_per_class)


def smote(m: FeatureMatrix, cfg: BalanceConfig) -> BalancedDataset:
    """Oversample every class below the target with SMOTE interpolation.

    Classes already at or above the target are left as they are, so after
    undersampling only "<30" grows. Synthetic rows are appended after the
    originals, class by class.
    """
    target = _resolve_target(m, cfg)
    counts = m.class_counts()
    gen = rng(cfg.seed, "smote")
    new_X, new_y, parents, gaps = [], [], [], []
    for c in range(N_CLASSES):
        need = target - counts[c]
        if need <= 0:
            continue
        members = np.flatnonzero(m.y == c)
        if len(members) < 2:
            raise ValueError(
                f"class {c} has {len(members)} row(s); SMOTE needs at least 2"
            )
        k = min(cfg.k_neighbors, len(members) - 1)
        pts = m.X[members]
        nn = nearest_neighbors(pts, k)
        base = gen.integers(0, len(members), size=need)
        pick = gen.integers(0, k, size=need)
        u = gen.random(need)
        other = nn[base, pick]
        new_X.append(pts[base] + u[:, None] * (pts[other] - pts[base]))
        new_y.append(np.full(need, c, dtype=np.int64))
        parents.append(np.column_stack([members[base], members[other]]))
        gaps.append(u)
    if not new_X:
        return BalancedDataset(m, np.zeros(m.n, bool), np.zeros((0, 2), np.int64), np.zeros(0))
    X = np.vstack([m.X] + new_X)
    y = np.concatenate([m.y] + new_y)
    synthetic = np.zeros(len(y), dtype=bool)
    synthetic[m.n:] = True
    return BalancedDataset(
        FeatureMatrix(m.names, X, y), synthetic, np.vstack(parents), np.concatenate(gaps)
    )


def balance(m: FeatureMatrix, cfg: BalanceConfig) -> BalancedDataset:
    return smote(undersample_majority(m, cfg), cfg)


def verify_convexity(bd: BalancedDataset, rtol: float = 1e-9) -> list[int]:
    """Check that each synthetic row lies on the segment between two
    original rows of its own class. Returns indices of failing rows.

    The gap is re-derived per coordinate from the endpoints and must agree
    across every coordinate where the endpoints differ.
    """
    X, y = bd.matrix.X, bd.matrix.y
    bad = []
    syn_rows = np.flatnonzero(bd.synthetic)
    for j, row in enumerate(syn_rows):
        a, b = bd.parents[j]
        if bd.synthetic[a] or bd.synthetic[b] or not (y[a] == y[b] == y[row]):
            bad.append(int(row))
            continue
        xa, xb, xs = X[a], X[b], X[row]
        diff = xb - xa
        scale = np.maximum(np.abs(xa), np.abs(xb)) + 1.0
        moving = np.abs(diff) > rtol * scale
        if np.any(np.abs(xs[~moving] - xa[~moving]) > rtol * scale[~moving]):
            bad.append(int(row))
            continue
        if moving.any():
            t = (xs[moving] - xa[moving]) / diff[moving]
            u = float(np.median(t))
            if u < -rtol or u > 1 + rtol:
                bad.append(int(row))
                continue
            if np.any(np.abs(xa + u * diff - xs) > rtol * scale):
                bad.append(int(row))
    return bad
