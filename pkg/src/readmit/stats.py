"""Paired sign test and boxplot/IQR outlier summaries."""
from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, field
from math import comb

import numpy as np

# Wins needed to reject at alpha = 0.05 over 10 folds, as used by the
# original study's comparison of its two best models.
DEFAULT_CRITICAL_WINS = {10: 8}


@dataclass
class SignTestResult:
    wins_a: int
    wins_b: int
    ties: int
    n_effective: int
    p_value_two_sided: float
    alpha: float
    decision: str
    critical_value: int | None = None
    critical_decision: str | None = None

    def as_dict(self):
        return asdict(self)


def binomial_two_sided(wins_a: int, wins_b: int) -> float:
    """Exact two-sided p-value of a fair-coin split, summed with integers."""
    n = wins_a + wins_b
    if n == 0:
        return 1.0
    tail = sum(comb(n, i) for i in range(min(wins_a, wins_b) + 1))
    return min(1.0, 2 * tail / 2 ** n)


def sign_test(scores_a, scores_b, alpha: float = 0.05, critical_table=None) -> SignTestResult:
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("score vectors differ in length")
    if a.size == 0:
        raise ValueError("sign test needs at least one pair")
    wa = int(np.sum(a > b))
    wb = int(np.sum(b > a))
    ties = int(a.size - wa - wb)
    p = binomial_two_sided(wa, wb)
    res = SignTestResult(wa, wb, ties, wa + wb, p, alpha,
                         "reject_null" if p < alpha else "fail_to_reject")
    if critical_table and res.n_effective in critical_table:
        w = critical_table[res.n_effective]
        res.critical_value = w
        res.critical_decision = "reject_null" if max(wa, wb) >= w else "fail_to_reject"
    return res


@dataclass
class BoxplotSummary:
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    iqr: float
    lower_fence: float
    upper_fence: float
    outliers: list = field(default_factory=list)  # (score, params) pairs

    def as_dict(self):
        return asdict(self)


def quantile(sorted_values, q: float) -> float:
    """Linear interpolation at position (n - 1) * q of ascending values."""
    pos = (len(sorted_values) - 1) * q
    lo = int(np.floor(pos))
    hi = min(lo + 1, len(sorted_values) - 1)
    return float(sorted_values[lo] + (pos - lo) * (sorted_values[hi] - sorted_values[lo]))


def boxplot_summary(values) -> BoxplotSummary:
    """``values`` is a sequence of (score, params) pairs, or bare scores."""
    pairs = [v if isinstance(v, tuple) else (v, None) for v in values]
    if len(pairs) < 4:
        raise ValueError("boxplot summary needs at least 4 values")
    scores = np.sort(np.array([s for s, _ in pairs], dtype=np.float64))
    q1, med, q3 = (quantile(scores, q) for q in (0.25, 0.5, 0.75))
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    outliers = sorted(((float(s), p) for s, p in pairs if s < lo or s > hi),
                      key=lambda t: t[0])
    return BoxplotSummary(float(scores[0]), q1, med, q3, float(scores[-1]), iqr, lo, hi, outliers)


def outlier_attribution(summary: BoxplotSummary) -> dict:
    """Per-parameter value histogram over the outlier configurations."""
    table: dict[str, Counter] = {}
    for _, params in summary.outliers:
        for name, value in (params or {}).items():
            table.setdefault(name, Counter())["None" if value is None else str(value)] += 1
    return {name: dict(sorted(c.items())) for name, c in table.items()}
