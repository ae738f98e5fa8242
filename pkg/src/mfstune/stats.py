"""Medians, preemption bonus and the Mann-Whitney U test."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import comb, ndtr

from .errors import InvalidArgument

__all__ = ["mann_whitney_u", "midranks", "exact_u_distribution", "median", "ComparisonReport", "compare_strategies",
           "EXACT_LIMIT", "ALPHA"]

EXACT_LIMIT = 20
ALPHA = 0.05


def midranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties sharing the mean of their positions."""
    x = np.asarray(values, dtype=float)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sorted_x = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def exact_u_distribution(n1: int, n2: int) -> np.ndarray:
    """Counts of each U value over all ``C(n1+n2, n1)`` tie-free rank splits.

    Uses the recurrence ``f(n1, n2, u) = f(n1-1, n2, u-n2) + f(n1, n2-1, u)``
    on the position of the largest observation.
    """
    # table[a][b] is the count array for sample sizes (a, b)
    table = [[None] * (n2 + 1) for _ in range(n1 + 1)]
    for a in range(n1 + 1):
        for b in range(n2 + 1):
            if a == 0 or b == 0:
                table[a][b] = np.ones(1, dtype=np.int64)
                continue
            counts = np.zeros(a * b + 1, dtype=np.int64)
            top_a = table[a - 1][b]  # largest value belongs to the first sample
            counts[b:b + len(top_a)] += top_a
            top_b = table[a][b - 1]
            counts[:len(top_b)] += top_b
            table[a][b] = counts
    return table[n1][n2]


def mann_whitney_u(a: Sequence[float], b: Sequence[float], exact: bool | None = None) -> tuple[float, float]:
    """Two-sided Mann-Whitney U test; returns ``(U_a, p)``.

    ``U_a`` counts pairs with the ``a`` value larger (ties count one half).
    The p-value is exact when the samples are tie-free and
    ``len(a) + len(b) <= 20``; otherwise the normal approximation with tie
    and continuity corrections is used. ``exact=False`` forces the
    approximation; ``exact=True`` demands enumeration.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    n1, n2 = len(a), len(b)
    if n1 < 1 or n2 < 1:
        raise InvalidArgument("both samples need at least one value")
    ranks = midranks(np.concatenate([a, b]))
    u_a = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2)
    tie_free = len(np.unique(ranks)) == n1 + n2
    mu = n1 * n2 / 2
    eligible = tie_free and n1 + n2 <= EXACT_LIMIT
    if exact and not eligible:
        raise InvalidArgument("exact p needs tie-free samples with at most 20 values in total")
    if eligible and exact is not False:
        counts = exact_u_distribution(n1, n2)
        total = comb(n1 + n2, n1, exact=True)
        k = int(round(u_a))
        lower = counts[:k + 1].sum() / total
        upper = counts[k:].sum() / total
        return u_a, float(min(1.0, 2 * min(lower, upper)))
    _, tie_counts = np.unique(ranks, return_counts=True)
    n = n1 + n2
    tie_term = float(np.sum(tie_counts ** 3 - tie_counts)) / (n * (n - 1)) if n > 1 else 0.0
    var = n1 * n2 / 12 * ((n + 1) - tie_term)
    if var <= 0:
        return u_a, 1.0
    z = (abs(u_a - mu) - 0.5) / math.sqrt(var)
    return u_a, float(min(1.0, 2 * ndtr(-max(z, 0.0))))


def median(values: Sequence[float]) -> float:
    if len(values) == 0:
        raise InvalidArgument("median of an empty sample")
    return float(np.median(np.asarray(values, dtype=float)))


@dataclass(frozen=True)
class ComparisonReport:
    """Standard versus preemptive arm of one strategy."""

    strategy: str
    median_standard: float
    median_preemptive: float
    bonus: float
    u_statistic: float
    p_value: float
    significant: bool
    repetitions: int
    sufficient: bool = True

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def compare_strategies(standard: Sequence, preemptive: Sequence, strategy: str = "sko",
                       alpha: float = ALPHA, min_repetitions: int = 2) -> ComparisonReport:
    """Table-style comparison of paired repetitions.

    Each item is a tuning result (anything with ``best_mean`` and
    ``distinct``) and position ``i`` of both lists shares a seed. The bonus
    is the median of the paired differences in distinct thetas tested.
    """
    if len(standard) != len(preemptive):
        raise InvalidArgument(f"repetition counts differ: {len(standard)} vs {len(preemptive)}")
    if not standard:
        raise InvalidArgument("no repetitions to compare")
    best_std = [r.best_mean for r in standard]
    best_pre = [r.best_mean for r in preemptive]
    bonus = median([p.distinct - s.distinct for s, p in zip(standard, preemptive)])
    u, p = mann_whitney_u(best_pre, best_std)
    sufficient = len(standard) >= min_repetitions
    return ComparisonReport(strategy, median(best_std), median(best_pre), bonus, u, p,
                            bool(sufficient and p < alpha), len(standard), sufficient)
