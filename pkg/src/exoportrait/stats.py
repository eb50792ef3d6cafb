"""Rank-based group tests: Friedman, Wilcoxon signed-rank and Bonferroni."""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats as sps

WILCOXON_EXACT_MAX = 20
FRIEDMAN_EXACT_MAX = 8
_TOL = 1e-9


class DegenerateSampleError(ValueError):
    pass


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str  # "exact" or "approximate"
    n: int
    adjusted: bool = False


def _midranks(x) -> np.ndarray:
    return sps.rankdata(x, method="average")


def friedman_statistic(ranks) -> float:
    """``12 n / (k (k + 1)) * sum_j (Rbar_j - (k + 1) / 2)^2`` for ``(n, k)`` ranks."""
    r = np.asarray(ranks, dtype=float)
    n, k = r.shape
    rbar = r.mean(axis=0)
    return float(12.0 * n / (k * (k + 1)) * np.sum((rbar - (k + 1) / 2.0) ** 2))


def friedman_null_distribution(ranks):
    """Exact null distribution of the column rank sums.

    Every subject's rank vector is permuted over all ``k!`` orders (ties
    included, so duplicates carry their multiplicity).  Returns a Counter of
    doubled rank-sum tuples (integers even with mid-ranks) and the total
    count ``(k!)^n``.
    """
    r2 = np.rint(2 * np.asarray(ranks, dtype=float)).astype(int)
    n, k = r2.shape
    dist = Counter({(0,) * k: 1})
    for row in r2:
        perms = Counter(itertools.permutations(row.tolist()))
        nxt = Counter()
        for sums, c in dist.items():
            for p, m in perms.items():
                nxt[tuple(a + b for a, b in zip(sums, p))] += c * m
        dist = nxt
    return dist, math.factorial(k) ** n


def friedman(blocks, exact=None) -> TestResult:
    """Friedman test on an ``(n subjects, k treatments)`` matrix.

    ``exact`` None picks full enumeration for ``n <= 8`` and the chi-square
    approximation with ``k - 1`` degrees of freedom above.
    """
    x = np.asarray(blocks, dtype=float)
    if x.ndim != 2:
        raise ValueError("Friedman test needs an (n, k) matrix")
    n, k = x.shape
    if n < 2 or k < 2:
        raise ValueError("Friedman test needs n >= 2 subjects and k >= 2 treatments")
    if not np.all(np.isfinite(x)):
        raise ValueError("Friedman test: missing cells")
    ranks = np.apply_along_axis(_midranks, 1, x)
    q = friedman_statistic(ranks)
    if exact is None:
        exact = n <= FRIEDMAN_EXACT_MAX
    if exact:
        dist, total = friedman_null_distribution(ranks)
        hits = 0
        for sums, c in dist.items():
            rbar = np.asarray(sums, dtype=float) / (2.0 * n)
            qq = 12.0 * n / (k * (k + 1)) * np.sum((rbar - (k + 1) / 2.0) ** 2)
            if qq >= q - _TOL:
                hits += c
        return TestResult(q, hits / total, "exact", n)
    return TestResult(q, float(sps.chi2.sf(q, k - 1)), "approximate", n)


def signed_rank_distribution(ranks):
    """Counts of doubled ``W+`` over all ``2^n`` sign assignments of ``ranks``."""
    r2 = np.rint(2 * np.asarray(ranks, dtype=float)).astype(int)
    counts = np.zeros(int(r2.sum()) + 1, dtype=object)
    counts[0] = 1
    for r in r2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:len(counts) - r]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(differences, exact=None) -> TestResult:
    """Two-sided Wilcoxon signed-rank test of paired differences.

    Zeros are dropped, ``|d|`` ranked with mid-ranks and ``W`` is the sum of
    the positive ranks.  For ``n <= 20`` (or ``exact`` True) the p-value is
    the share of the ``2^n`` equally likely sign assignments whose ``W`` is
    at least as far from ``n (n + 1) / 4`` as observed; above, a normal
    approximation with tie-corrected variance.
    """
    d = np.asarray(differences, dtype=float).ravel()
    d = d[d != 0]
    n = d.size
    if n == 0:
        raise DegenerateSampleError("degenerate sample: all differences are zero")
    ranks = _midranks(np.abs(d))
    w = float(ranks[d > 0].sum())
    mean = n * (n + 1) / 4.0
    if exact is None:
        exact = n <= WILCOXON_EXACT_MAX
    if exact:
        counts = signed_rank_distribution(ranks)
        w2 = np.arange(len(counts)) / 2.0
        far = np.abs(w2 - mean) >= abs(w - mean) - _TOL
        hits = int(counts[far].sum())
        return TestResult(w, min(1.0, hits / 2 ** n), "exact", n)
    _, t = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - np.sum(t ** 3 - t) / 48.0
    if var <= 0:
        return TestResult(w, 1.0, "approximate", n)
    z = (w - mean) / math.sqrt(var)
    return TestResult(w, float(min(1.0, 2 * sps.norm.sf(abs(z)))), "approximate", n)


def bonferroni(p_values, m: int = None):
    """``min(1, m p)`` for each p-value; ``m`` defaults to their count."""
    p = np.asarray(p_values, dtype=float)
    m = p.size if m is None else m
    if m < p.size:
        raise ValueError(f"m = {m} comparisons is fewer than the {p.size} p-values")
    return np.minimum(1.0, m * p)


def adjust(results, m: int = None) -> list:
    """Bonferroni-adjusted copies of a list of TestResults."""
    adj = bonferroni([r.p_value for r in results], m)
    return [replace(r, p_value=float(a), adjusted=True) for r, a in zip(results, adj)]
