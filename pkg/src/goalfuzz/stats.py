"""Rank statistics and 2x2 association tests for comparing campaigns."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

EXACT_LIMIT = 8


@dataclass(frozen=True)
class MannWhitney:
    U: float
    z: float
    p: float


@dataclass(frozen=True)
class OddsRatio:
    odds_ratio: float
    p: float


def midranks(values: Sequence[float]) -> list[float]:
    """1-based ranks; tied values share the mean of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def _u_statistic(a: Sequence[float], b: Sequence[float]) -> float:
    ranks = midranks(list(a) + list(b))
    return sum(ranks[:len(a)]) - len(a) * (len(a) + 1) / 2


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2))


def mann_whitney_u(a: Sequence[float], b: Sequence[float]) -> MannWhitney:
    """U of ``a`` against ``b`` (pairs with a_i > b_j, ties count 0.5).

    z uses the tie-corrected normal approximation.  p is two-sided: exact
    over all rank permutations when both samples have at most 8 values,
    the normal approximation otherwise.
    """
    n1, n2 = len(a), len(b)
    if n1 < 1 or n2 < 1:
        raise ValueError("both samples need at least one value")
    u = _u_statistic(a, b)
    n = n1 + n2
    mean = n1 * n2 / 2
    counts: dict[float, int] = {}
    for v in list(a) + list(b):
        counts[v] = counts.get(v, 0) + 1
    tie_term = sum(t ** 3 - t for t in counts.values())
    var = n1 * n2 / 12 * ((n + 1) - tie_term / (n * (n - 1))) if n > 1 else 0.0
    z = 0.0 if var <= 0 else (u - mean) / math.sqrt(var)
    if var <= 0:
        p = 1.0
    elif n1 <= EXACT_LIMIT and n2 <= EXACT_LIMIT:
        p = _exact_p(a, b, u)
    else:
        p = min(1.0, 2 * _normal_sf(abs(z)))
    return MannWhitney(u, z, p)


def _exact_p(a: Sequence[float], b: Sequence[float], u: float) -> float:
    # Every way of choosing which pooled positions belong to the first sample.
    ranks = midranks(list(a) + list(b))
    n1, n = len(a), len(a) + len(b)
    offset = n1 * (n1 + 1) / 2
    mean = n1 * (n - n1) / 2
    observed = abs(u - mean)
    hits = total = 0
    for combo in itertools.combinations(range(n), n1):
        total += 1
        if abs(sum(ranks[i] for i in combo) - offset - mean) >= observed - 1e-9:
            hits += 1
    return hits / total


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    if len(x) != len(y):
        raise ValueError("sequences differ in length")
    if len(x) < 2:
        raise ValueError("need at least two pairs")
    rx, ry = midranks(x), midranks(y)
    mx, my = sum(rx) / len(rx), sum(ry) / len(ry)
    sxy = sum((p - mx) * (q - my) for p, q in zip(rx, ry))
    sxx = sum((p - mx) ** 2 for p in rx)
    syy = sum((q - my) ** 2 for q in ry)
    if sxx == 0 or syy == 0:
        raise ValueError("rank variance is zero; correlation undefined")
    return sxy / math.sqrt(sxx * syy)


def _hypergeom_pmf(k: int, row1: int, col1: int, n: int) -> float:
    return math.comb(col1, k) * math.comb(n - col1, row1 - k) / math.comb(n, row1)


def fisher_exact(table: Sequence[Sequence[int]]) -> float:
    """Two-sided p: total probability of tables no more likely than observed."""
    (n11, n12), (n21, n22) = table
    row1, col1 = n11 + n12, n11 + n21
    n = n11 + n12 + n21 + n22
    if n == 0:
        return 1.0
    lo, hi = max(0, row1 + col1 - n), min(row1, col1)
    observed = _hypergeom_pmf(n11, row1, col1, n)
    p = sum(q for k in range(lo, hi + 1)
            if (q := _hypergeom_pmf(k, row1, col1, n)) <= observed * (1 + 1e-7))
    return min(1.0, p)


def odds_ratio(table: Sequence[Sequence[int]]) -> OddsRatio:
    """(n11 n22) / (n12 n21); infinite when only the denominator is zero.

    A table with both products zero has no defined ratio and yields nan.
    """
    (n11, n12), (n21, n22) = table
    if min(n11, n12, n21, n22) < 0:
        raise ValueError("counts must be nonnegative")
    num, den = n11 * n22, n12 * n21
    if den == 0:
        ratio = math.nan if num == 0 else math.inf
    else:
        ratio = num / den
    return OddsRatio(ratio, fisher_exact(table))
