import math
import random

import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from goalfuzz.stats import fisher_exact, mann_whitney_u, midranks, odds_ratio, spearman_rho


def pair_count_u(a, b):
    return sum(1.0 if x > y else 0.5 if x == y else 0.0 for x in a for y in b)


def test_u_examples():
    assert mann_whitney_u([1, 2], [3, 4]).U == 0
    res = mann_whitney_u([1, 2, 3], [1, 2, 3])
    assert res.U == 4.5 and res.p == pytest.approx(1.0)
    same = [4, 1, 7, 7, 2]
    assert mann_whitney_u(same, same).U == len(same) ** 2 / 2


def test_u_large_sample_uses_normal_approximation():
    rng = random.Random(1)
    a = [rng.gauss(0, 1) for _ in range(30)]
    b = [rng.gauss(0.8, 1) for _ in range(25)]
    ours = mann_whitney_u(a, b)
    ref = sps.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic",
                           use_continuity=False)
    assert ours.U == pytest.approx(ref.statistic)
    assert ours.p == pytest.approx(ref.pvalue, rel=1e-9)


def test_u_requires_values():
    with pytest.raises(ValueError):
        mann_whitney_u([], [1])


def test_spearman_examples():
    assert spearman_rho([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)
    assert spearman_rho([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)
    # Rank differences 0, -1, 1, -1, 1: 1 - 6 * 4 / (5 * 24) = 0.8.
    assert spearman_rho([1, 2, 3, 4, 5], [1, 3, 2, 5, 4]) == pytest.approx(0.8)
    with pytest.raises(ValueError):
        spearman_rho([1, 1, 1], [1, 2, 3])
    with pytest.raises(ValueError):
        spearman_rho([1], [1])


@given(st.lists(st.integers(-20, 20), min_size=2, max_size=12).flatmap(
    lambda x: st.tuples(st.just(x), st.lists(st.integers(-20, 20), min_size=len(x),
                                             max_size=len(x)))))
def test_spearman_monotone_invariance(xy):
    x, y = xy
    if len(set(x)) < 2 or len(set(y)) < 2:
        return
    rho = spearman_rho(x, y)
    assert spearman_rho([math.exp(v / 5) for v in x], [v ** 3 for v in y]) == pytest.approx(rho)
    assert rho == pytest.approx(sps.spearmanr(x, y).statistic)


def test_midranks():
    assert midranks([10, 20, 20, 5]) == [2, 3.5, 3.5, 1]


def test_odds_ratio_examples():
    res = odds_ratio([[1, 1], [1, 1]])
    assert res.odds_ratio == 1 and res.p == pytest.approx(1.0)
    assert odds_ratio([[5, 0], [0, 5]]).odds_ratio == math.inf
    assert odds_ratio([[2, 3], [4, 1]]).odds_ratio == pytest.approx(1 / 6)
    assert odds_ratio([[0, 3], [4, 1]]).odds_ratio == 0
    assert math.isnan(odds_ratio([[0, 3], [0, 1]]).odds_ratio)
    with pytest.raises(ValueError):
        odds_ratio([[-1, 0], [0, 0]])


@given(st.lists(st.integers(0, 12), min_size=4, max_size=4))
def test_fisher_matches_reference(cells):
    table = [cells[:2], cells[2:]]
    if sum(cells) == 0:
        assert fisher_exact(table) == 1.0
        return
    assert fisher_exact(table) == pytest.approx(sps.fisher_exact(table).pvalue, rel=1e-9, abs=1e-12)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=15),
       st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=15))
def test_u_complement(a, b):
    assert mann_whitney_u(a, b).U + mann_whitney_u(b, a).U == pytest.approx(len(a) * len(b))
    assert mann_whitney_u(a, b).U == pytest.approx(pair_count_u(a, b))
