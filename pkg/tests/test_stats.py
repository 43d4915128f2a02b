from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from eventgraph.stats import (
    GroupCounts,
    PairedOutcomes,
    aggregate,
    mcnemar_exact,
    newcombe_paired,
    percent,
    percent_of,
    wilson,
)


def pct(interval):
    return tuple(percent(x) for x in interval)


@pytest.mark.parametrize(
    "k,n,expected",
    [
        (153, 300, ("45.37", "56.61")),
        (406, 500, ("77.54", "84.38")),
        (880, 1000, ("85.84", "89.87")),
        (35, 100, ("26.36", "44.75")),
        (0, 10, ("0.00", "27.75")),
        (10, 10, ("72.25", "100.00")),
    ],
)
def test_wilson_values(k, n, expected):
    assert pct(wilson(k, n)) == expected


def test_newcombe_reference_interval():
    pairs = PairedOutcomes(406, 94, 0, 0)
    assert pct(newcombe_paired(pairs)) == ("15.53", "22.46")
    assert percent(pairs.difference) == "18.80"


def test_newcombe_identical_systems_contains_zero():
    lo, hi = newcombe_paired(PairedOutcomes(300, 0, 0, 200))
    assert lo < 0 < hi


def test_mcnemar_values():
    assert mcnemar_exact(94, 0) == pytest.approx(2 * 2.0**-94, rel=1e-12)
    assert mcnemar_exact(5, 0) == 0.0625
    assert mcnemar_exact(3, 3) == 1.0
    with pytest.raises(ValueError):
        mcnemar_exact(0, 0)


def test_percent_round_half_even():
    assert percent(Fraction(1, 8), 1) == "12.5"
    assert percent(Fraction(1, 800)) == "0.12"
    assert percent(Fraction(3, 800)) == "0.38"
    assert percent_of(2, 3) == "66.67"


def test_aggregate_counts():
    rows = [
        {"family": "descriptive", "correct_question": 1, "correct_options": "0/0"},
        {"family": "descriptive", "correct_question": 1, "correct_options": "0/0"},
        {"family": "counterfactual", "correct_question": 0, "correct_options": "3/4"},
    ]
    groups = aggregate(rows)
    assert groups["descriptive"] == GroupCounts(2, 2, 0, 0)
    assert groups["counterfactual"] == GroupCounts(1, 0, 4, 3)


def test_paired_from_bits():
    p = PairedOutcomes.from_bits([1, 1, 0, 0, 1], [1, 0, 1, 0, 0])
    assert (p.both, p.b, p.c, p.neither) == (1, 2, 1, 1)


counts = st.integers(1, 400).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n)))


@given(counts)
def test_wilson_contains_estimate_within_unit_interval(kn):
    k, n = kn
    lo, hi = wilson(k, n)
    assert 0.0 <= lo <= k / n <= hi <= 1.0


@given(counts, st.integers(2, 5))
def test_wilson_narrows_with_n(kn, m):
    k, n = kn
    lo1, hi1 = wilson(k, n)
    lo2, hi2 = wilson(k * m, n * m)
    assert hi2 - lo2 < hi1 - lo1


cells = st.tuples(*[st.integers(0, 60)] * 4)


@given(cells)
def test_newcombe_contains_difference(c):
    assume(sum(c) > 0)
    p = PairedOutcomes(*c)
    lo, hi = newcombe_paired(p)
    assert lo - 1e-12 <= p.difference <= hi + 1e-12
    assert -1.0 - 1e-12 <= lo and hi <= 1.0 + 1e-12


@given(st.integers(0, 80), st.integers(0, 80))
def test_mcnemar_symmetric_and_bounded(b, c):
    assume(b + c > 0)
    p = mcnemar_exact(b, c)
    assert p == mcnemar_exact(c, b)
    assert 0.0 < p <= 1.0


@given(st.integers(2, 80))
def test_mcnemar_monotone_in_imbalance(n):
    ps = [mcnemar_exact(n - c, c) for c in range(0, n // 2 + 1)]
    assert ps == sorted(ps)
