"""Exact evaluation statistics: Wilson, Newcombe paired difference, McNemar."""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

Z95 = 1.96


@dataclass(frozen=True)
class BinomialCount:
    k: int
    n: int

    def __post_init__(self):
        if self.n < 1 or not 0 <= self.k <= self.n:
            raise ValueError(f"invalid binomial count {self.k}/{self.n}")

    @property
    def p(self) -> float:
        return self.k / self.n


def wilson(k: int, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for ``k`` successes in ``n`` trials, as proportions."""
    BinomialCount(k, n)
    p = k / n
    z2 = z * z
    centre = p + z2 / (2 * n)
    half = z * math.sqrt(p * (1 - p) / n + z2 / (4 * n * n))
    denom = 1 + z2 / n
    lo = (centre - half) / denom
    hi = (centre + half) / denom
    # Exact boundary values at k = 0 and k = n.
    return (0.0 if k == 0 else max(0.0, lo), 1.0 if k == n else min(1.0, hi))


@dataclass(frozen=True)
class PairedOutcomes:
    """2x2 table of correctness for systems A and B on the same items.

    ``b`` counts items only A got right, ``c`` items only B got right.
    """

    both: int
    b: int
    c: int
    neither: int

    def __post_init__(self):
        if min(self.both, self.b, self.c, self.neither) < 0:
            raise ValueError("paired counts must be non-negative")
        if self.n < 1:
            raise ValueError("paired outcomes need at least one item")

    @property
    def n(self) -> int:
        return self.both + self.b + self.c + self.neither

    @classmethod
    def from_bits(cls, a: Sequence[bool | int], b: Sequence[bool | int]) -> PairedOutcomes:
        if len(a) != len(b):
            raise ValueError("paired bit vectors differ in length")
        cells = [0, 0, 0, 0]
        for x, y in zip(a, b):
            cells[(0 if x else 2) + (0 if y else 1)] += 1
        both, a_only, b_only, neither = cells
        return cls(both, a_only, b_only, neither)

    @property
    def difference(self) -> float:
        return (self.b - self.c) / self.n


def newcombe_paired(pairs: PairedOutcomes, z: float = Z95) -> tuple[float, float]:
    """Newcombe's square-and-add interval for ``p_A - p_B`` on paired data (method 10)."""
    n = pairs.n
    k1 = pairs.both + pairs.b
    k2 = pairs.both + pairs.c
    p1, p2 = k1 / n, k2 / n
    l1, u1 = wilson(k1, n, z)
    l2, u2 = wilson(k2, n, z)
    a, b, c, d = pairs.both, pairs.b, pairs.c, pairs.neither
    denom = (a + b) * (c + d) * (a + c) * (b + d)
    phi = (a * d - b * c) / math.sqrt(denom) if denom > 0 else 0.0
    diff = p1 - p2
    lo = diff - math.sqrt(max(0.0, (p1 - l1) ** 2 - 2 * phi * (p1 - l1) * (u2 - p2) + (u2 - p2) ** 2))
    hi = diff + math.sqrt(max(0.0, (u1 - p1) ** 2 - 2 * phi * (u1 - p1) * (p2 - l2) + (p2 - l2) ** 2))
    return lo, hi


def mcnemar_exact(b: int, c: int) -> float:
    """Two-sided exact McNemar p-value: ``min(1, 2 P(X >= max(b, c)))``, ``X ~ Bin(b + c, 1/2)``."""
    if b < 0 or c < 0:
        raise ValueError("discordant counts must be non-negative")
    n = b + c
    if n == 0:
        raise ValueError("McNemar test undefined without discordant pairs")
    m = max(b, c)
    tail = Fraction(sum(math.comb(n, k) for k in range(m, n + 1)), 2**n)
    return float(min(Fraction(1), 2 * tail))


def percent(x: float | Fraction, places: int = 2) -> str:
    """Proportion rendered as a percentage, round-half-even on the exact value."""
    if isinstance(x, Fraction):
        value = Decimal(x.numerator) * 100 / Decimal(x.denominator)
    else:
        value = Decimal(x) * 100
    return str(value.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_EVEN))


def percent_of(k: int, n: int, places: int = 2) -> str:
    return percent(Fraction(k, n), places) if n else "nan"


@dataclass
class GroupCounts:
    questions: int = 0
    correct_questions: int = 0
    options: int = 0
    correct_options: int = 0

    def merge(self, other: GroupCounts) -> GroupCounts:
        return GroupCounts(
            self.questions + other.questions,
            self.correct_questions + other.correct_questions,
            self.options + other.options,
            self.correct_options + other.correct_options,
        )


def _options(row: Mapping) -> tuple[int, int]:
    k, n = str(row["correct_options"]).split("/")
    return int(k), int(n)


def aggregate(rows: Iterable[Mapping], key: str = "family") -> dict[str, GroupCounts]:
    """Exact per-group question and option counts from JSONL-shaped rows."""
    out: dict[str, GroupCounts] = {}
    for row in rows:
        g = out.setdefault(str(row[key]), GroupCounts())
        ok, on = _options(row)
        g.questions += 1
        g.correct_questions += int(row["correct_question"])
        g.options += on
        g.correct_options += ok
    return dict(sorted(out.items()))
