"""Exact checks of three combinatorial facts used in the Poisson limit proofs.

* the multinomial tail mass of compositions with a small part, against the
  Hoeffding majorant ``s * exp(-2 n (1/s - gamma)^2)``;
* sum_p S(k, p) x (x-1) ... (x-p+1) = x^k for Stirling numbers of the second kind;
* rank over Q of a 0/1 matrix with distinct rows, distinct columns and an
  all-ones column is at least ``min(k, floor(log2 j) + 1)``.

All arithmetic is exact (int / Fraction); floats appear only when comparing
with the Hoeffding bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations, product
from typing import Sequence

from .errors import CapacityError, InvalidArgumentError

COMPARE_GUARD = 1e-12
MAX_COLUMN_SETS = 5_000_000


def _as_fraction(gamma) -> Fraction:
    # floats are read by their shortest decimal repr, so 0.3 means 3/10
    if isinstance(gamma, float):
        return Fraction(repr(gamma))
    return Fraction(gamma)


@dataclass(frozen=True)
class TailReport:
    s: int
    gamma: Fraction
    n: int
    tail: Fraction
    complement: Fraction
    hoeffding: float

    @property
    def tail_float(self) -> float:
        return float(self.tail)

    @property
    def within_bound(self) -> bool:
        return self.tail_float <= self.hoeffding + COMPARE_GUARD


def _check_tail_args(s: int, gamma: Fraction, n: int):
    if s < 2 or s > 8:
        raise InvalidArgumentError(f"s must be in [2, 8], got {s}")
    if not 0 < gamma < Fraction(1, s):
        raise InvalidArgumentError(f"gamma must lie in (0, 1/s), got {gamma}")
    if n < 1 or n > 60:
        raise InvalidArgumentError(f"n must be in [1, 60], got {n}")


def count_all_parts_above(s: int, n: int, g: int) -> int:
    """Number of words in {1..s}^n in which every letter occurs more than g times.

    Equals sum over compositions l of n into s parts, all l_j > g, of n!/l!.
    """
    # ways[t]: words of length t over the letters placed so far
    ways = [1] + [0] * n
    for _ in range(s):
        nxt = [0] * (n + 1)
        for t in range(n + 1):
            if ways[t]:
                for m in range(g + 1, n - t + 1):
                    nxt[t + m] += ways[t] * math.comb(t + m, m)
        ways = nxt
    return ways[n]


def multinomial_tail(s: int, gamma, n: int) -> TailReport:
    """Exact multinomial mass of compositions of n into s parts with some l_j/n <= gamma."""
    g_frac = _as_fraction(gamma)
    _check_tail_args(s, g_frac, n)
    g = math.floor(g_frac * n)
    complement = Fraction(count_all_parts_above(s, n, g), s ** n)
    tail = 1 - complement
    return TailReport(s, g_frac, n, tail, complement, hoeffding_bound(s, g_frac, n))


def hoeffding_bound(s: int, gamma, n: int) -> float:
    g = float(_as_fraction(gamma))
    return s * math.exp(-2.0 * n * (1.0 / s - g) ** 2)


def stirling2(k: int, p: int) -> int:
    return _stirling_row(k)[p] if 0 <= p <= k else 0


def _stirling_row(k: int) -> list[int]:
    row = [1]
    for m in range(1, k + 1):
        new = [0] * (m + 1)
        for p in range(1, m + 1):
            new[p] = p * (row[p] if p < len(row) else 0) + row[p - 1]
        row = new
    return row


def falling(x: int, p: int) -> int:
    out = 1
    for i in range(p):
        out *= x - i
    return out


def stirling_identity_check(k: int, x: int) -> bool:
    if not (1 <= k <= 20 and 0 <= x <= 30):
        raise InvalidArgumentError(f"need 1 <= k <= 20 and 0 <= x <= 30, got k={k}, x={x}")
    row = _stirling_row(k)
    return sum(row[p] * falling(x, p) for p in range(1, k + 1)) == x ** k


@dataclass(frozen=True)
class BinaryMatrix:
    rows: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(int(v) for v in r) for r in self.rows)
        if not rows or not rows[0]:
            raise InvalidArgumentError("binary matrix needs k >= 1 and j >= 1")
        if any(len(r) != len(rows[0]) for r in rows):
            raise InvalidArgumentError("ragged rows")
        if any(v not in (0, 1) for r in rows for v in r):
            raise InvalidArgumentError("entries must be 0 or 1")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_columns(cls, columns: Sequence[Sequence[int]]) -> "BinaryMatrix":
        return cls(tuple(zip(*columns)))

    @property
    def k(self) -> int:
        return len(self.rows)

    @property
    def j(self) -> int:
        return len(self.rows[0])

    def transpose(self) -> "BinaryMatrix":
        return BinaryMatrix(tuple(zip(*self.rows)))


def integer_rank(rows: Sequence[Sequence[int]]) -> int:
    """Rank over Q by fraction-free (Bareiss) elimination."""
    a = [list(r) for r in rows]
    if not a:
        return 0
    m, n = len(a), len(a[0])
    rank = 0
    prev = 1
    for col in range(n):
        if rank == m:
            break
        pivot = next((r for r in range(rank, m) if a[r][col] != 0), None)
        if pivot is None:
            continue
        a[rank], a[pivot] = a[pivot], a[rank]
        p = a[rank][col]
        for r in range(rank + 1, m):
            for c in range(col + 1, n):
                a[r][c] = (a[r][c] * p - a[rank][c] * a[r][col]) // prev
            a[r][col] = 0
        prev = p
        rank += 1
    return rank


def binary_rank(a: BinaryMatrix) -> int:
    return integer_rank(a.rows)


@dataclass
class RankReport:
    k_max: int
    j_max: int
    checked: int = 0
    skipped_rows: int = 0
    counterexamples: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.counterexamples


def rank_lemma_bound(k: int, j: int) -> int:
    return min(k, j.bit_length())  # floor(log2 j) + 1


def rank_lemma_check(k_max: int, j_max: int) -> RankReport:
    """Exhaustive check over column sets containing the all-ones column.

    For each k <= k_max, j <= min(j_max, 2^k), enumerate every set of j
    distinct columns of {0,1}^k that contains the all-ones column, keep those
    with distinct rows and compare the rank with the lower bound.
    """
    if k_max < 1 or j_max < 1 or k_max > 5 or j_max > 2 ** k_max:
        raise InvalidArgumentError(f"need 1 <= k_max <= 5 and 1 <= j_max <= 2^k_max")
    total = sum(
        math.comb(2 ** k - 1, j - 1)
        for k in range(1, k_max + 1)
        for j in range(1, min(j_max, 2 ** k) + 1)
    )
    if total > MAX_COLUMN_SETS:
        raise CapacityError(f"{total} column sets exceed the enumeration cap {MAX_COLUMN_SETS}")
    report = RankReport(k_max, j_max)
    for k in range(1, k_max + 1):
        ones = (1,) * k
        others = [c for c in product((0, 1), repeat=k) if c != ones]
        for j in range(1, min(j_max, 2 ** k) + 1):
            bound = rank_lemma_bound(k, j)
            for chosen in combinations(others, j - 1):
                cols = (ones,) + chosen
                rows = tuple(zip(*cols))
                if len(set(rows)) < k:
                    report.skipped_rows += 1
                    continue
                report.checked += 1
                r = integer_rank(rows)
                if r < bound:
                    report.counterexamples.append((k, j, rows, r))
    return report
