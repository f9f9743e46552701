"""Whitney decomposition of the unit square around its diagonal.

Squares are ordered pairs of dyadic intervals at a common level.  All
tests (distance, containment, overlap, area) run on integer (level, index)
data or exact fractions; nothing here touches floating point.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator

from .geometry import DyadicInterval

OFFDIAGONAL = "offdiagonal"
DIAGONAL = "diagonal"


@dataclass(frozen=True, order=True)
class WhitneySquare:
    first: DyadicInterval
    second: DyadicInterval
    kind: str = OFFDIAGONAL

    def __post_init__(self):
        if self.first.level != self.second.level:
            raise ValueError("both sides of a Whitney square share one level")

    @property
    def scale(self) -> int:
        return self.first.level

    @property
    def area(self) -> Fraction:
        return self.first.length * self.second.length

    def index_gap(self) -> int:
        return abs(self.first.index - self.second.index)

    def contained_in(self, other: "WhitneySquare") -> bool:
        return other.first.contains(self.first) and other.second.contains(self.second)

    def overlaps(self, other: "WhitneySquare") -> bool:
        """True iff the open squares intersect."""
        return (_open_overlap(self.first, other.first)
                and _open_overlap(self.second, other.second))

    def record(self) -> dict:
        return {"scale": self.scale, "i": self.first.index,
                "j": self.second.index, "class": self.kind}


def _open_overlap(a: DyadicInterval, b: DyadicInterval) -> bool:
    return a.contains(b) or b.contains(a)


def _check_level(n: int, name: str = "n") -> None:
    if n < 2:
        raise ValueError(f"{name} must be >= 2, got {n}")


def _candidates(n: int) -> Iterator[tuple[int, int]]:
    # 2^n dist(I1, I2) = |i - j| - 1 for distinct intervals at level n
    size = 2**n
    for i in range(size):
        for j in (i - 3, i - 2, i + 2, i + 3):
            if 0 <= j < size:
                yield i, j


def _whitney_levels(N: int) -> list[list[WhitneySquare]]:
    """[W_2, ..., W_N], each built by excluding squares covered at coarser scales."""
    levels: list[list[WhitneySquare]] = []
    covered: set[tuple[int, int, int]] = set()  # (level, i, j) of all earlier squares
    for n in range(2, N + 1):
        current = []
        for i, j in _candidates(n):
            if any((m, i >> (n - m), j >> (n - m)) in covered for m in range(2, n)):
                continue
            current.append(WhitneySquare(DyadicInterval(n, i), DyadicInterval(n, j)))
        covered.update((n, sq.first.index, sq.second.index) for sq in current)
        levels.append(current)
    return levels


def whitney_offdiagonal(n: int) -> list[WhitneySquare]:
    """The off-diagonal squares of scale 2^-n (W_1 is empty by convention)."""
    _check_level(n)
    return _whitney_levels(n)[-1]


def whitney_diagonal(N: int) -> list[WhitneySquare]:
    """Pairs at level N that are equal or adjacent."""
    _check_level(N, "N")
    size = 2**N
    return [WhitneySquare(DyadicInterval(N, i), DyadicInterval(N, j), DIAGONAL)
            for i in range(size) for j in range(size) if abs(i - j) <= 1]


def whitney_cover(N: int) -> list[WhitneySquare]:
    _check_level(N, "N")
    squares = [sq for level in _whitney_levels(N) for sq in level]
    return squares + whitney_diagonal(N)


def cover_area(squares: Iterable[WhitneySquare]) -> Fraction:
    return sum((sq.area for sq in squares), Fraction(0))


def find_overlap(squares: list[WhitneySquare]) -> tuple[WhitneySquare, WhitneySquare] | None:
    """First pair of squares with intersecting interiors, or None.

    Squares are bucketed by their coarsest-level ancestor cell so the check
    is near-linear instead of quadratic; any two overlapping dyadic squares
    share the ancestor cell at the coarser of their two levels.
    """
    by_cell: dict[tuple[int, int, int], list[WhitneySquare]] = {}
    for sq in squares:
        by_cell.setdefault((sq.scale, sq.first.index, sq.second.index), []).append(sq)
    for cell, members in by_cell.items():
        if len(members) > 1:
            return members[0], members[1]
    for sq in squares:
        n = sq.scale
        for m in range(0, n):
            key = (m, sq.first.index >> (n - m), sq.second.index >> (n - m))
            if key in by_cell:
                return by_cell[key][0], sq
    return None


def find_overlap_bruteforce(squares: list[WhitneySquare]) -> tuple[WhitneySquare, WhitneySquare] | None:
    for a in range(len(squares)):
        for b in range(a + 1, len(squares)):
            if squares[a].overlaps(squares[b]):
                return squares[a], squares[b]
    return None


def _occurrences(squares: Iterable[WhitneySquare]) -> Counter:
    # an interval counts once per coordinate it occupies
    counts: Counter = Counter()
    for sq in squares:
        counts[sq.first] += 1
        counts[sq.second] += 1
    return counts


@dataclass(frozen=True)
class MultiplicityReport:
    N: int
    max_diag: int
    max_offdiag: dict[int, int]
    diag_counts: dict[DyadicInterval, int]

    def within_bounds(self, diag_bound: int = 6, offdiag_bound: int = 8) -> bool:
        return (self.max_diag <= diag_bound
                and all(v <= offdiag_bound for v in self.max_offdiag.values()))


def multiplicity_report(N: int) -> MultiplicityReport:
    """How often each interval appears in the diagonal and in each off-diagonal class."""
    _check_level(N, "N")
    diag = _occurrences(whitney_diagonal(N))
    offdiag = {}
    for n, level in enumerate(_whitney_levels(N), start=2):
        occ = _occurrences(level)
        offdiag[n] = max(occ.values(), default=0)
    return MultiplicityReport(N, max(diag.values()), offdiag, dict(diag))


def write_jsonl(squares: Iterable[WhitneySquare], handle) -> int:
    count = 0
    for sq in squares:
        handle.write(json.dumps(sq.record(), sort_keys=True) + "\n")
        count += 1
    return count
