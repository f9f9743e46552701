"""Exponent bookkeeping for the bilinear bootstrap, in exact rationals.

The slopes A_1, ..., A_{k-1} satisfy the linear inequalities

    A_l >= (1/l) A_{k-l} + ((k-l)/(k-l+1)) A_{l-1},   1 <= l <= k-1,

with A_0 = eta.  Written as a >= M a + c eta, every column of M sums to
one, so summing the rows cancels all A_l and leaves 0 >= ((k-1)/k) eta.
Nothing in this module uses floating point.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


def critical_exponent(k: int) -> int:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return k * (k + 1)


def _exponent(l: int) -> int:
    # p_0 = 0 is allowed here (the l = 0 endpoint of the Hoelder interpolation)
    return l * (l + 1)


def _check_split(k: int, l: int) -> None:
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if not 1 <= l <= k - 1:
        raise ValueError(f"l must lie in [1, {k - 1}], got {l}")


@dataclass(frozen=True)
class HolderCheck:
    theta: Fraction
    residual: tuple[Fraction, Fraction]
    sums: tuple[int, int, int]

    @property
    def ok(self) -> bool:
        return self.residual == (0, 0)


def holder_check(k: int, l: int) -> HolderCheck:
    """theta_l together with the exact residual of the collinearity identity.

    (p_l, p_k - p_l) = theta (p_k - p_{k-l}, p_{k-l}) + (1 - theta)(p_{l-1}, p_k - p_{l-1})
    """
    _check_split(k, l)
    pk = _exponent(k)
    theta = Fraction(1, k - l + 1)
    target = (_exponent(l), pk - _exponent(l))
    left = (pk - _exponent(k - l), _exponent(k - l))
    right = (_exponent(l - 1), pk - _exponent(l - 1))
    residual = tuple(t - (theta * a + (1 - theta) * b)
                     for t, a, b in zip(target, left, right))
    return HolderCheck(theta, residual, (sum(target), sum(left), sum(right)))


def holder_theta(k: int, l: int) -> Fraction:
    """theta_l = 1/(k-l+1); raises if the collinearity identity fails."""
    check = holder_check(k, l)
    pk = critical_exponent(k)
    if not check.ok or any(s != pk for s in check.sums):
        raise ArithmeticError(f"collinearity fails for k={k}, l={l}: {check}")
    return check.theta


@dataclass(frozen=True)
class ExponentSystem:
    """a >= M a + c eta for a = (A_1, ..., A_{k-1})."""

    k: int
    M: tuple[tuple[Fraction, ...], ...]
    c: tuple[Fraction, ...]

    def column_sums(self) -> tuple[Fraction, ...]:
        n = self.k - 1
        return tuple(sum((self.M[r][col] for r in range(n)), Fraction(0)) for col in range(n))

    def left_apply(self, u) -> tuple[Fraction, ...]:
        """u^T M."""
        n = self.k - 1
        return tuple(sum((u[r] * self.M[r][col] for r in range(n)), Fraction(0))
                     for col in range(n))

    def residual(self, a, eta) -> tuple[Fraction, ...]:
        """a - M a - c eta; a solution of the system has every entry >= 0."""
        n = self.k - 1
        return tuple(a[r] - sum((self.M[r][j] * a[j] for j in range(n)), Fraction(0))
                     - self.c[r] * eta for r in range(n))

    def to_json(self) -> dict:
        return {"k": self.k,
                "M": [[str(x) for x in row] for row in self.M],
                "c": [str(x) for x in self.c]}


def build_system(k: int) -> ExponentSystem:
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    n = k - 1
    M = [[Fraction(0)] * n for _ in range(n)]
    c = [Fraction(0)] * n
    for l in range(1, k):
        M[l - 1][k - l - 1] += Fraction(1, l)
        coef = Fraction(k - l, k - l + 1)
        if l == 1:
            c[0] += coef  # A_0 = eta
        else:
            M[l - 1][l - 2] += coef
    return ExponentSystem(k, tuple(map(tuple, M)), tuple(c))


@dataclass(frozen=True)
class CancellationResult:
    k: int
    left_vector_ok: bool
    eta_coefficient: Fraction

    @property
    def eta_forced_nonpositive(self) -> bool:
        # summing a >= M a + c eta with 1^T M = 1^T leaves 0 >= (1^T c) eta
        return self.left_vector_ok and self.eta_coefficient > 0

    def to_json(self) -> dict:
        return {"k": self.k, "left_vector_ok": self.left_vector_ok,
                "eta_coefficient": str(self.eta_coefficient)}


def verify_cancellation(k: int) -> CancellationResult:
    system = build_system(k)
    ones = (Fraction(1),) * (k - 1)
    ok = system.left_apply(ones) == ones
    return CancellationResult(k, ok, sum(system.c, Fraction(0)))


def deduced_eta(k: int) -> Fraction:
    """eta implied by the verified cancellation together with eta >= 0."""
    result = verify_cancellation(k)
    if not result.eta_forced_nonpositive:
        raise ArithmeticError(f"cancellation does not close for k={k}")
    return Fraction(0)


@dataclass(frozen=True)
class SlopeBound:
    """A_l(b) <= eta - eta b sigma_l."""

    l: int
    b: Fraction
    coefficient: Fraction

    def bound(self, eta) -> Fraction:
        return Fraction(eta) * (1 - self.b * self.coefficient)


def finiteness_slope(k: int, l: int) -> Fraction:
    """sigma_l = (k-l+1) p_l / (l p_k) + (p_k - p_l) / p_k."""
    _check_split(k, l)
    pk, pl = critical_exponent(k), _exponent(l)
    sigma = Fraction((k - l + 1) * pl, l * pk) + Fraction(pk - pl, pk)
    if sigma <= 0:
        raise ArithmeticError(f"nonpositive slope for k={k}, l={l}")
    return sigma


def slope_bound(k: int, l: int, b) -> SlopeBound:
    return SlopeBound(l, Fraction(b), finiteness_slope(k, l))


def eta_upper_bound(C, b, slope_value) -> Fraction:
    """eta <= C b + A_l(b); C must be supplied, nothing fixes it."""
    return Fraction(C) * Fraction(b) + Fraction(slope_value)


def validity_range(k: int, l: int) -> Fraction:
    """Largest b for which the lower-degree step applies at split l."""
    _check_split(k, l)
    bound = Fraction(l * (k - l), (l + 1) * (k - l + 1))
    if l >= 2:
        bound = min(bound, Fraction(l - 1, k - l + 2))
    return bound


def a0_line(b) -> tuple[Fraction, Fraction]:
    """A_0(b) = 0 + (1 - b) eta, returned as (constant, eta coefficient)."""
    b = Fraction(b)
    if not 0 <= b <= 1:
        raise ValueError(f"b must lie in [0, 1], got {b}")
    return Fraction(0), 1 - b
