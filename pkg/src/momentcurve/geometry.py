"""Geometry of the moment curve Gamma(xi) = (xi, xi^2, ..., xi^k).

Dyadic intervals, caps around the curve, their polar boxes and bump
functions, the affine maps that rescale the curve onto a subinterval,
wedge volumes and the transversality of osculating spaces.

Float paths are intended for k <= 8.  Identities that suffer from
cancellation at small scales (cap rescaling) are evaluated in exact
rational arithmetic.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

# tolerance for detecting linearly dependent spanning vectors
DEPENDENCE_TOL = 1e-12


@dataclass(frozen=True, order=True)
class DyadicInterval:
    """The interval [j 2^-n, (j+1) 2^-n] inside [0, 1]."""

    level: int
    index: int

    def __post_init__(self):
        if self.level < 0:
            raise ValueError(f"level must be nonnegative, got {self.level}")
        if not 0 <= self.index < 2**self.level:
            raise ValueError(
                f"index {self.index} out of range for level {self.level}")

    @classmethod
    def unit(cls) -> "DyadicInterval":
        return cls(0, 0)

    @property
    def length(self) -> Fraction:
        return Fraction(1, 2**self.level)

    @property
    def left(self) -> Fraction:
        return Fraction(self.index, 2**self.level)

    @property
    def right(self) -> Fraction:
        return Fraction(self.index + 1, 2**self.level)

    @property
    def center(self) -> Fraction:
        return Fraction(2 * self.index + 1, 2 ** (self.level + 1))

    def ancestor(self, level: int) -> "DyadicInterval":
        if level > self.level:
            raise ValueError("ancestor level must not exceed own level")
        return DyadicInterval(level, self.index >> (self.level - level))

    def contains(self, other: "DyadicInterval") -> bool:
        """Dyadic ancestry test: True iff ``other`` is a subinterval of self."""
        return (other.level >= self.level
                and other.ancestor(self.level) == self)

    def children(self) -> tuple["DyadicInterval", "DyadicInterval"]:
        return (DyadicInterval(self.level + 1, 2 * self.index),
                DyadicInterval(self.level + 1, 2 * self.index + 1))

    def dist(self, other: "DyadicInterval") -> Fraction:
        """Gap between the two closed intervals (0 if they touch)."""
        gap = max(other.left - self.right, self.left - other.right)
        return max(gap, Fraction(0))

    def rescaled_in(self, outer: "DyadicInterval") -> "DyadicInterval":
        """The interval (self - a) / kappa where outer = [a, a + kappa]."""
        if not outer.contains(self):
            raise ValueError(f"{self} is not contained in {outer}")
        shift = self.level - outer.level
        return DyadicInterval(shift, self.index - (outer.index << shift))

    def __str__(self):
        return f"[{self.left}, {self.right}]"


def _check_degree(k: int) -> None:
    if k < 1:
        raise ValueError(f"degree k must be >= 1, got {k}")


def _derivative_entries(k: int, i: int, xi):
    # generic over float / Fraction; i = 0 gives the curve itself
    out = []
    for j in range(1, k + 1):
        if j < i:
            out.append(0 * xi)
        else:
            out.append(math.perm(j, i) * xi ** (j - i))
    return out


def moment_curve(k: int, xi: float) -> np.ndarray:
    _check_degree(k)
    return np.array(_derivative_entries(k, 0, xi), dtype=float)


def curve_derivative(k: int, i: int, xi: float) -> np.ndarray:
    """i-th derivative of the moment curve at xi, 1 <= i <= k."""
    _check_degree(k)
    if not 1 <= i <= k:
        raise ValueError(f"derivative order must lie in [1, {k}], got {i}")
    return np.array(_derivative_entries(k, i, xi), dtype=float)


def derivative_matrix(k: int, xi: float, orders: int | None = None) -> np.ndarray:
    """Rows are the derivatives of orders 1..orders (default k) at xi."""
    orders = k if orders is None else orders
    return np.array([_derivative_entries(k, i, xi) for i in range(1, orders + 1)],
                     dtype=float).reshape(orders, k)


def _level_for(delta: Fraction) -> int:
    # smallest n with 2^-n <= delta
    n = 0
    while Fraction(1, 2**n) > delta:
        n += 1
    return n


def dyadic_partition(interval: DyadicInterval, delta) -> list[DyadicInterval]:
    """All dyadic subintervals of ``interval`` of length 2^-ceil(log2(1/delta))."""
    delta = Fraction(delta)
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    if delta > interval.length:
        raise ValueError(f"delta={delta} exceeds |I|={interval.length}")
    n = _level_for(delta)
    shift = n - interval.level
    first = interval.index << shift
    return [DyadicInterval(n, j) for j in range(first, first + 2**shift)]


@dataclass(frozen=True)
class Parallelepiped:
    """center + sum_i t_i * axes[i] with |t_i| <= half_widths[i]."""

    center: np.ndarray
    axes: np.ndarray
    half_widths: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        return abs(np.linalg.det(self.axes)) * float(np.prod(2 * self.half_widths))

    def coordinates(self, x) -> np.ndarray:
        """Coefficients t with x = center + t @ axes (x may be batched)."""
        x = np.asarray(x, dtype=float)
        return np.linalg.solve(self.axes.T, (x - self.center).T).T

    def gauge(self, x) -> np.ndarray:
        """Smallest t >= 0 with x in center + t*(self - center)."""
        t = self.coordinates(x)
        return np.max(np.abs(t) / self.half_widths, axis=-1)

    def contains(self, x, scale: float = 1.0) -> bool:
        """Membership in the dilate ``scale * self`` (same center)."""
        return bool(np.all(self.gauge(x) <= scale * (1 + 1e-12)))

    def vertices(self) -> np.ndarray:
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=self.dim)))
        return self.center + (signs * self.half_widths) @ self.axes


def cap(J: DyadicInterval, k: int) -> Parallelepiped:
    _check_degree(k)
    c = float(J.center)
    length = float(J.length)
    return Parallelepiped(
        center=moment_curve(k, c),
        axes=derivative_matrix(k, c),
        half_widths=np.array([length**i for i in range(1, k + 1)]),
    )


def cap_volume(J: DyadicInterval, k: int) -> float:
    """Closed form 2^k |J|^(k(k+1)/2) prod_{i<=k} i!."""
    return (2**k * float(J.length) ** (k * (k + 1) // 2)
            * math.prod(math.factorial(i) for i in range(1, k + 1)))


def polar_box(I: DyadicInterval, k: int) -> Parallelepiped:
    """{x : |<x, d^i Gamma(c_I)>| <= |I|^-i for all i}, as a parallelepiped."""
    D = derivative_matrix(k, float(I.center))
    length = float(I.length)
    return Parallelepiped(
        center=np.zeros(k),
        axes=np.linalg.inv(D).T,
        half_widths=np.array([length ** (-i) for i in range(1, k + 1)]),
    )


def polar_box_volume(I: DyadicInterval, k: int) -> float:
    return (2**k * float(I.length) ** (-(k * (k + 1) // 2))
            / math.prod(math.factorial(i) for i in range(1, k + 1)))


def polar_box_gauge(I: DyadicInterval, k: int, x) -> np.ndarray | float:
    """max_i |<x, d^i Gamma(c_I)>| |I|^i; x lies in the polar box iff this is <= 1.

    ``x`` may be a single k-vector or an array of shape (..., k).
    """
    D = derivative_matrix(k, float(I.center))
    scales = np.array([float(I.length) ** i for i in range(1, k + 1)])
    g = np.max(np.abs(np.asarray(x, dtype=float) @ D.T) * scales, axis=-1)
    return float(g) if np.ndim(g) == 0 else g


def bump(I: DyadicInterval, k: int, x) -> np.ndarray | float:
    """L^1-normalised bump adapted to the polar box, with decay exponent 10k."""
    g = np.maximum(1.0, polar_box_gauge(I, k, x))
    val = g ** (-10.0 * k) / polar_box_volume(I, k)
    return float(val) if np.ndim(val) == 0 else val


def bump_profile_mass(k: int, radius: float = math.inf) -> float:
    """Exact integral of the bump over {gauge <= radius}.

    Integrating the radial profile min(1, r^-10k) against the gauge-ball
    volume k r^(k-1) dr gives 1 + (1 - radius^(-9k)) / 9.
    """
    tail = 1.0 if math.isinf(radius) else 1.0 - radius ** (-9.0 * k)
    if radius < 1:
        return radius**k
    return 1.0 + tail / 9.0


def bump_mass(I: DyadicInterval, k: int, box_scale: float = 8.0,
              points: int = 64) -> float:
    """Midpoint-rule integral of the bump over ``box_scale`` times the polar box.

    The tensor grid lives in the box's own coordinates y_i = <x, d^i Gamma> |I|^i,
    mapped back to x before calling :func:`bump`.
    """
    D = derivative_matrix(k, float(I.center))
    scales = np.array([float(I.length) ** i for i in range(1, k + 1)])
    L = D * scales[:, None]  # y = L x
    Linv = np.linalg.inv(L)
    h = 2 * box_scale / points
    nodes = -box_scale + h * (np.arange(points) + 0.5)
    total = 0.0
    # one slab per value of the first coordinate keeps memory at points^(k-1)
    rest = np.array(list(itertools.product(nodes, repeat=k - 1)), dtype=float)
    rest = rest.reshape(points ** (k - 1), k - 1)
    for y0 in nodes:
        y = np.column_stack([np.full(len(rest), y0), rest])
        total += math.fsum(bump(I, k, y @ Linv.T).ravel())
    return total * h**k / abs(np.linalg.det(L))


@dataclass(frozen=True)
class AffineMap:
    linear: np.ndarray
    translation: np.ndarray

    def __call__(self, eta) -> np.ndarray:
        return np.asarray(eta) @ self.linear.T + self.translation

    def inverse(self) -> "AffineMap":
        inv = np.linalg.inv(self.linear)
        return AffineMap(inv, -inv @ self.translation)


def _affine_coefficients(a, kappa, k: int):
    """Lower-triangular linear part and translation of the rescaling map."""
    zero = 0 * a
    linear = [[zero] * k for _ in range(k)]
    translation = [a**j for j in range(1, k + 1)]
    for j in range(1, k + 1):
        for jp in range(1, j + 1):
            linear[j - 1][jp - 1] = math.comb(j, jp) * a ** (j - jp) * kappa**jp
    return linear, translation


def affine_map(I: DyadicInterval, k: int) -> AffineMap:
    """The map with A Gamma(t) = Gamma(a + t kappa) for I = [a, a + kappa]."""
    _check_degree(k)
    linear, translation = _affine_coefficients(float(I.left), float(I.length), k)
    return AffineMap(np.array(linear, dtype=float), np.array(translation, dtype=float))


def _exact_cap_vertices(J: DyadicInterval, k: int) -> list[list[Fraction]]:
    c, length = J.center, J.length
    center = _derivative_entries(k, 0, c)
    axes = [_derivative_entries(k, i, c) for i in range(1, k + 1)]
    verts = []
    for signs in itertools.product((-1, 1), repeat=k):
        v = list(center)
        for i, sgn in enumerate(signs):
            w = sgn * length ** (i + 1)
            for j in range(k):
                v[j] += w * axes[i][j]
        verts.append(v)
    return verts


def _solve_lower(L, rhs):
    x = []
    for j in range(len(rhs)):
        acc = rhs[j] - sum(L[j][m] * x[m] for m in range(j))
        x.append(acc / L[j][j])
    return x


def verify_cap_rescaling(I: DyadicInterval, J: DyadicInterval, k: int) -> float:
    """Max vertex distance between A_I^-1(cap J) and cap(J rescaled into I).

    Computed in exact rationals (dyadic endpoints make every quantity
    rational), so a correct identity yields 0.0.  Vertices are matched by
    their sign pattern.
    """
    if not I.contains(J):
        raise ValueError(f"{J} is not contained in {I}")
    _check_degree(k)
    linear, translation = _affine_coefficients(I.left, I.length, k)
    mapped = [_solve_lower(linear, [v[j] - translation[j] for j in range(k)])
              for v in _exact_cap_vertices(J, k)]
    target = _exact_cap_vertices(J.rescaled_in(I), k)
    worst = Fraction(0)
    for u, v in zip(mapped, target):
        worst = max(worst, sum((a - b) ** 2 for a, b in zip(u, v)))
    return math.sqrt(worst)


def wedge_volume(vectors: Sequence[Sequence[float]]) -> float:
    """|v_1 ^ ... ^ v_m|, the m-dimensional volume spanned by the vectors."""
    V = np.asarray(vectors, dtype=float)
    if V.ndim != 2 or V.shape[0] == 0:
        raise ValueError("wedge_volume needs a nonempty list of vectors")
    m, k = V.shape
    if m > k:
        raise ValueError(f"{m} vectors in R^{k} always have zero wedge")
    if m == k:
        return abs(float(np.linalg.det(V)))
    # |prod diag R| of a QR factorisation equals sqrt(det(V V^T))
    r = np.linalg.qr(V.T, mode="r")
    return float(abs(np.prod(np.diag(r))))


def transversality_constant(k: int, l: int) -> int:
    """C(k, l) * prod_{i<=l} i! * prod_{j<=k-l} j!."""
    return (math.comb(k, l)
            * math.prod(math.factorial(i) for i in range(1, l + 1))
            * math.prod(math.factorial(j) for j in range(1, k - l + 1)))


def _check_split(k: int, l: int) -> None:
    _check_degree(k)
    if not 1 <= l <= k - 1:
        raise ValueError(f"split l must lie in [1, {k - 1}], got {l}")


def _exact_det(rows: list[list[Fraction]]) -> Fraction:
    A = [list(r) for r in rows]
    n = len(A)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if A[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            A[c], A[piv] = A[piv], A[c]
            det = -det
        det *= A[c][c]
        for r in range(c + 1, n):
            f = A[r][c] / A[c][c]
            if f:
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return det


def transversality_value(k: int, l: int, xi1: float, xi2: float) -> float:
    """Wedge of the first l derivatives at xi1 with the first k-l at xi2.

    The k x k determinant is evaluated exactly on the (binary-exact) inputs
    and rounded once: near xi1 = xi2 it is a small difference of large
    terms, and a float elimination loses the relative accuracy there.
    """
    _check_split(k, l)
    x1, x2 = Fraction(xi1), Fraction(xi2)
    rows = ([_derivative_entries(k, i, x1) for i in range(1, l + 1)]
            + [_derivative_entries(k, i, x2) for i in range(1, k - l + 1)])
    return float(abs(_exact_det(rows)))


def orthonormal_basis(vectors: Iterable[Sequence[float]],
                      tol: float = DEPENDENCE_TOL) -> np.ndarray:
    """Modified Gram-Schmidt; vectors whose residual norm is below tol are dropped."""
    basis: list[np.ndarray] = []
    for v in vectors:
        w = np.array(v, dtype=float)
        scale = np.linalg.norm(w)
        for q in basis:
            w -= (q @ w) * q
        norm = np.linalg.norm(w)
        if norm > tol * max(scale, 1.0):
            basis.append(w / norm)
    return np.array(basis)


def projected_wedge(k: int, l: int, xi_prime: float, xi: float) -> float:
    """Wedge of d^1..d^l Gamma(xi) projected off the span of d^1..d^(k-l) Gamma(xi')."""
    _check_split(k, l)
    Q = orthonormal_basis(derivative_matrix(k, xi_prime, k - l))
    V = derivative_matrix(k, xi, l)
    P = V - (V @ Q.T) @ Q
    return wedge_volume(P)


def projected_torsion(k: int, l: int, xi_prime: float, xi_grid: Iterable[float]) -> float:
    """Minimum over the grid of :func:`projected_wedge`; 0 if the grid hits xi'."""
    values = [projected_wedge(k, l, xi_prime, xi) for xi in xi_grid]
    if not values:
        raise ValueError("xi_grid is empty")
    return min(values)
