"""Periodic probes of the decoupling inequalities.

On the torus [0,1]^k the Weyl sum f(x) = sum_n a_n e(n x_1 + ... + n^k x_k)
is a sum of one character per arc of length 1/N.  Each character has
L^p norm |a_n|, so

    D = ||f||_{p_k} / (sum |a_n|^2)^(1/2),   p_k = k(k+1),

is a lower-bound witness for the periodic analogue of the decoupling
constant at delta = 1/N.  Everything here is that single-frequency model,
not the Fourier-supported setting on R^k.

Even moments are computed exactly, either on a tensor grid fine enough to
integrate the trigonometric polynomial |f|^2s without aliasing, or through
the power-sum histogram of the counting module.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from . import counting
from .errors import ResourceBudgetError
from .geometry import DyadicInterval

DEFAULT_GRID_BUDGET = 20_000_000
_CHUNK_ELEMENTS = 1 << 22

MODEL_LABEL = "periodic single-frequency analogue (delta = 1/N)"


def e(t):
    return np.exp(2j * np.pi * t)


@dataclass(frozen=True)
class WeightSequence:
    """Complex coefficients a_1, ..., a_N (stored 0-based)."""

    a: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.a, dtype=np.complex128).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "a", arr)

    @property
    def N(self) -> int:
        return len(self.a)

    @classmethod
    def unit(cls, N: int) -> "WeightSequence":
        return cls(np.ones(N))

    @classmethod
    def random_phases(cls, N: int, seed: int) -> "WeightSequence":
        """Unimodular a_n = e(theta_n), theta_n uniform, from numpy's PCG64 seeded by ``seed``."""
        rng = np.random.default_rng(seed)
        return cls(e(rng.random(N)))

    @classmethod
    def single(cls, N: int, n0: int, value: complex = 1.0) -> "WeightSequence":
        a = np.zeros(N, dtype=np.complex128)
        a[n0 - 1] = value
        return cls(a)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.a) ** 2)))

    def is_unit(self) -> bool:
        return bool(np.all(self.a == 1))

    def modulated(self, theta: Sequence[float]) -> "WeightSequence":
        """a_n e(n theta_1 + ... + n^k theta_k): translation of f on the torus."""
        n = np.arange(1, self.N + 1, dtype=float)
        phase = sum(n ** (j + 1) * t for j, t in enumerate(theta))
        return WeightSequence(self.a * e(phase))

    def restricted(self, mask: np.ndarray) -> "WeightSequence":
        return WeightSequence(np.where(mask, self.a, 0))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "re", "im"])
            for n, z in enumerate(self.a, start=1):
                writer.writerow([n, repr(float(z.real)), repr(float(z.imag))])

    @classmethod
    def from_csv(cls, path) -> "WeightSequence":
        rows = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                rows[int(row["n"])] = complex(float(row["re"]), float(row["im"]))
        N = max(rows, default=0)
        if sorted(rows) != list(range(1, N + 1)):
            raise ValueError(f"{path}: rows must cover n = 1..{N} exactly once")
        return cls(np.array([rows[n] for n in range(1, N + 1)]))


@dataclass
class RatioReport:
    k: int
    N: int
    p: int
    value: float
    grid: list[int]
    converged: bool
    estimate_error: float
    seed: int | None = None
    extras: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"k": self.k, "N": self.N, "p": self.p, "value": self.value,
               "grid": list(self.grid), "converged": self.converged,
               "estimate_error": self.estimate_error, "seed": self.seed,
               "model": MODEL_LABEL}
        out.update(self.extras)
        return out


def eval_weyl_sum(k: int, w: WeightSequence, x):
    """f(x) = sum_n a_n e(n x_1 + ... + n^k x_k); x of shape (k,) or (..., k)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != k:
        raise ValueError(f"points must have {k} coordinates")
    n = np.arange(1, w.N + 1, dtype=float)
    powers = np.stack([n ** (j + 1) for j in range(k)])  # (k, N)
    phase = x @ powers
    vals = e(phase) @ w.a
    return complex(vals) if np.ndim(vals) == 0 else vals


def _characters(N: int, j: int, M: int) -> np.ndarray:
    """e(n^j m / M) for n = 1..N, m = 0..M-1, reduced mod M in integers."""
    n = np.arange(1, N + 1, dtype=object)
    nj = np.array([int(v) ** j % M for v in n], dtype=np.int64)
    m = np.arange(M, dtype=np.int64)
    return np.exp(2j * np.pi * ((nj[:, None] * m[None, :]) % M) / M)


def grid_chunks(k: int, weights: np.ndarray, M: Sequence[int]) -> Iterator[np.ndarray]:
    """Values of several Weyl sums on the grid prod_j {m / M_j}, in fixed-order chunks.

    ``weights`` has shape (W, N); each yielded array has shape (W, points).
    """
    weights = np.atleast_2d(np.asarray(weights, dtype=np.complex128))
    W, N = weights.shape
    head = weights[:, :, None] * _characters(N, 1, M[0])[None]  # (W, N, M1)
    tails = [_characters(N, j + 1, M[j]) for j in range(1, k)]
    tail_shape = tuple(M[1:])
    tail_size = math.prod(tail_shape)
    step = max(1, _CHUNK_ELEMENTS // (W * M[0]))
    for lo in range(0, tail_size, step):
        idx = np.arange(lo, min(lo + step, tail_size))
        T = np.ones((N, len(idx)), dtype=np.complex128)
        if tails:
            for E, m in zip(tails, np.unravel_index(idx, tail_shape)):
                T *= E[:, m]
        yield np.einsum("wnm,nt->wmt", head, T).reshape(W, -1)


def exact_grid(k: int, s: int, N: int) -> list[int]:
    """Points per coordinate that integrate |f|^2s exactly: 2 s N^j + 1."""
    return [2 * s * N ** (j + 1) + 1 for j in range(k)]


def _quadrature_moment(k: int, s: int, a: np.ndarray, M: Sequence[int]) -> float:
    parts = [float(np.sum(np.abs(f[0]) ** (2 * s))) for f in grid_chunks(k, a, M)]
    return math.fsum(parts) / math.prod(M)


def exact_moment(k: int, s: int, w: WeightSequence, method: str = "auto",
                 grid_budget: int = DEFAULT_GRID_BUDGET, budget: int | None = None) -> float:
    """Integral of |f|^2s over [0,1]^k.

    "quadrature" uses the aliasing-free tensor grid; "histogram" uses
    sum_v |R(v)|^2 from the power-sum histogram (exact integers for unit
    weights).  "auto" takes quadrature when the grid fits ``grid_budget``.
    """
    if s < 1:
        raise ValueError(f"s must be >= 1, got {s}")
    M = exact_grid(k, s, w.N)
    size = math.prod(M)
    if method == "auto":
        method = "quadrature" if size <= grid_budget else "histogram"
    if method == "quadrature":
        if size > grid_budget:
            raise ResourceBudgetError(
                "quadrature grid too large; use method='histogram'",
                attempted=size, budget=grid_budget)
        return _quadrature_moment(k, s, w.a, M)
    if method == "histogram":
        if w.is_unit():
            return float(counting.vinogradov_count(w.N, s, k, budget).J)
        return counting.weighted_moment(w.N, s, k, w.a, budget)
    raise ValueError(f"unknown method {method!r}")


def decoupling_ratio(k: int, w: WeightSequence, method: str = "auto",
                     grid_budget: int = DEFAULT_GRID_BUDGET,
                     budget: int | None = None, seed: int | None = None) -> RatioReport:
    p = k * (k + 1)
    norm = w.l2_norm()
    if norm == 0:
        raise ValueError("decoupling ratio undefined for zero weights")
    M = exact_grid(k, p // 2, w.N)
    if method == "auto":
        method = "quadrature" if math.prod(M) <= grid_budget else "histogram"
    moment = exact_moment(k, p // 2, w, method, grid_budget, budget)
    return RatioReport(k, w.N, p, moment ** (1 / p) / norm,
                       M if method == "quadrature" else [], True, 0.0, seed,
                       {"method": method})


@dataclass(frozen=True)
class GrowthReport:
    k: int
    weight_mode: str
    seed: int | None
    values: list[tuple[int, float]]
    slope: float


def growth_exponent(k: int, N_list: Sequence[int], weight_mode: str = "unit",
                    seed: int = 0, budget: int | None = None) -> GrowthReport:
    """Least-squares slope of log D(N) against log N.

    In "random" mode the weights for each N are drawn with seed (seed, N).
    """
    if len(N_list) < 3:
        raise ValueError("need at least 3 values of N")
    if list(N_list) != sorted(N_list):
        raise ValueError("N_list must be ascending")
    values = []
    for N in N_list:
        if weight_mode == "unit":
            w = WeightSequence.unit(N)
        elif weight_mode == "random":
            w = WeightSequence.random_phases(N, [seed, N])
        else:
            raise ValueError(f"unknown weight mode {weight_mode!r}")
        # unit weights go through exact integer counts
        report = decoupling_ratio(k, w, "histogram", budget=budget)
        values.append((N, report.value))
    x = np.log([v[0] for v in values])
    y = np.log([v[1] for v in values])
    slope = 0.0 if np.ptp(y) == 0 else float(np.polyfit(x, y, 1)[0])
    return GrowthReport(k, weight_mode, seed if weight_mode == "random" else None,
                        values, slope)


def arc_index(n: int, N: int, level: int) -> int:
    """Index of the level-``level`` dyadic arc containing n/N; right endpoints go left."""
    return -(-n * 2**level // N) - 1


def arc_weights(w: WeightSequence, arc: DyadicInterval) -> WeightSequence:
    n = np.arange(1, w.N + 1)
    mask = np.array([arc_index(int(m), w.N, arc.level) == arc.index for m in n])
    return w.restricted(mask)


def _check_bilinear_pair(I: DyadicInterval, Ip: DyadicInterval) -> None:
    if I.level != 2 or Ip.level != 2:
        raise ValueError("bilinear intervals must have length 1/4")
    if I.dist(Ip) < Fraction(1, 4):
        raise ValueError(f"dist({I}, {Ip}) = {I.dist(Ip)} < 1/4")


def _bilinear_mean(k: int, pair: np.ndarray, M: Sequence[int], half: int) -> float:
    parts = [float(np.sum((np.abs(f[0]) * np.abs(f[1])) ** half))
             for f in grid_chunks(k, pair, M)]
    return math.fsum(parts) / math.prod(M)


def bilinear_ratio(k: int, N: int, I: DyadicInterval, Ip: DyadicInterval,
                   w: WeightSequence, rel_tol: float = 1e-3, max_doublings: int = 6,
                   grid_budget: int = DEFAULT_GRID_BUDGET,
                   seed: int | None = None) -> RatioReport:
    """Normalised integral of |f_I|^(p/2) |f_I'|^(p/2) over the torus.

    value = int |f_I|^(p/2) |f_I'|^(p/2) / (||a_I||_2 ||a_I'||_2)^(p/2).
    The integrand is not a trigonometric polynomial when p/2 is odd, so it
    is integrated by Riemann sums on grids doubled until the relative change
    drops below ``rel_tol``.  ``extras['ceiling']`` holds the Cauchy-Schwarz
    bound D_I^(p/2) D_I'^(p/2) from exact moments.
    """
    if w.N != N:
        raise ValueError(f"weights have length {w.N}, expected N={N}")
    _check_bilinear_pair(I, Ip)
    p = k * (k + 1)
    half = p // 2
    wI, wIp = arc_weights(w, I), arc_weights(w, Ip)
    nI, nIp = wI.l2_norm(), wIp.l2_norm()
    if nI == 0 or nIp == 0:
        return RatioReport(k, N, p, 0.0, [], True, 0.0, seed, {"ceiling": 0.0})
    scale = (nI * nIp) ** half
    ceiling = math.sqrt(exact_moment(k, half, wI) * exact_moment(k, half, wIp)) / scale

    pair = np.vstack([wI.a, wIp.a])
    M = [p * N ** (j + 1) for j in range(k)]
    if math.prod(M) > grid_budget:
        raise ResourceBudgetError("initial bilinear grid exceeds budget",
                                  attempted=math.prod(M), budget=grid_budget)
    estimate = _bilinear_mean(k, pair, M, half) / scale
    change = math.inf
    converged = False
    for _ in range(max_doublings):
        finer = [2 * m for m in M]
        if math.prod(finer) > grid_budget:
            break
        new = _bilinear_mean(k, pair, finer, half) / scale
        change, estimate, M = abs(new - estimate), new, finer
        if change <= rel_tol * abs(estimate):
            converged = True
            break
    return RatioReport(k, N, p, estimate, M, converged, change, seed,
                       {"ceiling": ceiling})
