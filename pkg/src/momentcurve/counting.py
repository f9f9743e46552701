"""Exact Vinogradov mean values J_{s,k}(N).

J_{s,k}(N) counts 2s-tuples (n, m) in [1, N]^2s with
sum n_i^j = sum m_i^j for j = 1..k.  Grouping s-tuples by their power-sum
vector v gives J = sum_v r(v)^2, where r is the s-fold self-convolution of
the point masses at (n, n^2, ..., n^k).

Histograms are stored as a sorted array of packed integer keys plus an
aligned array of counts.  Keys pack v in mixed radix with v_1 as the most
significant digit, so sorting also groups entries by their first
coordinate; the sliced evaluation of J relies on that.  Keys and counts
fall back to Python integers (object arrays) whenever int64 could overflow.
"""

from __future__ import annotations

import itertools
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ResourceBudgetError

INT64_MAX = 2**63 - 1

DEFAULT_SUPPORT_BUDGET = 40_000_000
DEFAULT_BRUTE_BUDGET = 10_000_000
_BRUTE_CHUNK = 1 << 21


def support_budget() -> int:
    """Max number of histogram entries materialised at once (env override)."""
    return int(os.environ.get("MOMENTCURVE_BUDGET", DEFAULT_SUPPORT_BUDGET))


def power_sum_vector(values: Sequence[int], k: int, N: int | None = None) -> tuple[int, ...]:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if N is not None:
        for n in values:
            if not 1 <= n <= N:
                raise ValueError(f"entry {n} outside [1, {N}]")
    return tuple(sum(n**j for n in values) for j in range(1, k + 1))


@dataclass(frozen=True)
class KeyPacking:
    """Mixed-radix packing of power-sum vectors of s-tuples from [1, N]."""

    N: int
    s: int
    k: int
    bases: tuple[int, ...] = field(init=False)
    weights: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        bases = tuple(self.s * self.N**j + 1 for j in range(1, self.k + 1))
        weights = []
        w = 1
        for b in reversed(bases):
            weights.append(w)
            w *= b
        object.__setattr__(self, "bases", bases)
        object.__setattr__(self, "weights", tuple(reversed(weights)))

    @property
    def span(self) -> int:
        return math.prod(self.bases)

    @property
    def dtype(self):
        return np.int64 if self.span <= INT64_MAX else object

    def pack(self, v: Sequence[int]) -> int:
        return sum(x * w for x, w in zip(v, self.weights))

    def unpack(self, key: int) -> tuple[int, ...]:
        key = int(key)
        out = []
        for w in self.weights:
            d, key = divmod(key, w)
            out.append(d)
        return tuple(out)

    def point_keys(self) -> np.ndarray:
        """Packed (n, n^2, ..., n^k) for n = 1..N."""
        return np.array([self.pack([n**j for j in range(1, self.k + 1)])
                         for n in range(1, self.N + 1)], dtype=self.dtype)

    def leading(self, keys: np.ndarray) -> np.ndarray:
        return keys // self.weights[0]


def _merge(keys: np.ndarray, counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sort keys and sum the counts of equal keys."""
    if len(keys) == 0:
        return keys, counts
    order = np.argsort(keys, kind="stable")
    keys = keys[order]
    counts = counts[order]
    starts = np.flatnonzero(np.concatenate(([True], keys[1:] != keys[:-1])))
    return keys[starts], np.add.reduceat(counts, starts)


def _count_dtype(N: int, s: int, weighted: bool):
    if weighted:
        return np.complex128
    return np.int64 if N**s <= INT64_MAX else object


def _sum_squares(counts: np.ndarray):
    """sum |c|^2 exactly for integer counts, in float for complex ones."""
    if counts.dtype == np.complex128:
        return math.fsum((counts.real**2 + counts.imag**2).tolist())
    if counts.dtype != object and len(counts):
        top = int(counts.max())
        if top * top * len(counts) <= INT64_MAX:
            return int(np.dot(counts, counts))
    return sum(int(c) * int(c) for c in counts)


@dataclass
class PowerSumHistogram:
    """r(v) = number (or weighted sum) of s-tuples with power-sum vector v."""

    N: int
    s: int
    k: int
    keys: np.ndarray
    counts: np.ndarray

    @property
    def packing(self) -> KeyPacking:
        return KeyPacking(self.N, self.s, self.k)

    def __len__(self) -> int:
        return len(self.keys)

    def total(self):
        if self.counts.dtype == np.complex128:
            return complex(self.counts.sum())
        return sum(int(c) for c in self.counts) if self.counts.dtype == object \
            else int(self.counts.sum())

    def get(self, v: Sequence[int]):
        key = self.packing.pack(v)
        pos = int(np.searchsorted(self.keys, key))
        if pos < len(self.keys) and self.keys[pos] == key:
            c = self.counts[pos]
            return complex(c) if self.counts.dtype == np.complex128 else int(c)
        return 0

    @property
    def table(self) -> dict[tuple[int, ...], int]:
        pk = self.packing
        conv = complex if self.counts.dtype == np.complex128 else int
        return {pk.unpack(key): conv(c) for key, c in zip(self.keys, self.counts)}

    def sum_of_squares(self):
        return _sum_squares(self.counts)


def _check_positive(**values: int) -> None:
    for name, val in values.items():
        if val < 1:
            raise ValueError(f"{name} must be >= 1, got {val}")


def _weights_array(N: int, weights) -> np.ndarray | None:
    if weights is None:
        return None
    a = np.asarray(weights, dtype=np.complex128)
    if a.shape != (N,):
        raise ValueError(f"expected {N} weights, got shape {a.shape}")
    return a


def support_bound(N: int, m: int, k: int) -> int:
    """Upper bound on the number of distinct power-sum vectors of m-tuples."""
    if m == 0:
        return 1
    box = math.prod(m * N**j - m + 1 for j in range(1, k + 1))
    return min(math.comb(N + m - 1, m), box)


def _fold_peak(N: int, rounds: int, k: int) -> int:
    return max(support_bound(N, m - 1, k) * N for m in range(1, rounds + 1))


def _plan(N: int, s: int, k: int) -> str:
    """Fold unless meet-in-the-middle has the smaller estimated peak."""
    if s < 2:
        return "fold"
    a, b = s // 2, s - s // 2
    split_peak = max(_fold_peak(N, b, k), support_bound(N, a, k) * support_bound(N, b, k))
    return "split" if split_peak < _fold_peak(N, s, k) else "fold"


def _point_histogram(pk: KeyPacking, weights, dtype) -> tuple[np.ndarray, np.ndarray]:
    keys = pk.point_keys()
    if weights is None:
        counts = np.ones(pk.N, dtype=np.int64).astype(dtype)
    else:
        counts = weights.astype(np.complex128)
    return keys, counts


def _convolve(keys_a, counts_a, keys_b, counts_b, budget: int):
    size = len(keys_a) * len(keys_b)
    if size > budget:
        raise ResourceBudgetError("histogram convolution exceeds support budget",
                                  attempted=size, budget=budget)
    keys = (keys_a[:, None] + keys_b[None, :]).ravel()
    counts = (counts_a[:, None] * counts_b[None, :]).ravel()
    return _merge(keys, counts)


def _fold(pk, point_keys, point_counts, rounds: int, budget: int):
    keys = np.zeros(1, dtype=pk.dtype)
    counts = np.ones(1, dtype=point_counts.dtype)
    for _ in range(rounds):
        keys, counts = _convolve(keys, counts, point_keys, point_counts, budget)
    return keys, counts


def _build(N: int, rounds: int, k: int, pk: KeyPacking, weights, budget: int,
           method: str) -> tuple[np.ndarray, np.ndarray]:
    dtype = _count_dtype(N, rounds, weights is not None)
    point_keys, point_counts = _point_histogram(pk, weights, dtype)
    if method == "auto":
        method = _plan(N, rounds, k)
    if method == "fold" or rounds == 1:
        return _fold(pk, point_keys, point_counts, rounds, budget)
    if method != "split":
        raise ValueError(f"unknown method {method!r}")
    a = rounds // 2
    ka, ca = _fold(pk, point_keys, point_counts, a, budget)
    kb, cb = (ka, ca) if 2 * a == rounds else _convolve(ka, ca, point_keys, point_counts, budget)
    return _convolve(ka, ca, kb, cb, budget)


def build_histogram(N: int, s: int, k: int, weights=None,
                    budget: int | None = None, method: str = "auto") -> PowerSumHistogram:
    """s-fold convolution of the point masses at (n, ..., n^k), n = 1..N.

    With ``weights`` the mass at n is a_n and r(v) becomes the weighted sum
    over tuples of prod a_{n_i} (complex floating point); otherwise counts
    are exact integers.  ``method`` is "fold", "split" (meet in the middle)
    or "auto" (whichever has the smaller estimated peak).
    """
    _check_positive(N=N, s=s, k=k)
    budget = support_budget() if budget is None else budget
    weights = _weights_array(N, weights)
    pk = KeyPacking(N, s, k)
    keys, counts = _build(N, s, k, pk, weights, budget, method)
    return PowerSumHistogram(N, s, k, keys, counts)


@dataclass(frozen=True)
class CountResult:
    N: int
    s: int
    k: int
    J: int
    distinct_vectors: int
    elapsed: float  # milliseconds

    def row(self) -> dict:
        return {"k": self.k, "s": self.s, "N": self.N, "J": str(self.J),
                "distinct_vectors": self.distinct_vectors,
                "elapsed_ms": round(self.elapsed, 3)}


def _slice_bounds(leading: np.ndarray, lo: int, hi: int) -> tuple[int, int]:
    return (int(np.searchsorted(leading, lo, side="left")),
            int(np.searchsorted(leading, hi, side="right")))


def _sliced_moment(N: int, s: int, k: int, weights, budget: int, workers: int):
    """(sum_v |r_s(v)|^2, number of v) without materialising r_s.

    r_s restricted to first coordinate t is assembled from the entries of
    r_{s-1} whose first coordinate w lies in [t - N, t - 1], each shifted
    by the point at n = t - w and weighted by a_n.  Slices are independent
    and their contributions are summed, so the result does not depend on
    how slices are distributed over workers.
    """
    if s == 1:
        hist = build_histogram(N, 1, k, weights, budget)
        return hist.sum_of_squares(), len(hist)
    pk = KeyPacking(N, s, k)
    # r_{s-1} packed with the radices of s-tuples, so keys add without carries
    keys, counts = _build(N, s - 1, k, pk, weights, budget, "auto")
    if weights is None and _count_dtype(N, s, False) is object:
        counts = counts.astype(object)
    leading = pk.leading(keys)
    if pk.dtype == object:
        leading = leading.astype(np.int64)
    point_keys = pk.point_keys()
    point_w = None if weights is None else np.asarray(weights, dtype=np.complex128)

    def one_slice(t: int):
        lo, hi = _slice_bounds(leading, t - N, t - 1)
        if hi <= lo:
            return 0, 0
        if hi - lo > budget:
            raise ResourceBudgetError("moment slice exceeds support budget",
                                      attempted=hi - lo, budget=budget)
        n_idx = t - leading[lo:hi] - 1  # index of the point n = t - w
        new_keys = keys[lo:hi] + point_keys[n_idx]
        new_counts = counts[lo:hi] if point_w is None else counts[lo:hi] * point_w[n_idx]
        _, merged = _merge(new_keys, new_counts)
        return _sum_squares(merged), len(merged)

    ts = range(s, s * N + 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one_slice, ts))
    else:
        parts = [one_slice(t) for t in ts]
    if weights is None:
        total = sum(p[0] for p in parts)
    else:
        total = math.fsum(p[0] for p in parts)
    return total, sum(p[1] for p in parts)


def vinogradov_count(N: int, s: int, k: int, budget: int | None = None,
                     workers: int = 1) -> CountResult:
    """Exact J_{s,k}(N) = sum_v r(v)^2."""
    _check_positive(N=N, s=s, k=k)
    budget = support_budget() if budget is None else budget
    start = time.perf_counter()
    J, distinct = _sliced_moment(N, s, k, None, budget, workers)
    elapsed = (time.perf_counter() - start) * 1000
    return CountResult(N, s, k, int(J), distinct, elapsed)


def weighted_moment(N: int, s: int, k: int, weights, budget: int | None = None,
                    workers: int = 1) -> float:
    """sum_v |R(v)|^2 with R(v) = sum over s-tuples mapping to v of prod a_{n_i}.

    By orthogonality of characters this is the 2s-th moment of the Weyl sum
    with coefficients a_n over the torus.
    """
    budget = support_budget() if budget is None else budget
    weights = _weights_array(N, weights)
    total, _ = _sliced_moment(N, s, k, weights, budget, workers)
    return float(total)


def brute_force_count(N: int, s: int, k: int, budget: int = DEFAULT_BRUTE_BUDGET) -> int:
    """Count solutions by direct enumeration of every 2s-tuple.

    The tuple grid is enumerated one value of the first variable at a time;
    each block checks all k equations by broadcasting signed powers.
    """
    _check_positive(N=N, s=s, k=k)
    size = N ** (2 * s)
    if size > budget:
        raise ResourceBudgetError("brute-force enumeration exceeds budget",
                                  attempted=size, budget=budget)
    dtype = np.int64 if 2 * s * N**k <= INT64_MAX else object
    n = np.arange(1, N + 1, dtype=dtype)
    rest = 2 * s - 1
    block = max(1, _BRUTE_CHUNK // N**rest)
    total = 0
    for lo in range(1, N + 1, block):
        first = np.arange(lo, min(lo + block, N + 1), dtype=dtype)
        shape = (len(first),) + (N,) * rest
        ok = np.ones(shape, dtype=bool)
        for j in range(1, k + 1):
            diff = (first**j).reshape((-1,) + (1,) * rest)
            for axis in range(1, 2 * s):
                sign = 1 if axis < s else -1
                view = [1] * (2 * s)
                view[axis] = N
                diff = diff + sign * (n**j).reshape(view)
            ok &= diff == 0
        total += int(ok.sum())
    return total


def enumerate_count(N: int, s: int, k: int) -> int:
    """Pure-Python enumeration of s-tuples; used as a second, loop-level oracle."""
    hist: dict[tuple[int, ...], int] = {}
    for tup in itertools.product(range(1, N + 1), repeat=s):
        v = power_sum_vector(tup, k)
        hist[v] = hist.get(v, 0) + 1
    return sum(c * c for c in hist.values())


@dataclass(frozen=True)
class ScanRow:
    N: int
    J: int
    rho: float


@dataclass(frozen=True)
class MeanValueScan:
    s: int
    k: int
    rows: list[ScanRow]
    slope_J: float
    slope_rho: float


def _ls_slope(xs: Iterable[float], ys: Iterable[float]) -> float:
    x = np.log(np.asarray(list(xs), dtype=float))
    y = np.log(np.asarray(list(ys), dtype=float))
    if len(x) < 2:
        return float("nan")
    return float(np.polyfit(x, y, 1)[0])


def mean_value_bound_shape(N: int, s: int, k: int) -> int:
    """N^s + N^max(0, 2s - k(k+1)/2): the shape of the mean value bound at a_n = 1."""
    return N**s + N ** max(0, 2 * s - k * (k + 1) // 2)


def mean_value_scan(N_list: Sequence[int], s: int, k: int,
                    budget: int | None = None) -> MeanValueScan:
    rows = []
    for N in N_list:
        J = vinogradov_count(N, s, k, budget).J
        rows.append(ScanRow(N, J, J / mean_value_bound_shape(N, s, k)))
    Ns = [r.N for r in rows]
    return MeanValueScan(s, k, rows,
                         _ls_slope(Ns, [r.J for r in rows]),
                         _ls_slope(Ns, [r.rho for r in rows]))
