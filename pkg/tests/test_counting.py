import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from momentcurve.counting import (
    KeyPacking,
    brute_force_count,
    build_histogram,
    enumerate_count,
    mean_value_scan,
    power_sum_vector,
    vinogradov_count,
    weighted_moment,
)
from momentcurve.errors import ResourceBudgetError

# exact values, cross-checked by brute_force_count and enumerate_count
J32 = {16: 27304, 32: 260240, 64: 2413144, 128: 21966032, 256: 196934080, 512: 1745145944}


def test_power_sum_examples():
    assert power_sum_vector((1, 1), 2) == (2, 2)
    assert power_sum_vector((1, 2), 2) == (3, 5)
    assert power_sum_vector((2, 3, 4), 3) == (9, 29, 99)
    with pytest.raises(ValueError):
        power_sum_vector((0, 1), 2, N=3)
    with pytest.raises(ValueError):
        power_sum_vector((1, 4), 2, N=3)


def test_histogram_examples():
    assert build_histogram(2, 1, 2).table == {(1, 1): 1, (2, 4): 1}
    assert build_histogram(2, 2, 2).table == {(2, 2): 1, (3, 5): 2, (4, 8): 1}


def test_histogram_matches_enumeration():
    for N, s, k in [(3, 3, 2), (4, 2, 3), (5, 3, 1), (3, 4, 3)]:
        expected = Counter(power_sum_vector(t, k)
                           for t in itertools.product(range(1, N + 1), repeat=s))
        assert build_histogram(N, s, k).table == dict(expected)


def test_histogram_invariants():
    for N, s, k in [(5, 3, 2), (7, 4, 3), (4, 5, 2)]:
        hist = build_histogram(N, s, k)
        assert all(c > 0 for c in hist.table.values())
        for v in hist.table:
            for j, vj in enumerate(v, start=1):
                assert s <= vj <= s * N**j


def test_mass_conservation_every_step():
    for N, k in [(6, 2), (5, 3), (9, 1)]:
        for m in range(1, 6):
            assert build_histogram(N, m, k).total() == N**m


def test_fold_and_split_agree():
    fold = build_histogram(6, 4, 3, method="fold")
    split = build_histogram(6, 4, 3, method="split")
    assert fold.table == split.table
    assert fold.sum_of_squares() == split.sum_of_squares() == 18306


def test_key_packing_roundtrip():
    pk = KeyPacking(7, 3, 3)
    for v in [(3, 3, 3), (21, 147, 1029), (10, 40, 200)]:
        assert pk.unpack(pk.pack(v)) == v


@pytest.mark.parametrize("N,s,k,J", [
    (2, 2, 2, 6), (2, 3, 2, 20), (2, 2, 1, 6), (3, 2, 2, 15), (5, 3, 3, 545), (4, 4, 2, 2748),
])
def test_count_examples(N, s, k, J):
    assert vinogradov_count(N, s, k).J == J
    assert brute_force_count(N, s, k) == J
    assert enumerate_count(N, s, k) == J


def test_single_variable():
    for N in (1, 2, 17, 100):
        for k in (1, 3, 5):
            assert vinogradov_count(N, 1, k).J == N


def test_brute_force_trivial_and_budget():
    assert brute_force_count(1, 3, 4) == 1
    assert brute_force_count(3, 2, 2) == vinogradov_count(3, 2, 2).J
    with pytest.raises(ResourceBudgetError) as err:
        brute_force_count(10, 4, 2)
    assert err.value.attempted == 10**8


def test_histogram_budget_error():
    with pytest.raises(ResourceBudgetError) as err:
        build_histogram(64, 4, 3, budget=1000)
    assert err.value.attempted > 1000
    with pytest.raises(ResourceBudgetError):
        vinogradov_count(64, 4, 3, budget=1000)


def test_oracle_equivalence_small_grid():
    for k in range(1, 4):
        for s in range(1, 4):
            for N in range(1, 7):
                assert vinogradov_count(N, s, k).J == brute_force_count(N, s, k)


def test_diagonal_bound_and_monotonicity():
    for k in (1, 2, 3):
        for s in (1, 2, 3):
            row = [vinogradov_count(N, s, k).J for N in range(1, 9)]
            assert all(J >= N**s for N, J in enumerate(row, start=1))
            assert row == sorted(row)
            for N in range(1, 9):
                assert vinogradov_count(N, s + 1, k).J >= row[N - 1]


def test_degree_truncation():
    # the first s power sums determine a multiset of s numbers
    for N, s in [(4, 2), (5, 3), (4, 4)]:
        values = [vinogradov_count(N, s, k).J for k in range(1, s + 3)]
        assert values == sorted(values, reverse=True)
        stable = sum(math.factorial(s) ** 2 // math.prod(math.factorial(c) ** 2 for c in
                                                          Counter(m).values())
                     for m in itertools.combinations_with_replacement(range(1, N + 1), s))
        assert values[s - 1:] == [stable] * 3


def test_large_counts_exact():
    assert vinogradov_count(32, 2, 2).J == 2016
    assert vinogradov_count(16, 3, 2).J == J32[16] == brute_force_count(16, 3, 2, budget=2**24)
    assert vinogradov_count(24, 6, 3).J == 126763994496


def test_object_dtype_paths():
    # N^s past int64: counts and keys switch to Python integers
    res = vinogradov_count(200, 9, 1)
    assert res.J == sum(c * c for c in build_histogram(200, 9, 1).table.values())
    assert res.J > 2**63
    big = KeyPacking(1000, 6, 4)
    assert big.dtype is object
    v = (6000, 6 * 10**6, 6 * 10**9, 6 * 10**12)
    assert big.unpack(big.pack(v)) == v


def test_workers_do_not_change_result():
    assert vinogradov_count(20, 4, 2, workers=4).J == vinogradov_count(20, 4, 2).J


def test_count_result_row():
    row = vinogradov_count(2, 3, 2).row()
    assert row["J"] == "20"
    assert set(row) == {"k", "s", "N", "J", "distinct_vectors", "elapsed_ms"}
    assert row["distinct_vectors"] == 4


def test_weighted_moment_unit_matches_count():
    assert weighted_moment(6, 3, 2, np.ones(6)) == pytest.approx(vinogradov_count(6, 3, 2).J)


def test_mean_value_scan_single_variable():
    scan = mean_value_scan([3, 5, 9, 17], 1, 2)
    assert all(0 < r.rho <= 1 for r in scan.rows)
    assert scan.slope_J == pytest.approx(1.0, abs=1e-12)


def test_mean_value_scan_s3_k2():
    scan = mean_value_scan(sorted(J32), 3, 2)
    assert {r.N: r.J for r in scan.rows} == J32
    # J_{3,2}(N) grows like N^3 log N: the fitted slope of log rho is about 0.19
    assert scan.slope_rho == pytest.approx(0.19133, abs=1e-4)
    assert scan.slope_J == pytest.approx(3.19133, abs=1e-4)


def test_mean_value_scan_critical_k3():
    scan = mean_value_scan(range(4, 13), 6, 3)
    assert all(r.rho >= 1 for r in scan.rows)


@settings(max_examples=40, deadline=None)
@given(N=st.integers(1, 6), s=st.integers(1, 3), k=st.integers(1, 4))
def test_property_count_vs_brute(N, s, k):
    J = vinogradov_count(N, s, k).J
    assert J == brute_force_count(N, s, k)
    assert N**s <= J <= N ** (2 * s)


@settings(max_examples=30, deadline=None)
@given(values=st.lists(st.integers(1, 50), min_size=1, max_size=6), k=st.integers(1, 5))
def test_property_power_sum(values, k):
    v = power_sum_vector(values, k)
    assert v[0] == sum(values)
    assert all(len(values) <= x for x in v)


def test_budget_env_override(monkeypatch):
    monkeypatch.setenv("MOMENTCURVE_BUDGET", "500")
    with pytest.raises(ResourceBudgetError):
        vinogradov_count(40, 4, 3)
    monkeypatch.setenv("MOMENTCURVE_BUDGET", "100000000")
    assert vinogradov_count(4, 2, 2).J == vinogradov_count(4, 2, 2, budget=10**6).J
