import math

import numpy as np
import pytest

from momentcurve.counting import vinogradov_count
from momentcurve.errors import ResourceBudgetError
from momentcurve.geometry import DyadicInterval
from momentcurve.torus import (
    WeightSequence,
    arc_index,
    arc_weights,
    bilinear_ratio,
    decoupling_ratio,
    eval_weyl_sum,
    exact_grid,
    exact_moment,
    growth_exponent,
)

I0, I2 = DyadicInterval(2, 0), DyadicInterval(2, 2)


def riemann_moment(k, s, w, M):
    """Plain tensor-grid mean of |f|^2s via eval_weyl_sum (independent of grid_chunks)."""
    axes = [np.arange(m) / m for m in M]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
    return float(np.mean(np.abs(eval_weyl_sum(k, w, pts)) ** (2 * s)))


def test_weyl_sum_examples():
    rng = np.random.default_rng(0)
    w = WeightSequence(rng.normal(size=7) + 1j * rng.normal(size=7))
    assert eval_weyl_sum(3, w, np.zeros(3)) == pytest.approx(complex(w.a.sum()))
    single = WeightSequence.single(9, 4, 2 - 1j)
    for x in rng.uniform(size=(10, 2)):
        assert abs(eval_weyl_sum(2, single, x)) == pytest.approx(abs(2 - 1j))
    assert abs(eval_weyl_sum(1, WeightSequence.unit(2), [0.5])) < 1e-15


def test_weyl_sum_direct_formula():
    rng = np.random.default_rng(1)
    w = WeightSequence.random_phases(6, 3)
    x = rng.uniform(size=3)
    direct = sum(a * np.exp(2j * np.pi * (n * x[0] + n**2 * x[1] + n**3 * x[2]))
                 for n, a in enumerate(w.a, start=1))
    assert eval_weyl_sum(3, w, x) == pytest.approx(direct, abs=1e-12)


def test_exact_grid():
    assert exact_grid(2, 3, 4) == [25, 97]


def test_parseval():
    rng = np.random.default_rng(2)
    for k in range(1, 5):
        for N in (1, 5, 17, 32):
            if k == 4 and N > 17:
                continue  # grid 2N^4+1 per axis is too large in 4 dimensions
            w = WeightSequence(rng.normal(size=N) + 1j * rng.normal(size=N))
            expected = np.sum(np.abs(w.a) ** 2)
            for method in ("quadrature", "histogram"):
                if method == "quadrature" and math.prod(exact_grid(k, 1, N)) > 2e7:
                    continue
                got = exact_moment(k, 1, w, method)
                assert got == pytest.approx(expected, rel=1e-12)


def test_parseval_k4_n32_histogram():
    w = WeightSequence.random_phases(32, 9)
    assert exact_moment(4, 1, w, "histogram") == pytest.approx(32, rel=1e-12)


@pytest.mark.parametrize("N", [2, 4, 8])
def test_counting_bridge(N):
    J = vinogradov_count(N, 3, 2).J
    assert exact_moment(2, 3, WeightSequence.unit(N), "quadrature") == pytest.approx(J, rel=1e-9)


def test_moment_examples():
    assert exact_moment(2, 3, WeightSequence.unit(2)) == pytest.approx(20, rel=1e-12)
    w = WeightSequence.random_phases(11, 4)
    assert exact_moment(1, 1, w) == pytest.approx(11, rel=1e-12)


def test_quadrature_matches_weighted_histogram():
    rng = np.random.default_rng(3)
    w = WeightSequence(rng.normal(size=6) + 1j * rng.normal(size=6))
    q = exact_moment(2, 3, w, "quadrature")
    h = exact_moment(2, 3, w, "histogram")
    assert q == pytest.approx(h, rel=1e-9)


def test_quadrature_matches_plain_riemann_sum():
    w = WeightSequence.random_phases(5, 5)
    M = exact_grid(2, 2, 5)
    assert exact_moment(2, 2, w, "quadrature") == pytest.approx(riemann_moment(2, 2, w, M),
                                                                rel=1e-10)


def test_quadrature_budget_error():
    with pytest.raises(ResourceBudgetError):
        exact_moment(3, 6, WeightSequence.unit(10), "quadrature")
    with pytest.raises(ValueError):
        exact_moment(2, 0, WeightSequence.unit(3))


def test_modulation_invariance():
    rng = np.random.default_rng(4)
    for k, N in [(1, 9), (2, 6), (3, 4)]:
        w = WeightSequence.random_phases(N, int(rng.integers(1 << 30)))
        theta = rng.uniform(size=k)
        v = w.modulated(theta)
        for s in (1, 2, 3):
            assert exact_moment(k, s, v) == pytest.approx(exact_moment(k, s, w), rel=1e-9)
        assert decoupling_ratio(k, v).value == pytest.approx(decoupling_ratio(k, w).value,
                                                             rel=1e-9)


def test_decoupling_examples():
    for w in (WeightSequence.unit(7), WeightSequence.random_phases(12, 1)):
        assert decoupling_ratio(1, w).value == pytest.approx(1.0, rel=1e-12)
    r = decoupling_ratio(2, WeightSequence.unit(2))
    assert r.value == pytest.approx(20 ** (1 / 6) / math.sqrt(2), rel=1e-12)
    assert r.p == 6
    assert decoupling_ratio(3, WeightSequence.single(5, 3, 0.5j)).value == pytest.approx(1.0)


def test_decoupling_at_least_one():
    rng = np.random.default_rng(5)
    for k, N in [(2, 3), (2, 8), (3, 4), (2, 20)]:
        w = WeightSequence(rng.normal(size=N) + 1j * rng.normal(size=N))
        assert decoupling_ratio(k, w).value >= 1 - 1e-12


def test_decoupling_zero_weights_rejected():
    with pytest.raises(ValueError):
        decoupling_ratio(2, WeightSequence(np.zeros(3)))


def test_report_json_fields():
    data = decoupling_ratio(2, WeightSequence.unit(3), seed=7).to_json()
    assert {"k", "N", "p", "value", "grid", "converged", "estimate_error", "seed"} <= set(data)
    assert data["seed"] == 7
    assert "periodic" in data["model"]


def test_growth_exponent_k1_and_errors():
    assert growth_exponent(1, [2, 4, 8]).slope == 0.0
    assert growth_exponent(1, [2, 4, 8], "random", seed=3).slope == pytest.approx(0, abs=1e-12)
    with pytest.raises(ValueError):
        growth_exponent(2, [4, 8])
    with pytest.raises(ValueError):
        growth_exponent(2, [8, 4, 16])


def test_growth_exponent_k2_small():
    report = growth_exponent(2, [8, 16, 32, 64])
    assert 0 < report.slope < 0.12
    assert [N for N, _ in report.values] == [8, 16, 32, 64]


def test_random_weights_reproducible():
    a = WeightSequence.random_phases(10, 42).a
    b = WeightSequence.random_phases(10, 42).a
    assert np.array_equal(a, b)
    assert np.allclose(np.abs(a), 1)


def test_csv_roundtrip(tmp_path):
    w = WeightSequence(np.array([1 + 2j, -0.5, 1e-300j, np.pi]))
    path = tmp_path / "w.csv"
    w.to_csv(path)
    assert np.array_equal(WeightSequence.from_csv(path).a, w.a)


def test_csv_rejects_gaps(tmp_path):
    path = tmp_path / "w.csv"
    path.write_text("n,re,im\n1,1,0\n3,1,0\n")
    with pytest.raises(ValueError):
        WeightSequence.from_csv(path)


def test_arc_assignment():
    N = 8
    assert [arc_index(n, N, 2) for n in range(1, 9)] == [0, 0, 1, 1, 2, 2, 3, 3]
    w = arc_weights(WeightSequence.unit(N), I0)
    assert np.array_equal(w.a.real, [1, 1, 0, 0, 0, 0, 0, 0])


def test_bilinear_zero_factor():
    a = np.zeros(8, dtype=complex)
    a[4] = 1  # n = 5 lies in [1/2, 3/4]; nothing in [0, 1/4]
    r = bilinear_ratio(2, 8, I0, I2, WeightSequence(a))
    assert r.value == 0.0


def test_bilinear_unit_below_ceiling():
    r = bilinear_ratio(2, 8, I0, I2, WeightSequence.unit(8))
    assert r.converged
    assert 0 < r.value <= r.extras["ceiling"] + r.estimate_error
    # ceiling is D_I^(p/2) D_I'^(p/2) from the linear ratios of each factor
    DI = decoupling_ratio(2, arc_weights(WeightSequence.unit(8), I0)).value
    DIp = decoupling_ratio(2, arc_weights(WeightSequence.unit(8), I2)).value
    assert r.extras["ceiling"] == pytest.approx(DI**3 * DIp**3, rel=1e-9)


def test_bilinear_random_weights():
    for seed in range(3):
        w = WeightSequence.random_phases(8, seed)
        r = bilinear_ratio(2, 8, DyadicInterval(2, 3), I0, w, seed=seed)
        assert r.converged
        assert r.value <= r.extras["ceiling"] + r.estimate_error
        assert r.seed == seed


def test_bilinear_nonconvergence_reported():
    r = bilinear_ratio(2, 8, I0, I2, WeightSequence.random_phases(8, 1),
                       rel_tol=1e-30, max_doublings=1)
    assert not r.converged
    assert r.estimate_error > 0


@pytest.mark.parametrize("I,Ip", [(I0, DyadicInterval(2, 1)), (DyadicInterval(1, 0), I2),
                                  (I0, DyadicInterval(3, 6))])
def test_bilinear_rejects_bad_pairs(I, Ip):
    with pytest.raises(ValueError):
        bilinear_ratio(2, 8, I, Ip, WeightSequence.unit(8))
