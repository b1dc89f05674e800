import numpy as np
import pytest

from cmvreserve.chain_ladder import (
    ChainLadderError,
    bootstrap_chain_ladder,
    fit_chain_ladder,
    fitted_incrementals,
    pearson_residuals,
)
from cmvreserve.rng import RngStream
from cmvreserve.triangle import Triangle, to_incremental


def multiplicative(factors=(2.0, 1.5, 1.25), first=(80.0, 96.0, 112.0, 64.0)):
    n = len(first)
    rows = []
    for i, a in enumerate(first):
        row = [a]
        for f in factors[: n - 1 - i]:
            row.append(row[-1] * f)
        rows.append(row)
    return Triangle.from_rows(rows)


def test_hand_triangle(hand_triangle):
    cl = fit_chain_ladder(hand_triangle)
    assert cl.factors[0] == pytest.approx(326 / 210, rel=1e-15)
    assert cl.factors[1] == pytest.approx(1.1, rel=1e-15)
    assert cl.point_reserves[2] == pytest.approx(17.6, abs=1e-12)
    assert cl.point_reserves[3] == pytest.approx(84.9142857, abs=1e-6)
    assert cl.total_reserve == pytest.approx(102.5142857, abs=1e-6)
    assert 1 not in cl.point_reserves or cl.point_reserves[1] == 0


def test_sigma2_hand_triangle(hand_triangle):
    cl = fit_chain_ladder(hand_triangle)
    f1 = 326 / 210
    s1 = (100 * (1.5 - f1) ** 2 + 110 * (1.6 - f1) ** 2) / 1
    assert cl.sigma2[0] == pytest.approx(s1, rel=1e-12)
    assert cl.sigma2[1] == cl.sigma2[0]


def test_mack_extrapolation():
    rng = np.random.default_rng(3)
    rows = [np.cumsum(rng.uniform(50, 150, size=6 - i)) for i in range(6)]
    cl = fit_chain_ladder(Triangle.from_rows(rows))
    s = cl.sigma2
    assert s[4] == pytest.approx(min(s[3] ** 2 / s[2], s[2], s[3]))
    assert np.all(s >= 0)


def test_multiplicative_recovery():
    t = multiplicative()
    cl = fit_chain_ladder(t)
    assert np.array_equal(cl.factors, [2.0, 1.5, 1.25])
    assert np.all(cl.sigma2[:2] == 0)


def test_reserve_definition():
    t = multiplicative()
    cl = fit_chain_ladder(t)
    for i in range(2, 5):
        diag = t.rows()[i - 1][-1]
        ult = diag * np.prod(cl.factors[5 - i - 1:])
        assert cl.point_reserves[i] == pytest.approx(ult - diag, rel=1e-14)


def test_zero_column_sum():
    t = Triangle.from_rows([[0, 1, 2], [0, 3], [5]])
    with pytest.raises(ChainLadderError):
        fit_chain_ladder(t)


def test_fitted_incrementals_reproduce_diagonal(hand_triangle):
    m = fitted_incrementals(hand_triangle)
    for i, row in enumerate(hand_triangle.rows()):
        assert np.nansum(m[i, : len(row)]) == pytest.approx(row[-1], rel=1e-14)


def test_negative_fitted_incrementals_named():
    t = Triangle.from_rows([[100, 90, 95], [100, 80], [50]])
    with pytest.raises(ChainLadderError, match=r"\(1, 2\)"):
        pearson_residuals(t)


def test_bcl_point_mass_on_multiplicative():
    t = multiplicative()
    cl = fit_chain_ladder(t)
    r, phi, _ = pearson_residuals(t)
    assert np.all(r == 0) and phi == 0
    d = bootstrap_chain_ladder(t, 200, RngStream(1), process_variance=False)
    for i, v in d.per_year.items():
        assert np.all(v == cl.point_reserves[i])


def test_bcl_mean_near_deterministic(hand_triangle):
    cl = fit_chain_ladder(hand_triangle)
    d = bootstrap_chain_ladder(hand_triangle, 5000, RngStream(11))
    se = d.total.std(ddof=1) / np.sqrt(d.B)
    assert abs(d.total.mean() - cl.total_reserve) <= 3 * se


def test_bcl_collapse_without_process_variance(hand_triangle):
    # with process variance off the spread comes from parameter uncertainty alone
    a = bootstrap_chain_ladder(hand_triangle, 2000, RngStream(2), process_variance=False)
    b = bootstrap_chain_ladder(hand_triangle, 2000, RngStream(2))
    assert a.total.std() < b.total.std()


def test_bcl_deterministic_and_thread_free(hand_triangle):
    runs = [bootstrap_chain_ladder(hand_triangle, 700, RngStream(5), threads=k) for k in (1, 2, 8)]
    for d in runs[1:]:
        assert d.matrix().tobytes() == runs[0].matrix().tobytes()
    assert runs[0].method == "bcl"


def test_incremental_input_equivalent(hand_triangle):
    inc = to_incremental(hand_triangle)
    assert fit_chain_ladder(inc).total_reserve == fit_chain_ladder(hand_triangle).total_reserve
