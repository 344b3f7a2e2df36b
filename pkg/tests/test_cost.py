import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from staircase_dp import (
    CostSpec,
    DegenerateBandError,
    NormSpec,
    SeriesDivergenceError,
    StaircaseParams,
    band_conditional_moment,
    build_band_table,
    expected_cost_mc,
    expected_cost_series,
    norm,
    phi,
    sample,
)
from staircase_dp._rng import as_generator


def _series(eps, gamma, n, cost, delta=1.0, p=1):
    params = StaircaseParams(eps, delta, gamma, NormSpec(p, n))
    return expected_cost_series(params, build_band_table(params), cost)


def _mp_expected(eps, gamma, n, phi_mp, delta=1.0, K=None, kink=None):
    """Band-by-band mpmath quadrature of E[phi(R)], normalized by the same sum with phi = 1.

    ``kink`` (a radius where phi jumps or bends) is added as a quadrature split point.
    """
    mp.mp.dps = 30
    K = K or int(80 / eps) + 40
    num = mp.mpf(0)
    den = mp.mpf(0)
    for k in range(K):
        for lo, hi, j in ((k, k + gamma, k), (k + gamma, k + 1, k + 1)):
            if hi <= lo:
                continue
            w = mp.exp(-j * eps)
            den += w * (mp.mpf(hi) ** n - mp.mpf(lo) ** n)
            pts = [lo, hi]
            if kink is not None and lo < kink / delta < hi:
                pts = [lo, kink / delta, hi]
            num += w * mp.quad(lambda r: n * r ** (n - 1) * phi_mp(r * delta), pts)
    return float(num / den)


def test_phi_examples():
    assert phi(CostSpec.power(1), 2.5) == 2.5
    assert phi(CostSpec.threshold(1), 0.999) == 0.0
    assert phi(CostSpec.threshold(1), 1.0) == 1.0
    assert phi(CostSpec.truncated(2), 5.0) == 2.0
    with pytest.raises(ValueError):
        phi(CostSpec.power(1), -1.0)
    with pytest.raises(ValueError):
        CostSpec("quadratic")
    with pytest.raises(ValueError):
        CostSpec.power(0)


def test_band_conditional_moment_examples():
    assert band_conditional_moment(0, 1, 1, 1) == pytest.approx(0.5, rel=1e-15)
    assert band_conditional_moment(0, 1, 2, 1) == pytest.approx(2 / 3, rel=1e-15)
    assert band_conditional_moment(1, 2, 3, 2) == pytest.approx(93 / 35, rel=1e-14)
    num, _ = integrate.quad(lambda r: r * 2 * r, 0, 1)
    den, _ = integrate.quad(lambda r: 2 * r, 0, 1)
    assert band_conditional_moment(0, 1, 2, 1) == pytest.approx(num / den, rel=1e-12)
    with pytest.raises(DegenerateBandError):
        band_conditional_moment(1.5, 1.5, 2, 1)


@settings(max_examples=100, deadline=None)
@given(
    a=st.floats(0, 50),
    width=st.floats(1e-3, 2),
    n=st.integers(1, 15),
    q=st.floats(0.1, 4),
)
def test_band_conditional_moment_against_quadrature(a, width, n, q):
    b = a + width
    num, _ = integrate.quad(lambda r: r ** (n - 1 + q), a, b, epsabs=0, epsrel=1e-13)
    den, _ = integrate.quad(lambda r: r ** (n - 1), a, b, epsabs=0, epsrel=1e-13)
    assert band_conditional_moment(a, b, n, q) == pytest.approx(num / den, rel=1e-9)
    assert a**q * (1 - 1e-12) <= band_conditional_moment(a, b, n, q) <= b**q * (1 + 1e-12)


@pytest.mark.parametrize("eps,gamma,n", [(0.5, 0.0, 1), (1.0, 0.3, 3), (8.0, 1.0, 15), (15.0, 0.5, 2)])
def test_threshold_at_zero_is_one(eps, gamma, n):
    assert _series(eps, gamma, n, CostSpec.threshold(0.0)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("eps,gamma,n,cost,phi_mp,kink", [
    (1.0, 0.5, 1, CostSpec.power(1), lambda r: r, None),
    (0.7, 0.25, 2, CostSpec.power(1.5), lambda r: r**1.5, None),
    (2.0, 0.8, 3, CostSpec.threshold(2.3), lambda r: 1 if r >= 2.3 else 0, 2.3),
    (1.0, 0.4, 2, CostSpec.truncated(1.7), lambda r: min(r, 1.7), 1.7),
])
def test_series_against_mpmath_oracle(eps, gamma, n, cost, phi_mp, kink):
    oracle = _mp_expected(eps, gamma, n, phi_mp, kink=kink)
    assert _series(eps, gamma, n, cost) == pytest.approx(oracle, rel=1e-10)


def test_truncated_below_power_and_cap():
    for T in (0.1, 1.0, 3.0):
        trunc = _series(1.0, 0.4, 2, CostSpec.truncated(T))
        assert trunc <= min(_series(1.0, 0.4, 2, CostSpec.power(1)), T) + 1e-15


def test_callable_cost_matches_closed_form():
    closed = _series(1.5, 0.3, 2, CostSpec.power(2))
    assert _series(1.5, 0.3, 2, lambda r: r**2) == pytest.approx(closed, rel=1e-9)


def test_divergent_cost_raises():
    with pytest.raises(SeriesDivergenceError):
        _series(1.0, 0.5, 1, lambda r: np.exp(2.0 * r))
    with pytest.raises(SeriesDivergenceError):
        _series(1.0, 0.5, 1, lambda r: np.full_like(np.asarray(r, dtype=float), np.inf))


def test_mc_threshold_zero_is_exact():
    params = StaircaseParams(1.0, 1.0, 0.5, NormSpec(2, 3))
    mean, se = expected_cost_mc(params, build_band_table(params), CostSpec.threshold(0.0), 3, 1000)
    assert mean == 1.0 and se == 0.0


def test_mc_two_draws_stderr():
    params = StaircaseParams(1.0, 1.0, 0.5, NormSpec(1, 2))
    table = build_band_table(params)
    mean, se = expected_cost_mc(params, table, CostSpec.power(1), 17, 2)
    r = norm(params.norm, sample(params, table, as_generator(17), 2))
    assert mean == pytest.approx(r.mean(), rel=1e-15)
    assert se == pytest.approx(abs(r[0] - r[1]) / 2, rel=1e-12)
    with pytest.raises(ValueError):
        expected_cost_mc(params, table, CostSpec.power(1), 17, 1)


@pytest.mark.parametrize("n_shards", [1, 4])
def test_mc_agrees_with_series(n_shards):
    params = StaircaseParams(1.0, 1.0, 1.0, NormSpec(1, 1))
    table = build_band_table(params)
    series = expected_cost_series(params, table, CostSpec.power(1))
    mean, se = expected_cost_mc(params, table, CostSpec.power(1), 2, 10**6, n_shards=n_shards)
    assert abs(mean - series) <= 3 * se


def test_mc_repeated_runs_mostly_within_three_stderr():
    params = StaircaseParams(2.0, 1.0, 0.3, NormSpec(2, 2))
    table = build_band_table(params)
    cost = CostSpec.truncated(1.2)
    series = expected_cost_series(params, table, cost)
    hits = 0
    for seed in range(100):
        mean, se = expected_cost_mc(params, table, cost, seed, 20_000)
        hits += abs(mean - series) <= 3 * se
    assert hits >= 99


def test_cost_nonincreasing_in_eps():
    for cost in (CostSpec.power(1), CostSpec.threshold(0.5), CostSpec.truncated(2)):
        vals = [_series(e, 0.4, 3, cost) for e in (1, 2, 4, 8, 15)]
        assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("q", [0.5, 1.0, 2.0, 3.7])
def test_power_cost_scales_with_delta(q):
    c1 = _series(1.3, 0.6, 3, CostSpec.power(q), delta=1.0)
    c2 = _series(1.3, 0.6, 3, CostSpec.power(q), delta=2.0)
    assert c2 / c1 == pytest.approx(2.0**q, rel=1e-9)


def test_table_must_match_params():
    p1 = StaircaseParams(1.0, 1.0, 0.5, NormSpec(1, 2))
    p2 = StaircaseParams(2.0, 1.0, 0.5, NormSpec(1, 2))
    with pytest.raises(ValueError):
        expected_cost_series(p1, build_band_table(p2), CostSpec.power(1))
