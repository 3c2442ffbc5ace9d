from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from btls.errors import InvalidArgument
from btls.harness import (Estimate, ExitLawOracle, Verdict, box_count, exponent_fit,
                          kolmogorov_sf, ks_2samp, ks_test, symmetric_exit_laplace)


def test_kolmogorov_sf_series():
    # alternating series 2 sum (-1)^(k-1) exp(-2 k^2 x^2)
    for x in [0.8, 1.0, 1.5, 2.0]:
        ref = 2 * sum((-1) ** (k - 1) * math.exp(-2 * k * k * x * x) for k in range(1, 60))
        assert kolmogorov_sf(x) == pytest.approx(ref, abs=1e-12)


def test_ks_statistics_by_hand():
    g = np.random.default_rng(1)
    x = np.sort(g.exponential(size=300))
    F = 1 - np.exp(-x)
    i = np.arange(1, x.size + 1) / x.size
    d_ref = max(np.max(i - F), np.max(F - (i - 1 / x.size)))
    d, p = ks_test(x, stats.expon.cdf)
    assert d == pytest.approx(d_ref, abs=1e-12)
    assert p == pytest.approx(kolmogorov_sf(math.sqrt(300) * d_ref), rel=1e-6)
    y = g.exponential(size=250)
    grid = np.concatenate([x, y])
    d2_ref = np.max(np.abs(np.searchsorted(x, grid, side="right") / 300
                           - np.searchsorted(np.sort(y), grid, side="right") / 250))
    d2, _ = ks_2samp(x, y)
    assert d2 == pytest.approx(d2_ref, abs=1e-12)


def test_ks_needs_samples():
    with pytest.raises(InvalidArgument):
        ks_test(np.ones(5), stats.norm.cdf)


@given(st.floats(0.2, 5.0), st.floats(0.2, 5.0), st.floats(0.01, 0.99))
def test_oracle_branches_agree(lo, hi, frac):
    o = ExitLawOracle(-lo, hi)
    # both representations are exact; compare them on either side of the switch
    t = 0.05 * o.length ** 2
    big = o.survival(np.array([t * (1 + 1e-9)]))[0]
    small = o.survival(np.array([t * (1 - 1e-9)]))[0]
    assert big == pytest.approx(small, abs=1e-9)
    s = o.survival(np.linspace(0, 3 * o.length ** 2, 50))
    assert np.all(np.diff(s) <= 1e-12)


def test_oracle_mean_and_laplace():
    o = ExitLawOracle(-1.0, 2.0)
    m, _ = integrate.quad(lambda t: o.survival(np.array([t]))[0], 0, 200, limit=200)
    assert m == pytest.approx(2.0, rel=1e-8)
    c, th = 1.3, 0.7
    s = ExitLawOracle(-c, c)
    L, _ = integrate.quad(lambda t: math.exp(-th * t) * s.survival(np.array([t]))[0], 0, 200,
                          limit=200)
    assert 1.0 - th * L == pytest.approx(symmetric_exit_laplace(c, th), rel=1e-8)


def test_oracle_vs_scipy_sample_quantile():
    o = ExitLawOracle(-math.pi / 2, math.pi / 2)
    q = o.quantile(0.5)
    assert o.cdf(q) == pytest.approx(0.5, abs=1e-10)
    with pytest.raises(InvalidArgument):
        ExitLawOracle(1.0, 0.5)


def test_estimate_and_verdict():
    e = Estimate.from_bernoulli(50, 100)
    assert e.mean == 0.5 and e.stderr == pytest.approx(0.05)
    assert e.within(0.6, k=3) and not e.within(0.7, k=3)
    v = Verdict("x", float("nan"), None, True).to_dict()
    assert v["pass"] is True


def test_exponent_fit_exact_power():
    r = np.geomspace(1e-1, 1e-4, 10)
    s, se = exponent_fit(r, 0.3 * r ** 0.125)
    assert s == pytest.approx(0.125, abs=1e-12) and se < 1e-10


def test_box_count_line_and_square():
    g = np.random.default_rng(0)
    t = np.linspace(0, 1, 20001)
    _, d1 = box_count(np.column_stack([t, 0.3 * t]), np.geomspace(0.003, 0.1, 6), offsets=3)
    assert d1 == pytest.approx(1.0, abs=0.05)
    p = g.random((200000, 2))
    _, d2 = box_count(p, np.geomspace(0.01, 0.1, 5))
    assert d2 == pytest.approx(2.0, abs=0.05)
