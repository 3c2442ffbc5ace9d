from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from btls import LAMBDA
from btls.errors import NoSuchBTLS
from btls.harness import ks_test
from btls.tvs import (NodeStatus, build_geometric, censored_signed, martingale_stats,
                      nested_batch, nested_sample, sample_geometric, sample_value, sample_values,
                      validate)


@given(st.floats(1e-3, 3.0), st.floats(1e-3, 3.0))
def test_validate_threshold(a, b):
    if a + b < 2 * LAMBDA * (1 - 1e-9):
        with pytest.raises(NoSuchBTLS, match="2\\*lambda"):
            validate(a, b)
    elif a + b >= 2 * LAMBDA:
        s = validate(a, b)
        assert s.p_lower == pytest.approx(b / (a + b))
        assert s.exponent == pytest.approx(2 * LAMBDA ** 2 / (a + b) ** 2)


def test_trivial_and_cle_special_case():
    assert validate(0.0, 1.0).trivial
    assert sample_value(0, validate(0.0, 1.0)).label == 0.0
    s = validate(2 * LAMBDA, 2 * LAMBDA)
    assert s.interval == pytest.approx((-math.pi, math.pi))


def test_reduced_law_and_zero_mean():
    s = validate(LAMBDA, 2 * LAMBDA)
    b = sample_values(0, s, 5000)
    _, p = ks_test(b.log_crad_drop, s.oracle().cdf)
    assert p > 1e-3
    # the harmonic function at the point is a bounded martingale: mean label 0
    se = np.std(b.label) / math.sqrt(b.label.size)
    assert abs(np.mean(b.label)) < 4 * se


def test_nested_monotone():
    inner, outer = validate(LAMBDA, LAMBDA), validate(2 * LAMBDA, 2 * LAMBDA)
    ib, ob = nested_batch(3, inner, outer, 2000)
    assert np.all(ib.log_crad_drop <= ob.log_crad_drop)
    a, b = nested_sample(4, inner, outer)
    assert a.log_crad_drop <= b.log_crad_drop
    with pytest.raises(Exception):
        nested_batch(0, outer, inner, 10)


def test_censored_signed():
    v = censored_signed([1.0, -1.0, 1.0], [0.5, 2.0, 9.0], [True, True, False], 3.0)
    assert v.tolist() == [0.5, -2.0, 0.0]


def test_geometric_build_lambda_lambda():
    s = validate(LAMBDA, LAMBDA)
    b = build_geometric(1, s, delta=1e-3)
    if b.status is NodeStatus.closed:
        assert b.outcome.label in (-LAMBDA, LAMBDA)
    # every level line separates values 2 lambda apart
    for ln in b.lines:
        assert ln.interface[1] - ln.interface[0] == pytest.approx(2 * LAMBDA)


def test_geometric_value_martingale_small():
    g = sample_geometric(5, validate(LAMBDA, 2 * LAMBDA), 40)
    ms = martingale_stats(g.builds)
    assert abs(ms["drift"]) < 4 * ms["drift_se"]
    assert ms["variance_rate"] == pytest.approx(ms["target_rate"], rel=0.05)
    assert "line_end_rate" in ms
    ok = ~g.truncated
    assert set(np.unique(g.label[ok])) <= {-LAMBDA, 2 * LAMBDA}
