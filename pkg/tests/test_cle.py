from __future__ import annotations

import math

import numpy as np
import pytest

from btls import LAMBDA
from btls.cle import (Mode, carpet_raster, decay_from_times, nested_labels, one_point_decay,
                      sample_cle_batch, sample_cle_point)
from btls.errors import InvalidArgument
from btls.harness import ExitLawOracle, ks_test


def test_reduced_point_record():
    r = sample_cle_point(0, 0.3j, M=2)
    assert abs(r.label) == pytest.approx(4 * LAMBDA)
    assert abs(r.nested_labels[-1]) == 2
    assert all(abs(a - b) == 1 for a, b in zip((0,) + r.nested_labels, r.nested_labels))


def test_reduced_point_law():
    drops = [sample_cle_point(np.random.default_rng(k), 0j, 1).log_crad_drop for k in range(300)]
    _, p = ks_test(drops, ExitLawOracle(-math.pi, math.pi).cdf)
    assert p > 1e-3


def test_batch_law_and_labels():
    b = sample_cle_batch(1, 4000, 1)
    _, p = ks_test(b.log_crad_drop, ExitLawOracle(-math.pi, math.pi).cdf)
    assert p > 1e-3
    assert abs(np.mean(b.label > 0) - 0.5) < 4 * math.sqrt(0.25 / 4000)
    assert np.allclose(np.abs(b.label), 2 * LAMBDA)


def test_geometric_point_runs():
    r = sample_cle_point(3, 0.1 + 0.1j, 1, Mode.geometric, step=1e-3)
    assert r.mode is Mode.geometric and r.log_crad_drop > 0
    assert abs(r.label) == pytest.approx(2 * LAMBDA)


def test_point_validation():
    with pytest.raises(InvalidArgument):
        sample_cle_point(0, 1.5 + 0j)
    with pytest.raises(InvalidArgument):
        sample_cle_point(0, 0j, M=0)


def test_nested_labels_are_walk():
    u = nested_labels(0, 0j, 20)
    assert np.all(np.abs(np.diff(np.concatenate([[0], u]))) == 1)


def test_decay_from_exact_tail():
    # times drawn from the oracle give slope ~ rate
    o = ExitLawOracle(-math.pi, math.pi)
    t = o.sample(np.random.default_rng(0), 200_000)
    res = decay_from_times(t, np.geomspace(1 / 16, 1e-6, 25), o.decay_rate)
    assert res.exponent == pytest.approx(o.decay_rate, abs=0.02)
    with pytest.raises(InvalidArgument):
        decay_from_times(t, [0.01, 0.02, 0.001], o.decay_rate)


def test_one_point_decay_small():
    res = one_point_decay(1, N=50_000, master_seed=2)
    assert res.exponent == pytest.approx(1 / 8, abs=0.03)
    assert res.r_grid.size == res.probabilities.size


def test_carpet_raster_shape():
    cr = carpet_raster(0, 1, 32)
    assert cr.in_hull.shape == (32, 32)
    assert not np.any(cr.in_hull & cr.outside)
    assert 0.0 < cr.in_hull_fraction < 1.0
    with pytest.raises(InvalidArgument):
        carpet_raster(0, 1, 16)


@pytest.mark.slow
def test_carpet_fraction_decreases_with_resolution():
    f32 = carpet_raster(0, 1, 32).in_hull_fraction
    f64 = carpet_raster(0, 1, 64).in_hull_fraction
    assert f64 < f32
