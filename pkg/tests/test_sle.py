from __future__ import annotations

import math

import numpy as np
import pytest

from btls.errors import InvalidArgument
from btls.sle import (Fixed, UntilExit, chordal_sle_rho, cross_variation_check, densify,
                      driver_from_path, extract_quasi_loops, harmonic_measure_arc,
                      level_line_trace, radial_sle42, retarget_time_change, trace_dimension)


def test_driver_decomposition():
    d = radial_sle42(1, 1e-3, horizon_rule=Fixed(0.5))
    assert np.allclose(d.W, 2 * d.B.values + d.U)
    assert np.allclose(np.abs(d.xi), 1.0)
    assert np.allclose(d.U, -d.cot_integral.values)


def test_until_exit_driver_exits():
    d = radial_sle42(2, 1e-3, horizon_rule=UntilExit(1))
    assert d.exit_sign in (-1, 1)
    assert abs(d.B.values[-1]) >= math.pi - 4 * math.sqrt(1e-3)
    assert np.all(np.abs(d.B.values[:-1]) < math.pi)


def test_driver_from_path_reproduces():
    d = radial_sle42(3, 1e-3, horizon_rule=Fixed(0.2))
    e = driver_from_path(d.B, d.epsilon_used)
    assert np.array_equal(d.W, e.W)


def test_quasi_loops_marks():
    d = radial_sle42(5, 1e-3, horizon_rule=UntilExit(1))
    loops = extract_quasi_loops(d)
    assert all(q.mark in (-1, 0, 1) for q in loops)
    assert loops and loops[-1].mark == d.exit_sign


def test_retarget_origin_is_B():
    # at the origin P^{g(0)} = 1/(2 pi) as long as g_t(0) = 0
    d = radial_sle42(6, 1e-3, horizon_rule=Fixed(0.3))
    Bz = retarget_time_change(d, d.chain(), 0j)
    assert np.allclose(Bz, d.B.values, atol=1e-9)


def test_harmonic_measure_half_circle():
    assert harmonic_measure_arc(0j, 1 + 0j, -1 + 0j) == pytest.approx(0.5)


def test_cross_variation_identities():
    cv = cross_variation_check(0, n_drivers=3, step=1e-4)
    assert cv["rel_err_kernel"] < 0.05
    assert cv["rel_err_green"] < 0.05


def test_chordal_rho_sides():
    d = chordal_sle_rho(0, 1e-3, rho=(-1.0, -1.0), v0=(0.0, 0.0), sides=(-1, 1), horizon=0.2)
    assert np.all(d.V[0] <= d.W + 1e-12) and np.all(d.V[1] >= d.W - 1e-12)
    with pytest.raises(InvalidArgument):
        chordal_sle_rho(0, 1e-3, rho=(-1.0,), v0=(0.0,))


def test_densify_spacing():
    p = np.array([0, 1, 1 + 1j])
    q = densify(p, 0.1)
    assert np.max(np.abs(np.diff(q))) <= 0.1 + 1e-12
    assert q[0] == 0 and q[-1] == 1 + 1j


@pytest.mark.slow
def test_level_line_dimension_short_trace():
    tr = level_line_trace(1, n_steps=2 ** 13)
    dim, _, _ = trace_dimension(tr, n_scales=6)
    assert 1.2 < dim < 1.8
