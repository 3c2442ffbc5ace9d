from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from btls.errors import InvalidArgument, InvalidState, OutOfRange
from btls.loewner import (boundary_angle_flow, chordal_increment, conformal_radius,
                          disc_green, disc_to_half_plane, evolve_chordal, evolve_radial,
                          half_plane_to_disc, hadamard_residuals, koebe, koebe_inv,
                          map_point, mobius_to_origin, poisson_kernel, radial_increment)
from btls.sle import Fixed, radial_sle42


def _bm_driver(seed, n, h):
    g = np.random.default_rng(seed)
    W = np.concatenate([[0.0], np.cumsum(2 * g.standard_normal(n) * math.sqrt(h))])
    return np.exp(1j * W)


def test_constant_driver_crad():
    ch = evolve_radial(np.ones(1001), 1e-3)
    for t in [0.1, 0.5, 1.0]:
        assert conformal_radius(ch, 0j, t) == pytest.approx(math.exp(-t), rel=1e-3)


def test_constant_driver_closed_form():
    # k(g_t(z)) = e^t k(z) with the driver at 1
    z = 0.3 - 0.2j
    ch = evolve_radial(np.ones(501), 1e-3)
    w = ch.flow(np.array([z]), 0.5).w[0]
    assert koebe(w) == pytest.approx(math.exp(0.5) * koebe(z), rel=1e-10)


@given(st.complex_numbers(max_magnitude=0.24, allow_nan=False, allow_infinity=False))
def test_koebe_inverse(v):
    u = koebe_inv(np.array([v]))[0]
    assert abs(u) <= 1 + 1e-12
    assert koebe(u) == pytest.approx(v, abs=1e-10)


def test_vertical_slit_chordal():
    # the slit is [0, 2i sqrt(t)]; the inverse map pushes iy up to i sqrt(y^2 + 4t)
    ch = evolve_chordal(np.zeros(1001), (), 1e-3)
    for y in [0.5, 1.0, 3.0]:
        f = ch.inverse(np.array([1j * y]), 1.0)[0]
        assert abs(f - 1j * math.sqrt(y * y + 4.0)) < 1e-4
        w = ch.flow(np.array([1j * (y + 2.0)]), 1.0).w[0]
        assert abs(w - 1j * math.sqrt((y + 2.0) ** 2 - 4.0)) < 1e-4
    assert ch.hcap() == pytest.approx(2.0, rel=1e-4)


def test_radial_semigroup():
    xi = _bm_driver(2, 400, 1e-3)
    ch = evolve_radial(xi, 1e-3)
    z = np.array([0.1 + 0.2j, -0.3j])
    full = ch.flow(z, 0.4).w
    mid = ch.flow(z, 0.15).w
    rest = ch.flow(mid, 0.4, k0=150).w
    assert np.max(np.abs(full - rest)) < 1e-6


def test_inverse_roundtrip():
    xi = _bm_driver(3, 300, 1e-3)
    ch = evolve_radial(xi, 1e-3)
    z = np.array([0.2 + 0.1j, -0.4 + 0.3j])
    w = ch.flow(z).w
    assert np.max(np.abs(ch.inverse(w) - z)) < 1e-9


@given(st.floats(0.0, 2 * math.pi), st.floats(1e-4, 0.1))
def test_boundary_flow_matches_slit_map(off, h):
    # boundary points move as the interior map extended to the circle
    o2 = float(boundary_angle_flow(off, h))
    w, _ = radial_increment(np.array([np.exp(1j * off) * (1 - 1e-12)]), 1.0, h)
    if 0.01 < off < 2 * math.pi - 0.01:
        assert abs(np.angle(w[0] / np.exp(1j * o2))) < 1e-4
    assert 0.0 <= o2 <= 2 * math.pi


def test_map_point_boundary_and_swallow():
    ch = evolve_radial(np.ones(101), 1e-3)
    st_ = map_point(ch, -1 + 0j, 0.1)
    assert st_.alive and abs(abs(st_.w) - 1) < 1e-12
    with pytest.raises(InvalidState):
        conformal_radius(ch, 1.0 + 0j, 0.05)
    with pytest.raises(OutOfRange):
        map_point(ch, 0j, 0.2)
    with pytest.raises(InvalidArgument):
        evolve_radial(np.array([2.0]), 1e-3)


def test_hadamard_on_sle_driver():
    drv = radial_sle42(np.random.default_rng(4), 1e-4, horizon_rule=Fixed(0.1))
    fd, pred = hadamard_residuals(drv.chain(), 0.2 + 0.1j, -0.1 - 0.2j)
    assert np.max(np.abs(fd - pred) / np.abs(pred)) < 1e-2


def test_potential_theory_helpers():
    fwd, back = mobius_to_origin(0.3 + 0.1j)
    assert abs(fwd(0.3 + 0.1j)) < 1e-15
    assert back(fwd(0.5j)) == pytest.approx(0.5j)
    # conformal invariance of the disc Green function
    z, w = 0.2 - 0.1j, -0.5 + 0.3j
    assert disc_green(fwd(z), fwd(w)) == pytest.approx(disc_green(z, w), rel=1e-12)
    th = np.linspace(0, 2 * math.pi, 4001)[:-1]
    assert np.mean(poisson_kernel(0.4 + 0.2j, np.exp(1j * th))) * 2 * math.pi == \
        pytest.approx(1.0, rel=1e-10)
    assert disc_to_half_plane(half_plane_to_disc(1 + 2j)) == pytest.approx(1 + 2j)


def test_chordal_increment_upper_half_plane():
    w, _ = chordal_increment(np.array([0.3 + 1e-9j, -0.2 + 0.5j]), 0.1, 0.01)
    assert np.all(w.imag >= 0)
