"""Driving functions: radial SLE(4, -2) and chordal SLE(4, rho).

The radial driver is ``W = 2B + U`` where ``U`` is the (regularised) drift
-int cot(B) ds.  With the Loewner equation dg = g (xi + g)/(xi - g) dt a
boundary point at angle V moves by cot((V - W)/2) dt, so the force point
O_t = exp(iU_t) sits exactly at W - 2B; the sign of the drift is what makes
that identity hold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidArgument, InvalidState, NumericalFailure
from .loewner import (RadialChain, advance_force_points, evolve_radial,
                      flow_history, poisson_kernel)
from .paths import (BrownianPath, Jump, RegularizedIntegral, excursions,
                    regularized_cot_integral)
from .seeding import SeedLike, rng as as_rng


@dataclass(frozen=True)
class Fixed:
    T: float


@dataclass(frozen=True)
class UntilExit:
    M: int = 1


@dataclass(frozen=True)
class RadialSle42Driver:
    B: BrownianPath
    cot_integral: RegularizedIntegral
    U: np.ndarray
    W: np.ndarray
    xi: np.ndarray
    epsilon_used: float
    exit_time: float | None = None
    exit_sign: int = 0

    @property
    def step(self) -> float:
        return self.B.step

    @property
    def times(self) -> np.ndarray:
        return self.B.times

    @property
    def force_point(self) -> np.ndarray:
        """O_t = exp(iU_t)."""
        return np.exp(1j * self.U)

    def chain(self, swallow_tol: float | None = None) -> RadialChain:
        return evolve_radial(self.xi, self.step, swallow_tol)

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.times, self.B.values, self.U, self.W]),
                   delimiter=",", header="t,B,U,W", comments="")


def _brownian_until_exit(g: np.random.Generator, step: float, bound: float,
                         chunk: int = 1 << 14, max_steps: int = 50_000_000):
    """Grid path of B from 0 up to the bridge-corrected exit of (-bound, bound).

    The step in which the exit happens ends the path, with the terminal value
    placed on the barrier.
    """
    sq = math.sqrt(step)
    pieces = [np.zeros(1)]
    x = 0.0
    total = 0
    while total < max_steps:
        X = x + np.cumsum(g.standard_normal(chunk) * sq)
        prev = np.concatenate([[x], X[:-1]])
        u = g.random(chunk)
        outside = np.abs(X) >= bound
        with np.errstate(over="ignore"):
            p_lo = np.exp(-2.0 * (prev + bound) * (X + bound) / step)
            p_hi = np.exp(-2.0 * (bound - prev) * (bound - X) / step)
        cross_lo = ~outside & (u < p_lo)
        cross_hi = ~outside & ~cross_lo & (u < p_lo + p_hi)
        hit = outside | cross_lo | cross_hi
        if hit.any():
            k = int(np.argmax(hit))
            up = bool(X[k] >= bound or cross_hi[k])
            seg = X[:k + 1].copy()
            seg[-1] = bound if up else -bound
            pieces.append(seg)
            return np.concatenate(pieces), (1 if up else -1)
        pieces.append(X)
        x = float(X[-1])
        total += chunk
    raise NumericalFailure("Brownian path did not exit within max_steps")


def radial_sle42(seed: SeedLike, step: float, epsilon: float | None = None,
                 horizon_rule=UntilExit(1)) -> RadialSle42Driver:
    if not step > 0:
        raise InvalidArgument("step must be positive")
    eps = 10.0 * math.sqrt(step) if epsilon is None else float(epsilon)
    if not eps > 0:
        raise InvalidArgument("epsilon must be positive")
    g = as_rng(seed)
    exit_time = None
    sign = 0
    if isinstance(horizon_rule, Fixed):
        if not horizon_rule.T >= step:
            raise InvalidArgument("horizon must be at least one step")
        n = int(math.ceil(horizon_rule.T / step - 1e-9))
        vals = np.concatenate([[0.0], np.cumsum(g.standard_normal(n) * math.sqrt(step))])
    elif isinstance(horizon_rule, UntilExit):
        if horizon_rule.M < 1:
            raise InvalidArgument("M must be a positive integer")
        vals, sign = _brownian_until_exit(g, step, horizon_rule.M * math.pi)
        exit_time = (vals.size - 1) * step
    else:
        raise InvalidArgument(f"unknown horizon rule {horizon_rule!r}")
    B = BrownianPath(step, vals, 0.0)
    I = regularized_cot_integral(B, eps)
    U = -I.values
    W = 2.0 * B.values + U
    xi = np.exp(1j * W)
    return RadialSle42Driver(B, I, U, W, xi, eps, exit_time, sign)


def driver_from_path(B: BrownianPath, epsilon: float | None = None) -> RadialSle42Driver:
    eps = 10.0 * math.sqrt(B.step) if epsilon is None else float(epsilon)
    I = regularized_cot_integral(B, eps)
    U = -I.values
    W = 2.0 * B.values + U
    return RadialSle42Driver(B, I, U, W, np.exp(1j * W), eps)


# ---------------------------------------------------------------------------
# quasi-loops

@dataclass(frozen=True)
class QuasiLoop:
    t0: float
    t1: float
    mark: int
    surrounds_target: bool


def extract_quasi_loops(driver: RadialSle42Driver, min_duration: float | None = None):
    """One quasi-loop per excursion of B away from pi*Z, marked by its jump."""
    out = []
    for e in excursions(driver.B, min_duration):
        m = e.jump.sign
        out.append(QuasiLoop(e.t0, e.t1, m, m != 0))
    return out


# ---------------------------------------------------------------------------
# retargeting

def retarget_time_change(driver: RadialSle42Driver, chain: RadialChain, z: complex,
                         history=None) -> np.ndarray:
    """B^z on the common grid: cumulative sum of 2 pi P^{g_t(z)}(xi_t) dB_t."""
    z = complex(z)
    if history is None:
        hist, ts = flow_history(chain, np.array([z]))
        hist = hist[:, 0]
        if np.isfinite(ts[0]):
            raise InvalidState(f"z={z} swallowed at t={ts[0]}")
    else:
        hist = history
    n = min(hist.size, driver.B.values.size) - 1
    dB = np.diff(driver.B.values[:n + 1])
    P = poisson_kernel(hist[:n], driver.xi[:n])
    out = np.empty(n + 1)
    out[0] = 0.0
    np.cumsum(2.0 * math.pi * P * dB, out=out[1:])
    return out


def retarget_many(driver: RadialSle42Driver, chain: RadialChain, zs):
    """B^z for several targets; columns stop (NaN) once a target is swallowed."""
    hist, ts = flow_history(chain, np.asarray(zs, dtype=complex))
    n = hist.shape[0] - 1
    dB = np.diff(driver.B.values[:n + 1])
    P = poisson_kernel(hist[:n], driver.xi[:n, None])
    inc = 2.0 * math.pi * P * dB[:, None]
    out = np.zeros((n + 1, hist.shape[1]))
    np.cumsum(inc, axis=0, out=out[1:])
    return out, hist, ts


def harmonic_measure_arc(w, a, b):
    """Harmonic measure from w of the boundary arc running ccw from a to b."""
    w = np.asarray(w, dtype=complex)
    span = np.mod(np.angle(b) - np.angle(a), 2 * math.pi)
    ang = np.mod(np.angle((b - w) / (a - w)), 2 * math.pi)
    return ang / math.pi - span / (2 * math.pi)


# ---------------------------------------------------------------------------
# chordal SLE(4, rho)

@dataclass(frozen=True)
class ChordalSleRhoDriver:
    W: np.ndarray
    V: np.ndarray  # (n_force, n + 1)
    rho: tuple
    step: float
    B: BrownianPath
    kappa: float = 4.0

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.W.size) * self.step


def chordal_sle_rho(seed: SeedLike, step: float, rho: Sequence[float] = (),
                    v0: Sequence[float] = (), horizon: float = 1.0,
                    sides: Sequence[int] | None = None,
                    delta_start: float | None = None) -> ChordalSleRhoDriver:
    """Euler-Maruyama for dW = 2 dB + sum rho_i/(W - V_i) dt; the force points
    move by the exact frozen-driver map and are projected back to their side
    if the driver overtakes them.

    Force points at 0 need an explicit side (-1 left, +1 right) and start at
    -+delta_start (default sqrt(step)).
    """
    if not step > 0 or not horizon >= step:
        raise InvalidArgument("need step > 0 and horizon >= step")
    rho = tuple(float(r) for r in rho)
    v0 = np.asarray(v0, dtype=float).ravel()
    if v0.size != len(rho):
        raise InvalidArgument("rho and v0 must have equal length")
    if sides is None:
        if np.any(v0 == 0.0):
            raise InvalidArgument("force point at the driver needs an explicit side")
        side = np.sign(v0)
    else:
        side = np.asarray(sides, dtype=float).ravel()
        if side.size != v0.size or np.any(np.abs(side) != 1):
            raise InvalidArgument("sides must be +-1 per force point")
        if np.any((v0 != 0) & (np.sign(v0) != side)):
            raise InvalidArgument("sides inconsistent with v0")
    ds = math.sqrt(step) if delta_start is None else float(delta_start)
    v = np.where(v0 == 0.0, side * ds, v0)
    r = np.asarray(rho)
    n = int(math.ceil(horizon / step - 1e-9))
    g = as_rng(seed)
    dB = g.standard_normal(n) * math.sqrt(step)
    Bv = np.concatenate([[0.0], np.cumsum(dB)])
    W = np.empty(n + 1)
    V = np.empty((v.size, n + 1))
    W[0] = 0.0
    V[:, 0] = v
    if not r.size:
        W[:] = 2.0 * Bv
        return ChordalSleRhoDriver(W, V, rho, float(step), BrownianPath(step, Bv, 0.0))
    w = 0.0
    for j in range(n):
        drift = float(np.sum(r / (w - v)))
        w = w + 2.0 * dB[j] + drift * step
        v = advance_force_points(v, side, w, step)
        W[j + 1] = w
        V[:, j + 1] = v
    if not (np.all(np.isfinite(W)) and np.all(np.isfinite(V))):
        raise NumericalFailure("non-finite driver")
    if np.any(np.sign(V - W[None, :]) != side[:, None]):
        raise NumericalFailure("force point crossed the driver")
    return ChordalSleRhoDriver(W, V, rho, float(step), BrownianPath(step, Bv, 0.0))


def cross_variation_check(master_seed: int, z: complex = 0.2 + 0.1j, w: complex = -0.1 - 0.2j,
                          n_drivers: int = 20, step: float = 1e-4, horizon: float = 0.3):
    """Pooled discrete cross-variation of B^z and B^w over independent drivers.

    Returns a dict with the discrete bracket, the kernel integral
    int 4 pi^2 P^z P^w ds and the Green drop 2 pi (G_0 - G_t), all summed
    over drivers that keep both points alive.
    """
    from .loewner import disc_green
    from .seeding import derive

    qv = integral = green = 0.0
    used = 0
    for k in range(n_drivers):
        g = np.random.default_rng(derive(master_seed, "cross-variation", k))
        drv = radial_sle42(g, step, horizon_rule=Fixed(horizon))
        ch = drv.chain()
        out, hist, ts = retarget_many(drv, ch, [z, w])
        if np.any(np.isfinite(ts)):
            continue
        n = hist.shape[0] - 1
        dz = np.diff(out[:, 0])
        dw = np.diff(out[:, 1])
        P = poisson_kernel(hist[:n], drv.xi[:n, None])
        qv += float(np.sum(dz * dw))
        integral += float(np.sum(4 * math.pi ** 2 * P[:, 0] * P[:, 1]) * step)
        g0 = float(disc_green(hist[0, 0], hist[0, 1]))
        g1 = float(disc_green(hist[-1, 0], hist[-1, 1]))
        green += 2 * math.pi * (g0 - g1)
        used += 1
    if used == 0:
        raise InvalidState("every driver swallowed a test point")
    return {"bracket": qv, "kernel_integral": integral, "green_drop": green, "drivers": used,
            "rel_err_kernel": abs(qv - integral) / abs(integral),
            "rel_err_green": abs(qv - green) / abs(green)}


# ---------------------------------------------------------------------------
# level-line traces

def level_line_trace(seed: SeedLike, n_steps: int = 2 ** 15, horizon: float = 1.0):
    """Tip positions of a chordal SLE(4; -1, -1) in the half-plane, from 0.

    This is the zero-boundary level line of the field; both force points
    start at the driver (one on each side).
    """
    from .loewner import evolve_chordal

    h = horizon / n_steps
    d = chordal_sle_rho(seed, h, rho=(-1.0, -1.0), v0=(0.0, 0.0), sides=(-1, 1),
                        horizon=horizon)
    tr = evolve_chordal(d.W, (), h).trace(every=1)
    return np.concatenate([[0j], tr])


def densify(points, spacing: float) -> np.ndarray:
    """Polyline through ``points`` resampled so no gap exceeds ``spacing``."""
    p = np.asarray(points, dtype=complex)
    seg = np.abs(np.diff(p))
    k = np.maximum(1, np.ceil(seg / spacing).astype(int))
    idx = np.repeat(np.arange(seg.size), k)
    frac = (np.arange(k.sum()) - np.repeat(np.cumsum(k) - k, k) + 1) / np.repeat(k, k)
    return np.concatenate([p[:1], p[idx] + (p[idx + 1] - p[idx]) * frac])


def trace_dimension(trace, n_scales: int = 10, offsets: int = 4, seed: int = 0):
    """Box-counting dimension of a traced curve.

    Scales run from 32 median tip spacings (below that the polygonal
    interpolation dominates) up to an eighth of the diameter.
    """
    from .harness import box_count

    tr = np.asarray(trace, dtype=complex)
    seg = np.abs(np.diff(tr))
    diam = max(np.ptp(tr.real), np.ptp(tr.imag))
    s0 = 32.0 * float(np.median(seg))
    if not diam / 8.0 > 2 * s0:
        raise InvalidArgument("trace too short for a box-counting fit")
    pts = densify(tr, s0 / 4.0)
    scales = np.geomspace(s0, diam / 8.0, n_scales)
    counts, dim = box_count(pts, scales, offsets=offsets, seed=seed)
    return dim, scales, counts
