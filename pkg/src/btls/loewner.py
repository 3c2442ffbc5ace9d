"""Radial and chordal Loewner chains by composition of exact slit maps.

Over each step the driving function is frozen at its value at the right end
of the step, and the Loewner flow is solved in closed form:

* radial: with k(u) = u / (1 + u)^2 the flow dg = g (xi + g)/(xi - g) dt for
  xi = 1 is k(g_t) = e^t k(z); k maps the disc onto C minus [1/4, inf).
* chordal: dg = 2/(g - W) dt gives (g_t - W)^2 = (z - W)^2 + 4t.

g_t is the composition of the forward increments, f_t = g_t^{-1} the reverse
composition of their inverses (the zipper).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, InvalidState, OutOfRange


# ---------------------------------------------------------------------------
# radial slit map pieces

def koebe(u):
    return u / (1.0 + u) ** 2


def koebe_prime(u):
    return (1.0 - u) / (1.0 + u) ** 3


def koebe_inv(v):
    """Branch of k^{-1} with values in the closed unit disc."""
    v = np.asarray(v, dtype=complex)
    s = np.sqrt(1.0 - 4.0 * v)
    a = 1.0 - 2.0 * v
    q1 = a + s
    q2 = a - s
    q = np.where(np.abs(q1) >= np.abs(q2), q1, q2)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(q != 0, 2.0 * v / q, 0.0)
    return out


def radial_increment(w, xi, h):
    """Forward radial map over capacity time ``h`` with frozen driver ``xi``.

    Returns (phi(w), phi'(w)).
    """
    u = w / xi
    ku = koebe(u)
    eh = math.exp(h)
    out = koebe_inv(eh * ku)
    dphi = eh * koebe_prime(u) / koebe_prime(out)
    return xi * out, dphi


def radial_increment_inv(w, xi, h):
    u = w / xi
    return xi * koebe_inv(math.exp(-h) * koebe(u))


def boundary_angle_flow(offset, h):
    """Flow of boundary points under the frozen radial map.

    ``offset`` is the ccw angle from the driver in [0, 2 pi]; points move away
    from the driver towards the antipode, cos(o'/2) = e^{-h/2} cos(o/2).
    """
    return 2.0 * np.arccos(np.clip(math.exp(-h / 2.0) * np.cos(np.asarray(offset) / 2.0), -1.0, 1.0))


# ---------------------------------------------------------------------------
# chordal slit map pieces

def _upper_sqrt(s2, ref):
    s = np.sqrt(np.asarray(s2, dtype=complex))
    flip = (s.imag < 0) | ((s.imag == 0) & (np.real(ref) < 0))
    return np.where(flip, -s, s)


def chordal_increment(w, W, h):
    d = np.asarray(w, dtype=complex) - W
    s = _upper_sqrt(d * d + 4.0 * h, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        dphi = d / s
    return W + s, dphi


def chordal_increment_inv(w, W, h):
    d = np.asarray(w, dtype=complex) - W
    return W + _upper_sqrt(d * d - 4.0 * h, d)


def chordal_real_increment(x, W, h):
    """Exact image of real points under the frozen chordal map."""
    d = np.asarray(x, dtype=float) - W
    return W + np.sign(d) * np.sqrt(d * d + 4.0 * h)


# ---------------------------------------------------------------------------
# point bookkeeping

class Status(str, enum.Enum):
    alive = "alive"
    swallowed = "swallowed"


@dataclass(frozen=True)
class PointState:
    z0: complex
    status: Status
    w: complex | None = None
    t_s: float | None = None
    derivative: complex | None = None

    @property
    def alive(self) -> bool:
        return self.status is Status.alive


@dataclass(frozen=True)
class FlowResult:
    """Vectorised evaluation: images, derivatives and swallowing times."""

    w: np.ndarray
    dw: np.ndarray
    t_s: np.ndarray

    @property
    def alive(self) -> np.ndarray:
        return ~np.isfinite(self.t_s)


def _grid_index(t: float, step: float, horizon: float):
    if t < -1e-12 or t > horizon + 1e-9 * max(1.0, horizon):
        raise OutOfRange(f"t={t} outside [0, {horizon}]")
    k = int(math.floor(t / step + 1e-9))
    rem = t - k * step
    if rem < 1e-12 * max(1.0, step):
        rem = 0.0
    return k, rem


# ---------------------------------------------------------------------------
# radial chain

@dataclass(frozen=True)
class RadialChain:
    step: float
    driving: np.ndarray
    swallow_tol: float

    @property
    def n_steps(self) -> int:
        return self.driving.size - 1

    @property
    def horizon(self) -> float:
        return self.n_steps * self.step

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.driving.size) * self.step

    def segment(self, k0: int, k1: int) -> "RadialChain":
        return RadialChain(self.step, self.driving[k0:k1 + 1], self.swallow_tol)

    def flow(self, z, t: float | None = None, k0: int = 0) -> FlowResult:
        """g_t applied to interior points ``z`` (any shape), from grid time k0."""
        z = np.asarray(z, dtype=complex)
        t = self.horizon if t is None else t
        k, rem = _grid_index(t, self.step, self.horizon)
        w = z.astype(complex).ravel().copy()
        dw = np.ones_like(w)
        ts = np.full(w.size, np.inf)
        tol = self.swallow_tol
        xi = self.driving
        live = np.abs(w - xi[k0]) >= tol
        ts[~live] = k0 * self.step
        idx = np.nonzero(live)[0]
        for j in range(k0, k):
            if idx.size == 0:
                break
            nw, nd = radial_increment(w[idx], xi[j + 1], self.step)
            w[idx] = nw
            dw[idx] *= nd
            gone = np.abs(nw - xi[j + 1]) < tol
            if gone.any():
                ts[idx[gone]] = (j + 1) * self.step
                idx = idx[~gone]
        if rem > 0 and idx.size and k < self.n_steps:
            nw, nd = radial_increment(w[idx], xi[k + 1], rem)
            w[idx] = nw
            dw[idx] *= nd
        return FlowResult(w.reshape(z.shape), dw.reshape(z.shape), ts.reshape(z.shape))

    def inverse(self, w, t: float | None = None):
        """f_t = g_t^{-1} at points of the disc."""
        t = self.horizon if t is None else t
        k, rem = _grid_index(t, self.step, self.horizon)
        out = np.asarray(w, dtype=complex).copy()
        if rem > 0 and k < self.n_steps:
            out = radial_increment_inv(out, self.driving[k + 1], rem)
        for j in range(k - 1, -1, -1):
            out = radial_increment_inv(out, self.driving[j + 1], self.step)
        return out

    def trace(self, k_max: int | None = None, every: int = 1) -> np.ndarray:
        """Tip positions f_{t_k}(xi_k) for k = every, 2*every, ...

        All tips are pulled back together, O(n^2) work in total.
        """
        n = self.n_steps if k_max is None else int(k_max)
        ks = np.arange(every, n + 1, every)
        if ks.size == 0:
            return np.empty(0, dtype=complex)
        pts = self.driving[ks].astype(complex)
        for j in range(n - 1, -1, -1):
            sel = ks > j
            if not sel.any():
                continue
            pts[sel] = radial_increment_inv(pts[sel], self.driving[j + 1], self.step)
        return pts


def evolve_radial(driving, step: float, swallow_tol: float | None = None) -> RadialChain:
    xi = np.asarray(driving, dtype=complex).ravel()
    if xi.size == 0:
        raise InvalidArgument("driving must be nonempty")
    if not step > 0:
        raise InvalidArgument("step must be positive")
    if np.max(np.abs(np.abs(xi) - 1.0)) > 1e-12:
        raise InvalidArgument("driving values must have unit modulus")
    tol = 10.0 * math.sqrt(step) if swallow_tol is None else float(swallow_tol)
    xi = xi.copy()
    xi.setflags(write=False)
    return RadialChain(float(step), xi, tol)


def map_point(chain: RadialChain, z: complex, t: float) -> PointState:
    z = complex(z)
    if abs(z) > 1.0 + 1e-12:
        raise InvalidArgument("z must lie in the closed unit disc")
    k, rem = _grid_index(t, chain.step, chain.horizon)
    if abs(abs(z) - 1.0) <= 1e-12:
        return _map_boundary_point(chain, z, k, rem)
    r = chain.flow(np.array([z]), t)
    if np.isfinite(r.t_s[0]):
        return PointState(z, Status.swallowed, t_s=float(r.t_s[0]))
    return PointState(z, Status.alive, w=complex(r.w[0]), derivative=complex(r.dw[0]))


def _map_boundary_point(chain: RadialChain, z: complex, k: int, rem: float) -> PointState:
    xi = chain.driving
    ang = math.atan2(z.imag, z.real)
    tol = chain.swallow_tol
    if abs(z - xi[0]) < tol:
        return PointState(z, Status.swallowed, t_s=0.0)
    hs = [chain.step] * k + ([rem] if rem > 0 and k < chain.n_steps else [])
    for j, h in enumerate(hs):
        off = np.mod(ang - np.angle(xi[j + 1]), 2 * math.pi)
        ang = float(np.angle(xi[j + 1])) + float(boundary_angle_flow(off, h))
        w = complex(math.cos(ang), math.sin(ang))
        if j < k and abs(w - xi[j + 1]) < tol:
            return PointState(z, Status.swallowed, t_s=(j + 1) * chain.step)
    return PointState(z, Status.alive, w=complex(math.cos(ang), math.sin(ang)))


def conformal_radius(chain: RadialChain, z: complex, t: float) -> float:
    """crad(z, D_t) = (1 - |g_t(z)|^2) / |g_t'(z)|."""
    st = map_point(chain, z, t)
    if not st.alive:
        raise InvalidState(f"point {z} swallowed at t={st.t_s}")
    if st.derivative is None:
        raise InvalidState("conformal radius undefined on the boundary")
    return (1.0 - abs(st.w) ** 2) / abs(st.derivative)


def conformal_radii(chain: RadialChain, z, t: float | None = None) -> np.ndarray:
    """Vectorised crad; NaN at swallowed points."""
    r = chain.flow(z, t)
    c = (1.0 - np.abs(r.w) ** 2) / np.abs(r.dw)
    return np.where(r.alive, c, np.nan)


def koebe_distance_bounds(crad: float) -> tuple[float, float]:
    if not crad > 0:
        raise InvalidArgument("crad must be positive")
    return crad / 4.0, crad


# ---------------------------------------------------------------------------
# disc potential theory

def disc_green(z, w):
    """Dirichlet Green's function of the unit disc, normalised as (2 pi)^-1 log."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return np.log(np.abs((1.0 - z * np.conj(w)) / (z - w))) / (2.0 * math.pi)


def poisson_kernel(w, xi):
    """P^w(xi) = (1 - |w|^2) / (2 pi |xi - w|^2)."""
    w = np.asarray(w, dtype=complex)
    return (1.0 - np.abs(w) ** 2) / (2.0 * math.pi * np.abs(xi - w) ** 2)


def mobius_to_origin(z0: complex):
    """Disc automorphism sending z0 to 0, and its inverse."""
    z0 = complex(z0)

    def fwd(w):
        return (w - z0) / (1.0 - np.conj(z0) * w)

    def back(w):
        return (w + z0) / (1.0 + np.conj(z0) * w)

    return fwd, back


def half_plane_to_disc(z):
    """H -> D with 0 -> -i, i -> 0, inf -> i."""
    z = np.asarray(z, dtype=complex)
    return 1j * (z - 1j) / (z + 1j)


def disc_to_half_plane(w):
    w = np.asarray(w, dtype=complex)
    return (1.0 - 1j * w) / (w - 1j)


# ---------------------------------------------------------------------------
# chordal chain

@dataclass(frozen=True)
class ChordalChain:
    step: float
    driving: np.ndarray
    force_points: np.ndarray  # shape (n_force, n_steps + 1)
    swallow_tol: float

    @property
    def n_steps(self) -> int:
        return self.driving.size - 1

    @property
    def horizon(self) -> float:
        return self.n_steps * self.step

    def flow(self, z, t: float | None = None) -> FlowResult:
        z = np.asarray(z, dtype=complex)
        t = self.horizon if t is None else t
        k, rem = _grid_index(t, self.step, self.horizon)
        w = z.ravel().copy()
        dw = np.ones_like(w)
        ts = np.full(w.size, np.inf)
        W = self.driving
        tol = self.swallow_tol
        live = np.abs(w - W[0]) >= tol
        ts[~live] = 0.0
        idx = np.nonzero(live)[0]
        for j in range(k):
            if idx.size == 0:
                break
            nw, nd = chordal_increment(w[idx], W[j + 1], self.step)
            w[idx] = nw
            dw[idx] *= nd
            gone = np.abs(nw - W[j + 1]) < tol
            if gone.any():
                ts[idx[gone]] = (j + 1) * self.step
                idx = idx[~gone]
        if rem > 0 and idx.size and k < self.n_steps:
            nw, nd = chordal_increment(w[idx], W[k + 1], rem)
            w[idx] = nw
            dw[idx] *= nd
        return FlowResult(w.reshape(z.shape), dw.reshape(z.shape), ts.reshape(z.shape))

    def inverse(self, w, t: float | None = None):
        t = self.horizon if t is None else t
        k, rem = _grid_index(t, self.step, self.horizon)
        out = np.asarray(w, dtype=complex).copy()
        if rem > 0 and k < self.n_steps:
            out = chordal_increment_inv(out, self.driving[k + 1], rem)
        for j in range(k - 1, -1, -1):
            out = chordal_increment_inv(out, self.driving[j + 1], self.step)
        return out

    def trace(self, k_max: int | None = None, every: int = 1) -> np.ndarray:
        """Tip positions f_{t_k}(W_k), pulled back all at once."""
        n = self.n_steps if k_max is None else int(k_max)
        ks = np.arange(every, n + 1, every)
        if ks.size == 0:
            return np.empty(0, dtype=complex)
        pts = self.driving[ks].astype(complex)
        for j in range(n - 1, -1, -1):
            sel = ks > j
            pts[sel] = chordal_increment_inv(pts[sel], self.driving[j + 1], self.step)
        return pts

    def hcap(self, t: float | None = None) -> float:
        """Half-plane capacity from the far-field expansion g(z) = z + hcap/z + ..."""
        t = self.horizon if t is None else t
        scale = 1.0 + math.sqrt(max(t, 0.0)) + float(np.max(np.abs(self.driving)))
        Y = 1e3 * scale
        z = np.array([1j * Y, 1j * 2 * Y])
        g = self.flow(z, t).w
        m = z * (g - z)
        # the next term is O(1/z); one Richardson step removes it
        est = 2.0 * m[1] - m[0]
        return float(est.real)


def evolve_chordal(driving, force_points=(), step: float = 1e-3,
                   swallow_tol: float | None = None) -> ChordalChain:
    """Chordal chain from a real driver; force points follow the exact flow.

    Force points that the driver would cross are held on the driver's side by
    projection onto the edge of the slit created in the current step.
    """
    W = np.asarray(driving, dtype=float).ravel()
    if W.size == 0:
        raise InvalidArgument("driving must be nonempty")
    if not step > 0:
        raise InvalidArgument("step must be positive")
    v0 = np.asarray(force_points, dtype=float).ravel()
    if np.any(v0 == W[0]):
        raise InvalidArgument("force point coincides with the driving start")
    V = np.empty((v0.size, W.size))
    V[:, 0] = v0
    side = np.sign(v0 - W[0])
    for j in range(W.size - 1):
        V[:, j + 1] = advance_force_points(V[:, j], side, W[j + 1], step)
    tol = 10.0 * math.sqrt(step) if swallow_tol is None else float(swallow_tol)
    W = W.copy()
    W.setflags(write=False)
    V.setflags(write=False)
    return ChordalChain(float(step), W, V, tol)


def advance_force_points(v, side, W_new, h):
    """One frozen-driver step for force points on the real line.

    A point the new driver has overtaken is placed at the slit edge
    W_new + side * 2 sqrt(h), which is where the image of the driver's own
    previous position lands.
    """
    v = np.asarray(v, dtype=float)
    d = v - W_new
    crossed = (d * side) <= 0
    out = W_new + side * np.sqrt(d * d + 4.0 * h)
    return np.where(crossed, W_new + side * 2.0 * math.sqrt(h), out)


def green_in_chain(chain: RadialChain, z, w, t: float | None = None):
    """G_{D_t}(z, w) = G_D(g_t(z), g_t(w))."""
    r = chain.flow(np.array([z, w], dtype=complex), t)
    if not r.alive.all():
        raise InvalidState("point swallowed")
    return float(disc_green(r.w[0], r.w[1]))


def flow_history(chain, z, k_max: int | None = None):
    """g_{t_k}(z) at every grid time k <= k_max; NaN once swallowed.

    Works for radial and chordal chains alike.  Returns (values, t_s) with
    values of shape (k_max + 1, len(z)).
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    n = chain.n_steps if k_max is None else int(k_max)
    radial = isinstance(chain, RadialChain)
    inc = radial_increment if radial else chordal_increment
    drv = chain.driving
    out = np.full((n + 1, z.size), np.nan + 0j)
    out[0] = z
    ts = np.full(z.size, np.inf)
    w = z.copy()
    live = np.abs(w - drv[0]) >= chain.swallow_tol
    ts[~live] = 0.0
    for j in range(n):
        if not live.any():
            break
        nw, _ = inc(w[live], drv[j + 1], chain.step)
        w[live] = nw
        gone = np.zeros(z.size, dtype=bool)
        gone[live] = np.abs(nw - drv[j + 1]) < chain.swallow_tol
        ts[gone] = (j + 1) * chain.step
        live &= ~gone
        out[j + 1, live] = w[live]
    return out, ts


def hadamard_residuals(chain: RadialChain, z: complex, w: complex):
    """Finite-difference dG_{D_t}(z, w)/dt against -2 pi P^{g(z)} P^{g(w)}.

    Over each step the driver is frozen at its right-end value, so the kernel
    product is averaged over the two ends of the step with that driver.
    Returns (fd, predicted) arrays, one entry per step while both points live.
    """
    h, ts = flow_history(chain, np.array([z, w], dtype=complex))
    ok = np.all(np.isfinite(h), axis=1)
    n = int(np.argmin(ok)) if not ok.all() else h.shape[0]
    h = h[:n]
    G = disc_green(h[:, 0], h[:, 1])
    fd = np.diff(G) / chain.step
    xi = chain.driving[1:n, None]
    p0 = poisson_kernel(h[:-1], xi)
    p1 = poisson_kernel(h[1:], xi)
    pred = -2.0 * math.pi * 0.5 * (p0[:, 0] * p0[:, 1] + p1[:, 0] * p1[:, 1])
    return fd, pred
