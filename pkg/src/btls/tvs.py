"""Two-valued local sets A(-a, b).

Reduced mode: seen from a target point the harmonic function is 2*lambda/pi
times a Brownian motion in the log-conformal-radius clock, so the label and
the conformal-radius drop are the exit side and exit time of that motion from
(-a pi / (2 lambda), b pi / (2 lambda)).

Geometric mode iterates level lines towards a tracked target.  Everything is
done in the radial picture centred at the target, where every level line is a
radial SLE(4, rho) whose force points are the jump points of the boundary
data; these weights always sum to kappa - 6 = -2, so the same engine serves
SLE(4; -1, -1), SLE(4, -1) and their generalisations.  The Loewner time is
exactly the drop of log conformal radius seen from the target.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import LAMBDA
from .errors import InvalidArgument, NoSuchBTLS, NumericalFailure
from .harness import ExitLawOracle
from .loewner import boundary_angle_flow, evolve_radial
from .paths import exit_batch, first_exit
from .seeding import SeedLike, rng as as_rng

TWO_PI = 2.0 * math.pi
_VTOL = 1e-9


# ---------------------------------------------------------------------------
# specs

@dataclass(frozen=True)
class TwoValuedSpec:
    a: float
    b: float

    @property
    def trivial(self) -> bool:
        return False

    @property
    def interval(self) -> tuple[float, float]:
        """Exit interval of the value Brownian motion."""
        s = math.pi / (2.0 * LAMBDA)
        return -self.a * s, self.b * s

    @property
    def p_lower(self) -> float:
        return self.b / (self.a + self.b)

    @property
    def exponent(self) -> float:
        return 2.0 * LAMBDA ** 2 / (self.a + self.b) ** 2

    def oracle(self) -> ExitLawOracle:
        lo, hi = self.interval
        return ExitLawOracle(lo, hi)


@dataclass(frozen=True)
class TrivialSpec:
    """a = 0 or b = 0: the empty set, harmonic function identically 0."""

    a: float
    b: float

    @property
    def trivial(self) -> bool:
        return True


def validate(a: float, b: float):
    a = float(a)
    b = float(b)
    if not (math.isfinite(a) and math.isfinite(b)) or a < 0 or b < 0:
        raise InvalidArgument(f"need a, b >= 0, got a={a}, b={b}")
    if a == 0.0 or b == 0.0:
        return TrivialSpec(a, b)
    thr = 2.0 * LAMBDA
    if a + b < thr * (1.0 - 1e-12):
        raise NoSuchBTLS(a, b, thr)
    return TwoValuedSpec(a, b)


# ---------------------------------------------------------------------------
# reduced mode

@dataclass(frozen=True)
class ValueOutcome:
    label: float
    log_crad_drop: float
    truncated: bool = False


def sample_value(seed: SeedLike, spec, step: float = 1e-3) -> ValueOutcome:
    if spec.trivial:
        return ValueOutcome(0.0, 0.0)
    r = first_exit(as_rng(seed), step, spec.interval)
    lab = spec.b if r.side.value == "upper" else -spec.a
    return ValueOutcome(lab, r.exit_time)


@dataclass(frozen=True)
class ValueBatch:
    label: np.ndarray
    log_crad_drop: np.ndarray
    exited: np.ndarray

    @property
    def signed(self) -> np.ndarray:
        return np.sign(self.label) * self.log_crad_drop


def sample_values(master_seed: int, spec, N: int, step: float = 1e-3,
                  stream: str = "tvs", max_time: float = math.inf) -> ValueBatch:
    if spec.trivial:
        return ValueBatch(np.zeros(N), np.zeros(N), np.ones(N, dtype=bool))
    b = exit_batch(master_seed, f"{stream}/{spec.a!r}/{spec.b!r}", N, step, spec.interval,
                   max_time=max_time)
    lab = np.where(b.upper, spec.b, -spec.a)
    return ValueBatch(lab, b.times, b.exited)


def _contains(inner, outer) -> bool:
    return inner.a <= outer.a + _VTOL and inner.b <= outer.b + _VTOL


def nested_sample(seed: SeedLike, inner, outer, step: float = 1e-3):
    """Coupled (inner, outer) outcomes: the outer run continues the inner
    Brownian path from its exit point."""
    if inner.trivial or outer.trivial:
        raise InvalidArgument("nested_sample needs two nontrivial specs")
    if not _contains(inner, outer):
        raise InvalidArgument("inner interval [-a, b] must lie inside the outer one")
    g = as_rng(seed)
    r = first_exit(g, step, inner.interval)
    lab = inner.b if r.side.value == "upper" else -inner.a
    first = ValueOutcome(lab, r.exit_time)
    lo, hi = outer.interval
    x = r.exit_value
    if x <= lo + 1e-12 or x >= hi - 1e-12:
        olab = outer.b if x > 0 else -outer.a
        return first, ValueOutcome(olab, r.exit_time)
    r2 = first_exit(g, step, (lo, hi), start=x)
    olab = outer.b if r2.side.value == "upper" else -outer.a
    return first, ValueOutcome(olab, r.exit_time + r2.exit_time)


def nested_batch(master_seed: int, inner, outer, N: int, step: float = 1e-3):
    """Vectorised nested_sample; returns (inner ValueBatch, outer ValueBatch)."""
    if not _contains(inner, outer):
        raise InvalidArgument("inner interval [-a, b] must lie inside the outer one")
    ib = sample_values(master_seed, inner, N, step, stream="nested-inner")
    lo, hi = outer.interval
    s = math.pi / (2.0 * LAMBDA)
    start = np.where(ib.label > 0, inner.b * s, -inner.a * s)
    out_t = ib.log_crad_drop.copy()
    out_lab = np.where(ib.label > 0, outer.b, -outer.a).astype(float)
    for side, x in ((1, inner.b * s), (-1, -inner.a * s)):
        sel = np.nonzero(np.sign(ib.label) == side)[0]
        if sel.size == 0 or x <= lo + 1e-12 or x >= hi - 1e-12:
            continue
        # continuation streams are indexed by replica so that N -> N+1 is stable
        cont = exit_batch(master_seed, f"nested-cont/{side}", N, step, (lo, hi), start=x)
        out_t[sel] += cont.times[sel]
        out_lab[sel] = np.where(cont.upper[sel], outer.b, -outer.a)
    return ib, ValueBatch(out_lab, out_t, np.ones(N, dtype=bool))


def decay_exponent(spec, r_grid=None, N: int = 10**6, step: float | None = None,
                   master_seed: int = 0):
    from .cle import decay_from_times, default_r_grid

    if spec.trivial:
        raise InvalidArgument("trivial spec has no decay")
    o = spec.oracle()
    if r_grid is None:
        r_grid = default_r_grid(o.decay_rate, N)
    r_grid = np.asarray(r_grid, dtype=float)
    if r_grid.size < 3:
        raise InvalidArgument("need at least 3 grid points")
    step = 1e-3 * o.length ** 2 if step is None else step
    t_cap = math.log(1.0 / float(np.min(r_grid))) + 1.0
    b = sample_values(master_seed, spec, N, step, stream="decay", max_time=t_cap)
    times = np.where(b.exited, b.log_crad_drop, np.inf)
    return decay_from_times(times, r_grid, o.decay_rate, N)


# ---------------------------------------------------------------------------
# geometric mode

class NodeStatus(str, enum.Enum):
    open = "open"
    closed = "closed"
    truncated = "truncated"


@dataclass
class ComponentNode:
    """Boundary data of the target's component after a level line.

    ``angles`` are absolute positions on the unit circle of the uniformised
    component (uniformizer: the Loewner chain up to ``time``), ``values[k]``
    the value on the arc running ccw from ``angles[k]``.
    """

    depth: int
    time: float
    angles: np.ndarray
    values: np.ndarray
    status: NodeStatus
    label: float | None = None

    @property
    def target_value(self) -> float:
        return _circle_mean(self.angles, self.values)


@dataclass
class LineRecord:
    level: float
    t0: float
    t1: float
    value_at_end: float
    interface: tuple


@dataclass
class GeometricBuild:
    spec: TwoValuedSpec
    outcome: ValueOutcome
    status: NodeStatus
    nodes: list
    lines: list
    xi: np.ndarray | None
    step: float
    value_path: np.ndarray | None = None

    @property
    def samples(self) -> list:
        """(time, value at the target) at the end of every level line."""
        return [(0.0, 0.0)] + [(ln.t1, ln.value_at_end) for ln in self.lines]

    def chain(self):
        if self.xi is None:
            raise InvalidArgument("build was run without record_driver")
        return evolve_radial(self.xi, self.step)

    def line_trace(self, index: int = 0, every: int = 1) -> np.ndarray:
        """Tip positions of one level line, pulled back to the original disc."""
        ln = self.lines[index]
        ch = self.chain()
        k0 = int(round(ln.t0 / self.step))
        k1 = int(round(ln.t1 / self.step))
        n = ch.n_steps
        ks = np.arange(k0 + 1, min(k1, n) + 1, every)
        pts = ch.driving[ks].astype(complex)
        from .loewner import radial_increment_inv
        for j in range(int(ks.max()) - 1 if ks.size else -1, -1, -1):
            sel = ks > j
            pts[sel] = radial_increment_inv(pts[sel], ch.driving[j + 1], self.step)
        return pts


def _circle_mean(angles, values) -> float:
    if len(angles) == 0:
        return float(values[0]) if len(values) else 0.0
    a = np.mod(np.asarray(angles), TWO_PI)
    o = np.argsort(a)
    a = a[o]
    v = np.asarray(values)[o]
    arcs = np.diff(np.concatenate([a, [a[0] + TWO_PI]]))
    return float(np.dot(v, arcs) / TWO_PI)


def _line_value(phi, val, hi_v) -> float:
    """Target value during a line: offsets phi from the tip, hi_v on the
    arc just ccw of the tip."""
    p = np.concatenate([[0.0], np.clip(phi, 0.0, TWO_PI), [TWO_PI]])
    v = np.concatenate([[hi_v], val])
    return float(np.dot(v, np.diff(p)) / TWO_PI)


def _compress_circle(angles, values):
    """Sort and merge neighbouring arcs carrying equal values."""
    a = np.mod(np.asarray(angles, dtype=float), TWO_PI)
    v = np.asarray(values, dtype=float)
    if a.size == 0:
        return a, v
    o = np.argsort(a, kind="stable")
    a, v = a[o], v[o]
    keep = np.abs(v - np.roll(v, 1)) > _VTOL
    if not keep.any():
        return np.empty(0), v[:1]
    return a[keep], v[keep]


class _Engine:
    """Radial level-line engine for one tracked target (the origin)."""

    def __init__(self, g: np.random.Generator, step: float, t_max: float, record: bool,
                 track: bool = False):
        self.g = g
        self.h = step
        self.sqh = math.sqrt(step)
        self.t_max = t_max
        self.t = 0.0
        self.W = 0.0
        self.k = 0
        self.angles = np.empty(0)
        self.values = np.array([0.0])
        self.record = record
        self.xi = [1.0 + 0j] if record else None
        self.lines: list[LineRecord] = []
        self.nodes: list[ComponentNode] = []
        self.truncated = False
        # stored values relate to field values by  field = sign * stored + shift
        self.sign = 1.0
        self.shift = 0.0
        # target value after every grid step (field coordinates)
        self.vpath = [0.0] if track else None

    def field(self, v):
        return self.sign * np.asarray(v) + self.shift

    # -- data helpers -------------------------------------------------------
    def constant_value(self):
        if self.angles.size == 0:
            return float(self.values[0])
        return None

    def value_at_target(self):
        return _circle_mean(self.angles, self.values)

    def _arc_containing(self, value):
        """Index of the longest arc carrying ``value`` (or None)."""
        a, v = self.angles, self.values
        arcs = np.diff(np.concatenate([a, [a[0] + TWO_PI]]))
        cand = np.nonzero(np.abs(v - value) < _VTOL)[0]
        if cand.size == 0:
            return None
        return int(cand[np.argmax(arcs[cand])])

    # -- one level line -----------------------------------------------------
    def run_line(self, c: float) -> bool:
        """Trace one c-level line; returns False if truncated."""
        lo_v, hi_v = c - LAMBDA, c + LAMBDA
        const = self.constant_value()
        if const is not None:
            x = self.W
            y = x + math.pi
            v_ccw = v_cw = const
            pts = np.empty(0)
            vals = np.empty(0)
        else:
            k = self._arc_containing(hi_v)
            n = self.angles.size
            if k is not None:
                x = self.angles[k]
                y = self.angles[(k + 1) % n]
                v_ccw = self.values[k]
                v_cw = self.values[k - 1]
            else:
                k = self._arc_containing(lo_v)
                if k is None:
                    raise InvalidArgument("boundary data has no arc at c +- lambda")
                x = self.angles[(k + 1) % n]
                y = self.angles[k]
                v_ccw = self.values[(k + 1) % n]
                v_cw = self.values[k]
            # drop the jump point at x (absorbed by the tip)
            off = np.mod(self.angles - x, TWO_PI)
            at_x = off < 1e-15
            o = np.argsort(off[~at_x], kind="stable")
            pts = off[~at_x][o]
            vals = self.values[~at_x][o]
        self.W = float(x)
        off_y = float(np.mod(y - x, TWO_PI))
        # force points beside the tip: ccw jump c+lambda -> v_ccw, and the jump
        # from the arc cw of x (value v_cw, carried by the last point) into c-lambda
        pts = np.concatenate([[0.0], pts, [TWO_PI]])
        vals = np.concatenate([[v_ccw], vals, [lo_v]])
        o = np.argsort(pts, kind="stable")
        phi, val = self._line_compress(pts[o], vals[o], hi_v)
        t0 = self.t
        ended = False
        while not ended:
            if self.t >= self.t_max:
                self.truncated = True
                self._store_state(phi, val, hi_v)
                return False
            phi, val, off_y, ended = self._step(phi, val, off_y, lo_v, hi_v)
        lo_f, hi_f = sorted(float(x) for x in self.field([lo_v, hi_v]))
        self.lines.append(LineRecord(float(self.field(c)), t0, self.t,
                                     float(self.field(self.value_at_target())), (lo_f, hi_f)))
        return True

    @staticmethod
    def _line_compress(phi, val, hi_v):
        prev = np.concatenate([[hi_v], val[:-1]])
        keep = np.abs(val - prev) > _VTOL
        return phi[keep], val[keep]

    def _solve_dW(self, phi, rho, dB):
        """Driver increment making sum(rho * phi) move by exactly 4 dB.

        The target value is -lambda/(2 pi) sum(rho * phi) + const, so this is
        what keeps it an exact martingale on the grid; an explicit Euler drift
        is badly biased whenever a force point sits next to the tip.
        Arrays here hold a handful of points, so plain floats are faster.
        """
        if phi.size == 0:
            return 2.0 * dB
        ph = phi.tolist()
        rh = rho.tolist()
        target = 4.0 * dB + sum(r * p for r, p in zip(rh, ph))
        sh = math.exp(-self.h / 2.0)
        eh = sh * sh
        acos, cos, sin, sqrt = math.acos, math.cos, math.sin, math.sqrt

        def f(x, deriv=False):
            tot = 0.0
            der = 0.0
            for r, p in zip(rh, ph):
                psi = p - x
                if psi <= 0.0:
                    tot += r * 2.0 * acos(sh)
                elif psi >= TWO_PI:
                    tot += r * 2.0 * acos(-sh)
                else:
                    c = cos(0.5 * psi)
                    tot += r * 2.0 * acos(sh * c)
                    if deriv:
                        der += r * sh * sin(0.5 * psi) / sqrt(max(1.0 - eh * c * c, 1e-300))
            return tot - target, -der

        # safeguarded Newton from the noise-only guess, bracketing as fallback
        x = 2.0 * dB
        lim = 4.0 * self.sqh + abs(x)
        for _ in range(10):
            fx, fp = f(x, True)
            if abs(fx) < 1e-13:
                return x
            if not fp > 1e-8:
                break
            dx = fx / fp
            if abs(dx) > lim:
                break
            x -= dx
            if abs(dx) < 1e-14:
                return x

        def g(x):
            return f(x)[0]

        x0 = 2.0 * dB
        f0 = g(x0)
        if f0 == 0.0:
            return x0
        step = max(self.sqh, abs(f0))
        d = -1.0 if f0 > 0 else 1.0
        a, fa = x0, f0
        while abs(a - x0) < TWO_PI:
            b = a + d * step
            fb = g(b)
            if fa * fb <= 0.0:
                lo, hi = (a, b) if a < b else (b, a)
                return float(optimize.brentq(g, lo, hi, xtol=1e-13, rtol=1e-12))
            if fb == fa:
                # every force point on this side is already dragged: the value
                # has reached its extreme, which only happens as the marker
                # is swallowed, so the tip runs on through it
                return b
            a, fa = b, fb
            step *= 2.0
        raise NumericalFailure("no driver increment balances the level-line martingale")

    def _step(self, phi, val, off_y, lo_v, hi_v):
        h = self.h
        prev = np.concatenate([[hi_v], val[:-1]])
        rho = (val - prev) / LAMBDA
        dB = self.g.standard_normal() * self.sqh
        dW = self._solve_dW(phi, rho, dB)
        self.W += dW
        self.t += h
        self.k += 1
        if self.record:
            self.xi.append(complex(math.cos(self.W), math.sin(self.W)))
        side = 1 if dW > 0 else -1
        if dW > 0:
            passed = phi < dW
            ended = off_y < dW
        else:
            passed = phi > TWO_PI + dW
            ended = off_y > TWO_PI + dW
        if not ended:
            # the marker may have been hit inside the step (bridge correction,
            # the driver has variance 4h per step)
            d0, d1 = off_y, off_y - dW
            e0, e1 = TWO_PI - off_y, TWO_PI - off_y + dW
            p_ccw = math.exp(-0.5 * d0 * d1 / h)
            p_cw = math.exp(-0.5 * e0 * e1 / h)
            if p_ccw + p_cw > 1e-14:
                u = self.g.random()
                if u < p_ccw:
                    ended, passed, side = True, passed | (phi < off_y), 1
                elif u < p_ccw + p_cw:
                    ended, passed, side = True, passed | (phi > off_y), -1
        new_phi = phi - dW
        if ended:
            # the target is cut off from y: close the circle, the tip becomes
            # the jump from c-lambda into whatever lies ccw of it
            tip_val = val[np.nonzero(passed)[0].max()] if (side > 0 and passed.any()) else hi_v
            keep = ~passed
            rest = boundary_angle_flow(np.mod(new_phi[keep], TWO_PI), h)
            angs = np.concatenate([[self.W], self.W + rest])
            vls = np.concatenate([[tip_val], val[keep]])
            self.angles, self.values = _compress_circle(angs, vls)
            if self.vpath is not None:
                self.vpath.append(float(self.field(self.value_at_target())))
            return phi, val, off_y, True
        if passed.any():
            # the overtaken cluster merges into one point at the tip carrying
            # the summed weight
            idx = np.nonzero(passed)[0]
            keep = ~passed
            if dW > 0:
                new_phi = np.concatenate([[0.0], new_phi[keep]])
                val = np.concatenate([[val[idx.max()]], val[keep]])
            else:
                new_phi = np.concatenate([new_phi[keep], [TWO_PI]])
                val = np.concatenate([val[keep], [lo_v]])
        phi = boundary_angle_flow(np.clip(new_phi, 0.0, TWO_PI), h)
        off_y = float(boundary_angle_flow(off_y - dW, h))
        if passed.any():
            phi, val = self._line_compress(phi, val, hi_v)
        if self.vpath is not None:
            self.vpath.append(float(self.field(_line_value(phi, val, hi_v))))
        return phi, val, off_y, False

    def _store_state(self, phi, val, hi_v):
        angs = np.concatenate([[self.W], self.W + phi])
        vls = np.concatenate([[hi_v], val])
        self.angles, self.values = _compress_circle(angs, vls)

    # -- ladder ---------------------------------------------------------------
    def gap2(self, c: float) -> float | None:
        targets = (c - LAMBDA, c + LAMBDA)
        while True:
            v = self.constant_value()
            if v is not None and min(abs(v - targets[0]), abs(v - targets[1])) < _VTOL:
                return v
            if not self.run_line(c):
                return None
            self.nodes.append(ComponentNode(len(self.nodes) + 1, self.t, self.angles.copy(),
                                            self.field(self.values), NodeStatus.open))

    def sub_build(self, lo: float, hi: float) -> float | None:
        """Run until the target's component has constant data in {lo, hi}."""
        u = self.constant_value()
        if u is None:
            raise InvalidArgument("sub_build needs constant boundary data")
        gap = hi - lo
        if abs(u - lo) < _VTOL or abs(u - hi) < _VTOL:
            return u
        if abs(gap - 2 * LAMBDA) < 1e-9:
            return self.gap2(0.5 * (lo + hi))
        n = gap / LAMBDA
        if abs(n - round(n)) < 1e-9 and round(n) >= 3:
            m = np.arange(1, int(round(n)))
            cs = hi - m * LAMBDA
            ok = np.abs(cs - u) < LAMBDA - 1e-12
            c = float(cs[ok][np.argmin(np.abs(cs[ok] - u))])
            v = self.gap2(c)
            while v is not None and abs(v - lo) > _VTOL and abs(v - hi) > _VTOL:
                v = self.gap2(v)
            return v
        return self._general(u, lo, hi)

    def _general(self, u: float, lo: float, hi: float) -> float | None:
        a, b = u - lo, hi - u
        flip = a <= LAMBDA
        if flip:
            # mirror the values about u so that a > lambda
            self.values = 2 * u - self.values
            self.shift += 2 * u * self.sign
            self.sign = -self.sign
            a, b = b, a
        A, Bv = u - a, u + b
        n2 = int(math.floor((b + a) / LAMBDA + 1e-12))
        low_mid = Bv - n2 * LAMBDA
        d = (a + b) - n2 * LAMBDA
        v = self.sub_build(low_mid, Bv)
        while v is not None and abs(v - A) > _VTOL and abs(v - Bv) > _VTOL:
            if abs(v - low_mid) < _VTOL:
                v = self.sub_build(A, Bv - d)
            else:
                v = self.sub_build(low_mid, Bv)
        if flip:
            self.values = 2 * u - self.values
            self.sign = -self.sign
            self.shift -= 2 * u * self.sign
            if v is not None:
                v = 2 * u - v
        return v


def build_geometric(seed: SeedLike, spec, delta: float = 1e-3, step: float = 1e-3,
                    record_driver: bool = False, track_value: bool = False) -> GeometricBuild:
    """Level-line construction of A(-a, b) around the target 0.

    The run is truncated, and reported as such, once the conformal radius of
    the target's component drops below ``delta``.
    """
    if spec.trivial:
        out = ValueOutcome(0.0, 0.0)
        return GeometricBuild(spec, out, NodeStatus.closed, [], [], None, step)
    if not delta > 0:
        raise InvalidArgument("delta must be positive")
    eng = _Engine(as_rng(seed), step, math.log(1.0 / delta), record_driver, track_value)
    v = eng.sub_build(-spec.a, spec.b)
    if v is None:
        status = NodeStatus.truncated
        out = ValueOutcome(math.nan, eng.t, truncated=True)
    else:
        status = NodeStatus.closed
        lab = spec.b if abs(v - spec.b) < _VTOL else -spec.a
        out = ValueOutcome(lab, eng.t)
    if eng.nodes:
        eng.nodes[-1].status = status
        eng.nodes[-1].label = out.label if status is NodeStatus.closed else None
    xi = np.asarray(eng.xi) if record_driver else None
    vp = np.asarray(eng.vpath) if track_value else None
    return GeometricBuild(spec, out, status, eng.nodes, eng.lines, xi, step, vp)


@dataclass
class GeometricBatch:
    spec: TwoValuedSpec
    label: np.ndarray
    log_crad_drop: np.ndarray
    truncated: np.ndarray
    builds: list = field(repr=False, default_factory=list)

    @property
    def truncation_fraction(self) -> float:
        return float(self.truncated.mean()) if self.truncated.size else 0.0

    def censored_signed(self, t_cut: float) -> np.ndarray:
        return censored_signed(self.label, self.log_crad_drop, ~self.truncated, t_cut)


def censored_signed(label, drop, exited, t_cut: float) -> np.ndarray:
    """sign(label) * drop, with anything unresolved by ``t_cut`` mapped to 0.

    Applying the same censoring to both arms makes geometric runs (which stop
    at conformal radius delta) comparable with reduced-mode samples.
    """
    label = np.asarray(label, dtype=float)
    drop = np.asarray(drop, dtype=float)
    ok = np.asarray(exited, dtype=bool) & (drop <= t_cut)
    return np.where(ok, np.sign(np.nan_to_num(label)) * drop, 0.0)


def sample_geometric(master_seed: int, spec, N: int, delta: float = 1e-3, step: float = 1e-3,
                     stream: str = "tvs-geo", track_value: bool = True) -> GeometricBatch:
    from .seeding import derive

    builds = []
    for k in range(N):
        g = np.random.default_rng(derive(master_seed, f"{stream}/{spec.a!r}/{spec.b!r}", k))
        builds.append(build_geometric(g, spec, delta, step, track_value=track_value))
    lab = np.array([b.outcome.label for b in builds], dtype=float)
    drop = np.array([b.outcome.log_crad_drop for b in builds], dtype=float)
    tr = np.array([b.outcome.truncated for b in builds], dtype=bool)
    return GeometricBatch(spec, lab, drop, tr, builds)


def martingale_stats(builds) -> dict:
    """Drift and variance per unit log-conformal-radius time of the target value.

    With per-step value paths the estimates use every grid increment; the
    line-end samples are also summarised (``line_end_rate``), but that ratio
    of heavy-tailed sums is far noisier and is reported only.
    """
    dh = []
    dt = []
    gaps = []
    le_h = []
    le_t = []
    for b in builds:
        s = np.asarray(b.samples, dtype=float)
        if s.shape[0] > 1:
            le_h.append(np.diff(s[:, 1]))
            le_t.append(np.diff(s[:, 0]))
        if b.value_path is not None and b.value_path.size > 1:
            dh.append(np.diff(b.value_path))
            dt.append(np.full(b.value_path.size - 1, b.step))
        gaps.extend(ln.interface[1] - ln.interface[0] for ln in b.lines)
    if not dh:
        dh, dt = le_h, le_t
    if not dh:
        raise InvalidArgument("no completed level lines")
    dh = np.concatenate(dh)
    dt = np.concatenate(dt)
    T = float(dt.sum())
    drift = float(dh.sum() / T)
    rate = float(np.sum(dh ** 2) / T)
    out = {"drift": drift, "drift_se": math.sqrt(rate / T), "variance_rate": rate,
           "target_rate": (2 * LAMBDA / math.pi) ** 2, "increments": int(dh.size),
           "total_time": T,
           "max_gap_error": float(np.max(np.abs(np.asarray(gaps) - 2 * LAMBDA))) if gaps else 0.0}
    if le_h:
        h = np.concatenate(le_h)
        t = np.concatenate(le_t)
        out["line_end_rate"] = float(np.sum(h ** 2) / t.sum())
        out["line_end_increments"] = int(h.size)
    return out
