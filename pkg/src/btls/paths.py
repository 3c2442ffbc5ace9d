"""Brownian paths, interval exits, excursions away from pi*Z and the
regularised cot integral that drives radial SLE(4, -2).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .seeding import SeedLike, derive, rng as as_rng


@dataclass(frozen=True)
class BrownianPath:
    step: float
    values: np.ndarray
    start: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.step

    @property
    def horizon(self) -> float:
        return (self.values.size - 1) * self.step

    def increments(self) -> np.ndarray:
        return np.diff(self.values)

    def negated(self) -> "BrownianPath":
        return BrownianPath(self.step, -self.values, -self.start)

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.times, self.values]), delimiter=",",
                   header="time,value", comments="")


def _n_steps(horizon: float, step: float) -> int:
    # guard against 1/1e-3 = 999.9999...
    return int(math.ceil(horizon / step - 1e-9))


def sample_brownian(seed: SeedLike, step: float, horizon: float, start: float = 0.0) -> BrownianPath:
    if not step > 0 or not horizon > 0:
        raise InvalidArgument("step and horizon must be positive")
    if horizon < step:
        raise InvalidArgument("horizon must be at least one step")
    n = _n_steps(horizon, step)
    g = as_rng(seed)
    vals = np.empty(n + 1)
    vals[0] = start
    np.cumsum(g.standard_normal(n) * math.sqrt(step), out=vals[1:])
    vals[1:] += start
    return BrownianPath(step, vals, start)


def refine(path: BrownianPath, seed: SeedLike) -> BrownianPath:
    """Halve the step by inserting Brownian-bridge midpoints.

    The coarse samples are kept, so the refined path shares every coarse
    increment with the original.
    """
    g = as_rng(seed)
    v = path.values
    mid = 0.5 * (v[:-1] + v[1:]) + g.standard_normal(v.size - 1) * math.sqrt(path.step / 4.0)
    out = np.empty(2 * v.size - 1)
    out[0::2] = v
    out[1::2] = mid
    return BrownianPath(path.step / 2.0, out, path.start)


# ---------------------------------------------------------------------------
# first exit

class Side(str, enum.Enum):
    lower = "lower"
    upper = "upper"


@dataclass(frozen=True)
class ExitResult:
    exit_time: float
    side: Side
    exit_value: float


@dataclass(frozen=True)
class ExitBatch:
    """Vectorised exit outcomes.  ``exited`` is False where ``max_time`` cut in."""

    times: np.ndarray
    upper: np.ndarray
    exited: np.ndarray
    lower_bound: float
    upper_bound: float

    def __len__(self):
        return self.times.size

    def values(self) -> np.ndarray:
        return np.where(self.upper, self.upper_bound, self.lower_bound)


def _check_interval(interval, start):
    lo, hi = float(interval[0]), float(interval[1])
    if not hi > lo:
        raise InvalidArgument(f"degenerate interval {interval!r}")
    if not lo < start < hi:
        raise InvalidArgument(f"start {start} not inside {interval!r}")
    return lo, hi


def _exit_chunked(g: np.random.Generator, n: int, lo: float, hi: float, start: float,
                  step: float, max_time: float, chunk: int):
    """Core loop: ``n`` independent paths, simulated ``chunk`` steps at a time.

    Between consecutive grid points inside the interval the bridge crosses a
    barrier with probability exp(-2 d1 d2 / step); the crossing is sampled and
    the exit is dated at the midpoint of the step in which it occurred.
    """
    times = np.full(n, np.inf)
    upper = np.zeros(n, dtype=bool)
    x = np.full(n, float(start))
    alive = np.arange(n)
    t0 = 0
    sq = math.sqrt(step)
    max_steps = math.inf if not math.isfinite(max_time) else int(math.ceil(max_time / step))
    while alive.size and t0 < max_steps:
        c = chunk if not math.isfinite(max_steps) else int(min(chunk, max_steps - t0))
        xa = x[alive]
        X = xa[:, None] + np.cumsum(g.standard_normal((alive.size, c)) * sq, axis=1)
        prev = np.empty_like(X)
        prev[:, 0] = xa
        prev[:, 1:] = X[:, :-1]
        u = g.random((alive.size, c))
        below = X <= lo
        above = X >= hi
        inside = ~(below | above)
        with np.errstate(over="ignore", invalid="ignore"):
            p_lo = np.where(inside, np.exp(-2.0 * (prev - lo) * (X - lo) / step), 0.0)
            p_hi = np.where(inside, np.exp(-2.0 * (hi - prev) * (hi - X) / step), 0.0)
        cross_lo = inside & (u < p_lo)
        cross_hi = inside & ~cross_lo & (u < p_lo + p_hi)
        hit = below | above | cross_lo | cross_hi
        any_hit = hit.any(axis=1)
        k = np.argmax(hit, axis=1)
        rows = np.nonzero(any_hit)[0]
        kk = k[rows]
        idx = alive[rows]
        times[idx] = (t0 + kk + 0.5) * step
        upper[idx] = above[rows, kk] | cross_hi[rows, kk]
        x[alive] = X[:, -1]
        alive = alive[~any_hit]
        t0 += c
    exited = np.isfinite(times)
    return times, upper, exited


def first_exit(seed: SeedLike, step: float, interval, start: float = 0.0,
               max_time: float = math.inf) -> ExitResult:
    if not step > 0:
        raise InvalidArgument("step must be positive")
    lo, hi = _check_interval(interval, start)
    g = as_rng(seed)
    times, upper, exited = _exit_chunked(g, 1, lo, hi, start, step, max_time, chunk=512)
    if not exited[0]:
        return ExitResult(math.inf, Side.upper, math.nan)
    side = Side.upper if upper[0] else Side.lower
    return ExitResult(float(times[0]), side, hi if upper[0] else lo)


def exit_batch(master_seed: int, stream: str, n: int, step: float, interval,
               start: float = 0.0, max_time: float = math.inf,
               block: int = 4096, chunk: int = 64) -> ExitBatch:
    """``n`` independent exits, generated in fixed-size seeded blocks.

    Each block is always simulated in full and then truncated, so the first
    ``n`` outcomes do not depend on how many were requested.
    """
    if not step > 0:
        raise InvalidArgument("step must be positive")
    if n < 0:
        raise InvalidArgument("n must be nonnegative")
    lo, hi = _check_interval(interval, start)
    n_blocks = -(-n // block)
    parts = []
    for b in range(n_blocks):
        g = np.random.default_rng(derive(master_seed, stream, b))
        parts.append(_exit_chunked(g, block, lo, hi, start, step, max_time, chunk))
    if parts:
        times = np.concatenate([p[0] for p in parts])[:n]
        upper = np.concatenate([p[1] for p in parts])[:n]
        exited = np.concatenate([p[2] for p in parts])[:n]
    else:
        times = np.empty(0)
        upper = np.empty(0, dtype=bool)
        exited = np.empty(0, dtype=bool)
    return ExitBatch(times, upper, exited, lo, hi)


def path_exit_index(path: BrownianPath, interval, seed: SeedLike = None):
    """First grid index at which ``path`` has left ``interval``, with bridge
    correction.  Returns ``(index, upper)`` or ``(None, None)``.

    The returned index is the right end of the step in which the exit occurred.
    """
    lo, hi = float(interval[0]), float(interval[1])
    v = path.values
    g = as_rng(seed)
    prev, nxt = v[:-1], v[1:]
    inside = (nxt > lo) & (nxt < hi)
    with np.errstate(over="ignore", invalid="ignore"):
        p_lo = np.where(inside, np.exp(-2.0 * (prev - lo) * (nxt - lo) / path.step), 0.0)
        p_hi = np.where(inside, np.exp(-2.0 * (hi - prev) * (hi - nxt) / path.step), 0.0)
    u = g.random(prev.size)
    cross_lo = inside & (u < p_lo)
    cross_hi = inside & ~cross_lo & (u < p_lo + p_hi)
    hit = ~inside | cross_lo | cross_hi
    if not hit.any():
        return None, None
    k = int(np.argmax(hit))
    up = bool(nxt[k] >= hi or cross_hi[k])
    return k + 1, up


# ---------------------------------------------------------------------------
# excursions away from pi*Z

class Jump(str, enum.Enum):
    zero = "zero"
    plus_pi = "plus_pi"
    minus_pi = "minus_pi"

    @property
    def sign(self) -> int:
        return {"zero": 0, "plus_pi": 1, "minus_pi": -1}[self.value]


@dataclass(frozen=True)
class Excursion:
    t0: float
    t1: float
    base_level: float
    jump: Jump
    i0: int = 0
    i1: int = 0

    @property
    def duration(self) -> float:
        return self.t1 - self.t0


def _touch_runs(values: np.ndarray, tol: float):
    """Runs of consecutive grid indices where the path is on pi*Z.

    A sample is on the lattice if it is within ``tol`` of it; a step that
    jumps over a lattice point marks its endpoint nearer to that point.
    Returns a list of ``(first, last, level)`` with ``level`` an integer.
    """
    m = np.rint(values / math.pi)
    near = np.abs(values - m * math.pi) < tol
    level = m.astype(np.int64)
    fl = np.floor(values / math.pi).astype(np.int64)
    jumped = np.nonzero(fl[1:] != fl[:-1])[0]
    for k in jumped:
        # lattice point crossed between k and k+1
        lp = max(fl[k], fl[k + 1])
        j = k if abs(values[k] - lp * math.pi) <= abs(values[k + 1] - lp * math.pi) else k + 1
        if not near[j]:
            near[j] = True
            level[j] = lp
    idx = np.nonzero(near)[0]
    if idx.size == 0:
        return []
    breaks = np.nonzero(np.diff(idx) > 1)[0]
    starts = np.concatenate([[0], breaks + 1])
    ends = np.concatenate([breaks, [idx.size - 1]])
    runs = []
    for s, e in zip(starts, ends):
        a, b = idx[s], idx[e]
        runs.append((int(a), int(b), int(level[a]), int(level[b])))
    return runs


def excursions(path: BrownianPath, min_duration: float | None = None,
               tol: float | None = None) -> list[Excursion]:
    """Excursions of the path between successive touchings of pi*Z."""
    if len(path) == 0:
        raise InvalidArgument("empty path")
    if min_duration is None:
        min_duration = 10.0 * path.step
    if tol is None:
        tol = 2.0 * math.sqrt(path.step)
    runs = _touch_runs(path.values, tol)
    out = []
    h = path.step
    for (a0, a1, la0, la1), (b0, b1, lb0, lb1) in zip(runs[:-1], runs[1:]):
        t0, t1 = a1 * h, b0 * h
        if t1 - t0 < min_duration:
            continue
        d = lb0 - la1
        jump = Jump.zero if d == 0 else (Jump.plus_pi if d > 0 else Jump.minus_pi)
        out.append(Excursion(t0, t1, la1 * math.pi, jump, a1, b0))
    return out


def match_excursions(coarse, fine, tol_time: float):
    """Greedy one-to-one matching of excursions by endpoint proximity.

    Returns the list of matched pairs; an excursion is matched when both
    endpoints agree within ``tol_time`` and the jump classes coincide.
    """
    used = np.zeros(len(fine), dtype=bool)
    f0 = np.array([e.t0 for e in fine])
    pairs = []
    for e in coarse:
        if len(fine) == 0:
            break
        cand = np.nonzero(~used & (np.abs(f0 - e.t0) <= tol_time))[0]
        for j in cand:
            f = fine[j]
            if abs(f.t1 - e.t1) <= tol_time and f.jump == e.jump:
                used[j] = True
                pairs.append((e, f))
                break
    return pairs


# ---------------------------------------------------------------------------
# regularised cot integral

@dataclass(frozen=True)
class RegularizedIntegral:
    epsilon: float
    values: np.ndarray
    step: float

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.step


def reduced_cot(x: np.ndarray, epsilon: float = 0.0):
    """cot(x) with the argument reduced by periodicity, and the indicator of
    d(x, pi*Z) >= epsilon.  Odd in ``x`` bit for bit.
    """
    x = np.asarray(x, dtype=float)
    s = np.sign(x)
    r = np.mod(np.abs(x), math.pi)
    d = np.minimum(r, math.pi - r)
    keep = d >= epsilon
    with np.errstate(divide="ignore"):
        c = np.where(keep, s / np.tan(np.where(keep, r, 1.0)), 0.0)
    return c, keep


def regularized_cot_integral(path: BrownianPath, epsilon: float) -> RegularizedIntegral:
    """Left-point Riemann sum of 1{d(B, pi*Z) >= eps} cot(B)."""
    if not epsilon > 0:
        raise InvalidArgument("epsilon must be positive")
    c, _ = reduced_cot(path.values[:-1], epsilon)
    vals = np.empty(path.values.size)
    vals[0] = 0.0
    np.cumsum(c * path.step, out=vals[1:])
    return RegularizedIntegral(float(epsilon), vals, path.step)
