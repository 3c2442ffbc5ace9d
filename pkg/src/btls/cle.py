"""Per-point CLE(4)^M: labels, conformal-radius drops and one-point decay.

Reduced mode uses the identity that, seen from a target point, the drop of
log conformal radius until the loop around it is closed is the exit time of
the driving Brownian motion from (-M pi, M pi).  Geometric mode runs the
radial SLE(4, -2) exploration and reads the drop off the Loewner chain.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import LAMBDA
from .errors import InvalidArgument
from .harness import ExitLawOracle, exponent_fit, fit_window
from .loewner import flow_history, mobius_to_origin, poisson_kernel
from .paths import exit_batch, first_exit
from .seeding import SeedLike, derive, rng as as_rng
from .sle import UntilExit, radial_sle42


class Mode(str, enum.Enum):
    reduced = "reduced"
    geometric = "geometric"


@dataclass(frozen=True)
class TargetRecord:
    z: complex
    M: int
    log_crad_drop: float
    label: float
    nested_labels: tuple = ()
    mode: Mode = Mode.reduced

    @property
    def sign(self) -> int:
        return 1 if self.label > 0 else -1


def _check_z(z):
    z = complex(z)
    if not abs(z) < 1:
        raise InvalidArgument(f"target {z} not in the open unit disc")
    return z


def sample_cle_point(seed: SeedLike, z: complex = 0j, M: int = 1, mode="reduced",
                     step: float = 1e-3) -> TargetRecord:
    z = _check_z(z)
    if int(M) != M or M < 1:
        raise InvalidArgument("M must be a positive integer")
    M = int(M)
    mode = Mode(mode)
    g = as_rng(seed)
    if mode is Mode.reduced:
        # iterate CLE(4) one level at a time; the level labels form the walk
        walk = []
        pos = 0
        total = 0.0
        while abs(pos) < M:
            r = first_exit(g, step, (-math.pi, math.pi))
            total += r.exit_time
            pos += 1 if r.side.value == "upper" else -1
            walk.append(pos)
        return TargetRecord(z, M, total, 2 * LAMBDA * pos, tuple(walk), mode)
    # geometric: the exploration always targets 0; z is handled by the
    # automorphism sending z to 0, which leaves the relative drop unchanged
    drv = radial_sle42(g, step, horizon_rule=UntilExit(M))
    chain = drv.chain()
    fwd, _ = mobius_to_origin(z)
    w0 = fwd(np.array([z]))
    r = chain.flow(w0)
    crad = (1.0 - abs(r.w[0]) ** 2) / abs(r.dw[0])
    drop = -math.log(crad) + math.log(1.0 - abs(w0[0]) ** 2)
    walk = _walk_from_path(drv.B.values, M)
    return TargetRecord(z, M, drop, 2 * LAMBDA * M * drv.exit_sign, walk, mode)


def _walk_from_path(values, M):
    """Successive pi*Z levels reached by B, each level one step from the last."""
    walk = []
    pos = 0
    lv = values / math.pi
    i = 0
    n = lv.size
    while abs(pos) < M and i < n:
        rest = lv[i:]
        hit = np.nonzero(np.abs(rest - pos) >= 1.0 - 1e-12)[0]
        if hit.size == 0:
            break
        i += int(hit[0])
        pos += 1 if lv[i] > pos else -1
        walk.append(pos)
    return tuple(walk)


@dataclass(frozen=True)
class CleBatch:
    M: int
    log_crad_drop: np.ndarray
    label: np.ndarray

    @property
    def signed(self) -> np.ndarray:
        """sign(label) * drop: one number carrying the joint law."""
        return np.sign(self.label) * self.log_crad_drop


def sample_cle_batch(master_seed: int, N: int, M: int = 1, step: float = 1e-3,
                     stream: str = "cle") -> CleBatch:
    """N reduced-mode records via direct exits of (-M pi, M pi)."""
    b = exit_batch(master_seed, f"{stream}/M{M}", N, step, (-M * math.pi, M * math.pi))
    lab = np.where(b.upper, 2 * LAMBDA * M, -2 * LAMBDA * M)
    return CleBatch(M, b.times, lab)


def sample_cle_geometric(master_seed: int, N: int, M: int = 1, step: float = 1e-3,
                         stream: str = "cle-geo") -> CleBatch:
    drops = np.empty(N)
    labs = np.empty(N)
    for k in range(N):
        rec = sample_cle_point(np.random.default_rng(derive(master_seed, stream, M, k)),
                               0j, M, Mode.geometric, step)
        drops[k] = rec.log_crad_drop
        labs[k] = rec.label
    return CleBatch(M, drops, labs)


def nested_labels(seed: SeedLike, z: complex = 0j, n: int = 1, step: float = 1e-2):
    """Upsilon_1..Upsilon_n from independent per-level CLE(4) labels."""
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    _check_z(z)
    g = as_rng(seed)
    s = int(g.integers(0, 2**63 - 1))
    b = exit_batch(s, "nested", n, step, (-math.pi, math.pi))
    eps = np.where(b.upper, 1, -1)
    return np.cumsum(eps)


# ---------------------------------------------------------------------------
# one-point decay

@dataclass
class DecayResult:
    r_grid: np.ndarray
    probabilities: np.ndarray
    hits: np.ndarray
    window: np.ndarray
    exponent: float
    stderr: float
    oracle_rate: float
    N: int

    def rows(self):
        return list(zip(self.r_grid.tolist(), self.probabilities.tolist(), self.hits.tolist()))


def default_r_grid(rate: float, N: int, points: int = 40) -> np.ndarray:
    """Log-spaced radii from 1/16 down to where fewer than ~30 of N samples
    are expected, for a tail decaying like exp(-rate t)."""
    t_max = math.log(max(N, 100) / 30.0) / rate
    t = np.linspace(math.log(16.0), max(t_max, math.log(16.0) + 4.0), points)
    return np.exp(-t)


def decay_from_times(times, r_grid, oracle_rate: float, N: int | None = None) -> DecayResult:
    """Tail probabilities P(T > log 1/r) and the exponent fit on the window."""
    t = np.sort(np.asarray(times, dtype=float))
    N = t.size if N is None else N
    r = np.asarray(r_grid, dtype=float)
    if r.size < 3:
        raise InvalidArgument("need at least 3 grid points")
    if np.any(np.diff(r) >= 0):
        raise InvalidArgument("r_grid must be strictly decreasing")
    if np.any(r <= 0) or np.any(r >= 0.25):
        raise InvalidArgument("r_grid must lie in (0, 1/4)")
    thr = np.log(1.0 / r)
    hits = N - np.searchsorted(t, thr, side="right")
    p = hits / N
    win = fit_window(r, hits)
    if win.sum() < 3:
        raise InvalidArgument("fewer than 3 grid points inside the fit window")
    slope, se = exponent_fit(r[win], p[win])
    return DecayResult(r, p, hits, win, slope, se, oracle_rate, N)


def one_point_decay(M: int, r_grid=None, N: int = 10**6, step: float | None = None,
                    master_seed: int = 0) -> DecayResult:
    """Exponent of P(crad(0, carpet) < r) for CLE(4)^M from reduced-mode exits."""
    L = 2 * M * math.pi
    oracle = ExitLawOracle(-M * math.pi, M * math.pi)
    if r_grid is None:
        r_grid = default_r_grid(oracle.decay_rate, N)
    r_grid = np.asarray(r_grid, dtype=float)
    if r_grid.size < 3:
        raise InvalidArgument("need at least 3 grid points")
    step = 1e-3 * L * L if step is None else step
    t_cap = math.log(1.0 / float(np.min(r_grid))) + 1.0
    b = exit_batch(master_seed, f"decay/M{M}", N, step, (-M * math.pi, M * math.pi),
                   max_time=t_cap)
    times = np.where(b.exited, b.times, np.inf)
    return decay_from_times(times, r_grid, oracle.decay_rate, N)


# ---------------------------------------------------------------------------
# carpet raster

@dataclass
class CarpetRaster:
    resolution: int
    in_hull: np.ndarray
    alive: np.ndarray
    outside: np.ndarray
    log_crad: np.ndarray = field(repr=False)

    @property
    def in_hull_fraction(self) -> float:
        inside = ~self.outside
        return float(self.in_hull[inside].mean())

    def to_pgm(self, path) -> None:
        img = np.where(self.in_hull, 0, np.where(self.alive, 255, 128)).astype(np.uint8)
        with open(path, "wb") as fh:
            fh.write(f"P5 {self.resolution} {self.resolution} 255\n".encode())
            fh.write(img.tobytes())


def carpet_raster(seed: SeedLike, M: int = 1, resolution: int = 32,
                  n_branch_points: int | None = None, step: float = 1e-3) -> CarpetRaster:
    """Classify pixel cells of [-1, 1]^2 as meeting the CLE(4)^M carpet or not.

    Every pixel centre p follows the common exploration through its own
    clock B^p until either B^p leaves (-M pi, M pi), which closes the loop
    around p, or p is cut off from the root target (swallowed).  After the
    cut the exploration of p's component continues from B^p at that time;
    that continuation is sampled in reduced mode.  A cell meets the carpet
    when the conformal radius of p in its loop is below half a pixel.

    ``n_branch_points`` bounds how many targets are pushed through the chain
    at once (memory only; the output does not depend on it).
    """
    if resolution < 32:
        raise InvalidArgument("resolution must be >= 32")
    g = as_rng(seed)
    drv = radial_sle42(g, step, horizon_rule=UntilExit(M))
    chain = drv.chain()
    s = 2.0 / resolution
    c = -1.0 + s * (np.arange(resolution) + 0.5)
    X, Y = np.meshgrid(c, c[::-1])
    Z = (X + 1j * Y).ravel()
    outside = np.abs(Z) >= 1.0
    log_crad = np.full(Z.size, np.nan)
    idx = np.nonzero(~outside)[0]
    if n_branch_points is None:
        # about 40 bytes per target and step of history: keep a batch near 400 MB
        batch = max(1, min(idx.size, int(1e7 // (chain.n_steps + 1))))
    else:
        batch = max(1, int(n_branch_points))
    bound = M * math.pi
    cont_seed = int(g.integers(0, 2**63 - 1))
    for b0 in range(0, idx.size, batch):
        sel = idx[b0:b0 + batch]
        log_crad[sel] = _carpet_targets(drv, chain, Z[sel], bound, step, cont_seed, sel)
    in_hull = np.zeros(Z.size, dtype=bool)
    in_hull[~outside] = log_crad[~outside] < math.log(s / 2.0)
    alive = ~outside & ~in_hull
    shape = (resolution, resolution)
    return CarpetRaster(resolution, in_hull.reshape(shape), alive.reshape(shape),
                        outside.reshape(shape), log_crad.reshape(shape))


def _carpet_targets(drv, chain, zs, bound, step, cont_seed, ids):
    n = chain.n_steps
    hist, ts = flow_history(chain, zs)
    dB = np.diff(drv.B.values)
    P = poisson_kernel(hist[:n], drv.xi[:n, None])
    P = np.nan_to_num(P, nan=0.0)
    Bp = np.zeros((n + 1, zs.size))
    np.cumsum(2.0 * math.pi * P * dB[:, None], axis=0, out=Bp[1:])
    out = np.empty(zs.size)
    base = np.log(1.0 - np.abs(zs) ** 2)
    for i in range(zs.size):
        k_end = n if not np.isfinite(ts[i]) else int(round(ts[i] / step))
        traj = Bp[:k_end + 1, i]
        esc = np.nonzero(np.abs(traj) >= bound)[0]
        # log crad(p, D_t) = base - quadratic variation of B^p
        qv = np.concatenate([[0.0], np.cumsum((2.0 * math.pi * P[:k_end, i]) ** 2 * step)])
        if esc.size:
            out[i] = base[i] - qv[esc[0]]
            continue
        # cut off (or the root loop closed first): continue from B^p
        start = float(np.clip(traj[-1], -bound + 1e-9, bound - 1e-9))
        g = np.random.default_rng(derive(cont_seed, "carpet-cont", int(ids[i])))
        rem = first_exit(g, 1e-2, (-bound, bound), start).exit_time
        out[i] = base[i] - qv[-1] - rem
    return out
