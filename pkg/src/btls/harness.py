"""Statistical machinery and analytic oracles.

The exit-time law of Brownian motion from an interval is the common currency
of the whole package: conformal-radius drops of CLE(4)^M and of the two-valued
sets are all exit times, so every Monte Carlo estimate is ultimately checked
against :class:`ExitLawOracle`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats
from scipy.special import ndtr

from .errors import InvalidArgument


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n: int

    @classmethod
    def from_samples(cls, samples) -> "Estimate":
        x = np.asarray(samples, dtype=float)
        n = x.size
        if n == 0:
            raise InvalidArgument("empty sample")
        sd = float(x.std(ddof=1)) if n > 1 else 0.0
        return cls(float(x.mean()), sd / math.sqrt(n), n)

    @classmethod
    def from_bernoulli(cls, successes: int, n: int) -> "Estimate":
        if n <= 0:
            raise InvalidArgument("n must be positive")
        p = successes / n
        return cls(p, math.sqrt(max(p * (1 - p), 0.0) / n), n)

    def z_score(self, target: float, target_stderr: float = 0.0) -> float:
        scale = math.hypot(self.stderr, target_stderr)
        if scale == 0.0:
            return 0.0 if self.mean == target else math.inf
        return (self.mean - target) / scale

    def within(self, target: float, k: float = 3.0, target_stderr: float = 0.0) -> bool:
        return abs(self.z_score(target, target_stderr)) <= k


def binomial_band(p: float, n: int, k: float = 3.0) -> float:
    """Half-width of the k-sigma band of an empirical frequency under ``p``."""
    return k * math.sqrt(p * (1 - p) / n)


@dataclass
class Verdict:
    test: str
    statistic: float
    p: float | None
    passed: bool
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"test": self.test, "statistic": _clean(self.statistic),
               "p": _clean(self.p), "pass": bool(self.passed)}
        if self.detail:
            out["detail"] = {k: _clean(v) for k, v in self.detail.items()}
        return out


def _clean(v):
    if isinstance(v, (np.floating, np.integer)):
        v = v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_clean(x) for x in v.tolist()]
    return v


# ---------------------------------------------------------------------------
# exit-time laws

@dataclass(frozen=True)
class ExitLawOracle:
    """Law of the exit time of standard Brownian motion from ``(lower, upper)``."""

    lower: float
    upper: float
    start: float = 0.0
    series_terms: int = 200

    def __post_init__(self):
        if not self.lower < self.start < self.upper:
            raise InvalidArgument("need lower < start < upper")
        if self.series_terms < 10:
            raise InvalidArgument("series_terms must be >= 10")

    @property
    def length(self) -> float:
        return self.upper - self.lower

    @property
    def decay_rate(self) -> float:
        """Principal Dirichlet eigenvalue of (1/2) d^2/dx^2 on the interval."""
        return math.pi ** 2 / (2.0 * self.length ** 2)

    def survival(self, t):
        """P(T > t), vectorised over ``t``."""
        t = np.asarray(t, dtype=float)
        out = np.ones_like(t)
        L = self.length
        x = self.start - self.lower
        pos = t > 0
        big = pos & (t >= 0.05 * L * L)
        small = pos & ~big
        if big.any():
            k = np.arange(1, 2 * self.series_terms, 2, dtype=float)
            coef = 4.0 / (k * math.pi) * np.sin(k * math.pi * x / L)
            expo = np.exp(-np.outer(t[big], k * k) * (math.pi ** 2 / (2 * L * L)))
            out[big] = expo @ coef
        if small.any():
            ts = np.sqrt(t[small])[:, None]
            j = np.arange(-8, 9, dtype=float)[None, :]
            direct = ndtr((L - x + 2 * j * L) / ts) - ndtr((-x + 2 * j * L) / ts)
            mirror = ndtr((L + x + 2 * j * L) / ts) - ndtr((x + 2 * j * L) / ts)
            out[small] = (direct - mirror).sum(axis=1)
        out = np.clip(out, 0.0, 1.0)
        return out if out.ndim else float(out)

    def cdf(self, t):
        s = self.survival(t)
        return 1.0 - s

    def quantile(self, q: float) -> float:
        from scipy.optimize import brentq

        if not 0.0 < q < 1.0:
            raise InvalidArgument("q must lie in (0, 1)")
        hi = self.length ** 2
        while self.cdf(hi) < q:
            hi *= 2.0
        return brentq(lambda s: self.cdf(s) - q, 0.0, hi, xtol=1e-13, rtol=1e-13)

    def mean(self) -> float:
        return (self.start - self.lower) * (self.upper - self.start)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Inverse-CDF samples; used only to calibrate tests, never as a simulator."""
        u = rng.random(n)
        grid = np.concatenate([[0.0], np.geomspace(1e-4, 60.0, 6000)]) * self.length ** 2
        c = self.cdf(grid)
        return np.interp(u, c, grid)


def exit_cdf(oracle: ExitLawOracle, t):
    if np.any(np.asarray(t) < 0):
        raise InvalidArgument("t must be nonnegative")
    return oracle.cdf(t)


def symmetric_exit_laplace(c: float, theta: float) -> float:
    """E exp(-theta T) for the exit time of (-c, c) from 0."""
    return 1.0 / math.cosh(c * math.sqrt(2.0 * theta))


# ---------------------------------------------------------------------------
# Kolmogorov–Smirnov

def kolmogorov_sf(x: float) -> float:
    """P(K > x) for the Kolmogorov distribution."""
    return float(stats.kstwobign.sf(x))


def ks_test(samples, cdf: Callable) -> tuple[float, float]:
    """One-sample KS statistic and asymptotic p-value."""
    x = np.asarray(samples, dtype=float)
    if x.size < 20:
        raise InvalidArgument("ks_test needs at least 20 samples")
    r = stats.kstest(x, lambda t: np.asarray(cdf(t), dtype=float), method="asymp")
    return float(r.statistic), float(r.pvalue)


def ks_2samp(a, b) -> tuple[float, float]:
    """Two-sample KS statistic and asymptotic p-value."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if min(a.size, b.size) < 20:
        raise InvalidArgument("ks_2samp needs at least 20 samples per arm")
    r = stats.ks_2samp(a, b, method="asymp")
    return float(r.statistic), float(r.pvalue)


# ---------------------------------------------------------------------------
# exponent regression

def exponent_fit(r_values, probabilities, weights=None) -> tuple[float, float]:
    """Least squares slope of log p against log r.

    ``weights`` are inverse variances of ``log p``; without them the slope
    error comes from the residual scatter.
    """
    r = np.asarray(r_values, dtype=float)
    p = np.asarray(probabilities, dtype=float)
    w = None if weights is None else np.asarray(weights, dtype=float)
    keep = p > 0
    if not keep.all():
        warnings.warn(f"dropping {int((~keep).sum())} points with zero probability")
        r, p = r[keep], p[keep]
        w = None if w is None else w[keep]
    if r.size < 3:
        raise InvalidArgument("exponent_fit needs at least 3 points with p > 0")
    x = np.log(r)
    y = np.log(p)
    ww = np.ones_like(x) if w is None else w
    xm = np.sum(ww * x) / np.sum(ww)
    ym = np.sum(ww * y) / np.sum(ww)
    sxx = np.sum(ww * (x - xm) ** 2)
    slope = float(np.sum(ww * (x - xm) * (y - ym)) / sxx)
    if w is None:
        resid = y - ym - slope * (x - xm)
        dof = max(x.size - 2, 1)
        stderr = math.sqrt(float(np.sum(resid ** 2)) / dof / sxx)
    else:
        stderr = math.sqrt(1.0 / sxx)
    return slope, stderr


def fit_window(r_values, hits, min_hits: int = 100, r_max: float = 1.0 / 16):
    """Mask of grid points used for exponent fits: r <= r_max with enough hits."""
    r = np.asarray(r_values, dtype=float)
    h = np.asarray(hits)
    return (r <= r_max * (1 + 1e-12)) & (h >= min_hits)


# ---------------------------------------------------------------------------
# box counting

def box_count(points, scales, offsets: int = 1, seed: int = 0):
    """Occupied-box counts per scale and the fitted box-counting dimension.

    With ``offsets > 1`` the grid is shifted randomly and the minimum count per
    scale is kept, which removes some of the grid-alignment noise.
    """
    pts = np.asarray(points)
    if np.iscomplexobj(pts):
        pts = np.column_stack([pts.real, pts.imag])
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    scales = np.asarray(scales, dtype=float)
    if scales.size < 3:
        raise InvalidArgument("box_count needs at least 3 scales")
    gen = np.random.default_rng(seed)
    counts = np.empty(scales.size, dtype=np.int64)
    origin = pts.min(axis=0)
    for i, s in enumerate(scales):
        best = None
        for j in range(offsets):
            shift = gen.random(pts.shape[1]) * s if j else 0.0
            cells = np.floor((pts - origin + shift) / s).astype(np.int64)
            c = np.unique(cells, axis=0).shape[0]
            best = c if best is None else min(best, c)
        counts[i] = best
    slope = np.polyfit(np.log(scales), np.log(counts), 1)[0]
    return counts, float(-slope)


def dimension_from_counts(scales, counts) -> float:
    return float(-np.polyfit(np.log(scales), np.log(counts), 1)[0])
