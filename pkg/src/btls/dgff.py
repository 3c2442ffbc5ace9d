"""Discrete Gaussian free field on lattice approximations of the square and disc.

The Dirichlet form is the plain edge sum  (f, f) = sum_{x~y} (f(x) - f(y))^2,
so the Laplacian has 4 on the diagonal and the Green operator is its inverse.
With this normalisation G(x, y) ~ (2 pi)^{-1} log(1 / |x - y|), the same as
the continuum field, so lattice Green values can be compared directly with
the disc Green function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.spatial import cKDTree

from .errors import InvalidArgument, NumericalFailure
from .harness import Estimate, Verdict, exponent_fit
from .seeding import SeedLike, rng as as_rng

_NBR = ((1, 0), (-1, 0), (0, 1), (0, -1))


@dataclass(frozen=True)
class LatticeDomain:
    """Interior vertices of Z^2 (integer coordinates) scaled by ``spacing``."""

    spacing: float
    interior: np.ndarray  # (n, 2) int
    boundary: np.ndarray  # (m, 2) int
    _index: dict = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        if not self._index:
            self._index.update({(int(i), int(j)): k for k, (i, j) in enumerate(self.interior)})

    @property
    def n(self) -> int:
        return int(self.interior.shape[0])

    def index(self, vertex) -> int:
        return self._index[(int(vertex[0]), int(vertex[1]))]

    def positions(self) -> np.ndarray:
        """Complex positions of interior vertices."""
        return self.spacing * (self.interior[:, 0] + 1j * self.interior[:, 1])

    def neighbours(self):
        """(k, l) index pairs of interior-interior edges, each once."""
        pairs = []
        for k, (i, j) in enumerate(self.interior):
            for di, dj in ((1, 0), (0, 1)):
                l = self._index.get((int(i + di), int(j + dj)))
                if l is not None:
                    pairs.append((k, l))
        return np.array(pairs, dtype=int).reshape(-1, 2)

    @classmethod
    def from_vertices(cls, vertices, spacing: float = 1.0) -> "LatticeDomain":
        v = np.unique(np.asarray(vertices, dtype=int).reshape(-1, 2), axis=0)
        if v.shape[0] == 0:
            raise InvalidArgument("interior must be nonempty")
        inside = {(int(i), int(j)) for i, j in v}
        bnd = {(int(i + di), int(j + dj)) for i, j in v for di, dj in _NBR} - inside
        b = np.array(sorted(bnd), dtype=int).reshape(-1, 2)
        return cls(float(spacing), v, b)

    @classmethod
    def square(cls, size: int) -> "LatticeDomain":
        """size x size interior in the unit square, spacing 1/(size + 1)."""
        if size < 1:
            raise InvalidArgument("size must be >= 1")
        i, j = np.meshgrid(np.arange(1, size + 1), np.arange(1, size + 1), indexing="ij")
        return cls.from_vertices(np.column_stack([i.ravel(), j.ravel()]), 1.0 / (size + 1))

    @classmethod
    def disc(cls, diameter: int) -> "LatticeDomain":
        """Vertices strictly inside the disc of radius diameter/2 (lattice units),
        rescaled to approximate the unit disc."""
        R = diameter / 2.0
        r = int(math.ceil(R))
        i, j = np.meshgrid(np.arange(-r, r + 1), np.arange(-r, r + 1), indexing="ij")
        m = i ** 2 + j ** 2 < R * R
        d = cls.from_vertices(np.column_stack([i[m], j[m]]))
        # the Dirichlet data sits on the boundary vertices; their mean radius
        # is the radius of the continuum disc being approximated
        rb = float(np.mean(np.hypot(d.boundary[:, 0], d.boundary[:, 1])))
        return cls(1.0 / rb, d.interior, d.boundary)


def laplacian(domain: LatticeDomain) -> np.ndarray:
    n = domain.n
    L = 4.0 * np.eye(n)
    e = domain.neighbours()
    L[e[:, 0], e[:, 1]] = -1.0
    L[e[:, 1], e[:, 0]] = -1.0
    return L


@dataclass(frozen=True)
class GreenOperator:
    domain: LatticeDomain
    matrix: np.ndarray
    cholesky: np.ndarray = field(repr=False)

    def __getitem__(self, key):
        return self.matrix[key]


def green_operator(domain: LatticeDomain) -> GreenOperator:
    if domain.n == 0:
        raise InvalidArgument("interior must be nonempty")
    if domain.n > 12_000:
        raise InvalidArgument("dense Green operator capped at ~10^4 vertices")
    L = laplacian(domain)
    try:
        c = linalg.cho_factor(L, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalFailure(f"Laplacian not positive definite: {exc}") from exc
    G = linalg.cho_solve(c, np.eye(domain.n))
    G = 0.5 * (G + G.T)
    G.setflags(write=False)
    chol = linalg.cholesky(G, lower=True)
    chol.setflags(write=False)
    return GreenOperator(domain, G, chol)


def disc_green_continuum(x, y):
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    return np.log(np.abs((1 - x * np.conj(y)) / (x - y))) / (2 * math.pi)


@dataclass(frozen=True)
class LatticeField:
    domain: LatticeDomain
    values: np.ndarray

    def to_csv(self, path) -> None:
        d = self.domain
        np.savetxt(path, np.column_stack([d.interior, self.values]), delimiter=",",
                   header="i,j,value", comments="")


def sample_field(seed: SeedLike, green: GreenOperator, n: int | None = None):
    """One field (or an (n, |interior|) array of fields) with covariance G."""
    g = as_rng(seed)
    k = 1 if n is None else int(n)
    z = g.standard_normal((k, green.domain.n))
    x = z @ green.cholesky.T
    if n is None:
        return LatticeField(green.domain, x[0])
    return x


def dirichlet_form(domain: LatticeDomain, f, g=None) -> float:
    """(f, g) = sum over edges, boundary vertices carrying 0."""
    L = laplacian(domain)
    f = np.asarray(f, dtype=float)
    g = f if g is None else np.asarray(g, dtype=float)
    return float(f @ L @ g)


def harmonic_extension(domain: LatticeDomain, data: dict | None = None, values=None,
                       conditioning=None) -> LatticeField:
    """Discrete harmonic function off the conditioning set.

    ``conditioning`` holds interior indices where ``values`` are prescribed;
    the outer boundary always carries 0 unless ``data`` gives explicit values
    keyed by boundary vertex tuples.
    """
    n = domain.n
    A = np.zeros(n, dtype=bool)
    fixed = np.zeros(n)
    if conditioning is not None:
        idx = np.asarray(conditioning, dtype=int)
        A[idx] = True
        fixed[idx] = np.asarray(values, dtype=float)
    bvals = {} if data is None else {tuple(map(int, k)): float(v) for k, v in data.items()}
    if not A.any() and not bvals and domain.boundary.shape[0] == 0:
        raise InvalidArgument("empty conditioning set")
    L = laplacian(domain)
    rhs = np.zeros(n)
    if bvals:
        for k, (i, j) in enumerate(domain.interior):
            for di, dj in _NBR:
                v = bvals.get((int(i + di), int(j + dj)))
                if v is not None:
                    rhs[k] += v
    free = ~A
    out = fixed.copy()
    if free.any():
        b = rhs[free] - L[np.ix_(free, A)] @ fixed[A]
        out[free] = linalg.solve(L[np.ix_(free, free)], b, assume_a="pos")
    return LatticeField(domain, out)


def _extension_operator(L, A):
    """Matrix P with (P f)|_free = harmonic extension of f|_A, P = I on A."""
    n = L.shape[0]
    free = ~A
    P = np.zeros((n, n))
    idxA = np.nonzero(A)[0]
    P[idxA, idxA] = 1.0
    if free.any() and A.any():
        P[np.ix_(free, A)] = -linalg.solve(L[np.ix_(free, free)], L[np.ix_(free, A)],
                                           assume_a="pos")
    return P


def green_off(domain: LatticeDomain, A) -> np.ndarray:
    """Green operator of the domain with A removed, zero-padded on A."""
    A = _mask(domain, A)
    L = laplacian(domain)
    free = ~A
    G = np.zeros((domain.n, domain.n))
    if free.any():
        G[np.ix_(free, free)] = linalg.inv(L[np.ix_(free, free)])
    return G


def _mask(domain, A):
    A = np.asarray(A)
    if A.dtype == bool:
        if A.size != domain.n:
            raise InvalidArgument("mask length must equal the interior size")
        return A.copy()
    m = np.zeros(domain.n, dtype=bool)
    if A.size:
        if A.ndim == 2:
            A = np.array([domain.index(v) for v in A])
        m[A.astype(int)] = True
    return m


def decomposition_matrices(green: GreenOperator, A):
    """(G_D, H, G_{D minus A}) with H the harmonic extension in x of G_D(., y)."""
    dom = green.domain
    A = _mask(dom, A)
    L = laplacian(dom)
    G = np.asarray(green.matrix)
    P = _extension_operator(L, A)
    H = P[:, A] @ G[A, :]
    return G, H, green_off(dom, A)


def local_set_decomposition_check(seed: SeedLike, domain: LatticeDomain, A, N: int = 10_000,
                                  green: GreenOperator | None = None,
                                  n_entries: int = 12) -> Verdict:
    green = green_operator(domain) if green is None else green
    mask = _mask(domain, A)
    G, H, GA = decomposition_matrices(green, mask)
    err = float(np.max(np.abs(G - H - GA)))
    exact = err < 1e-10
    # statistical: Gamma - harmonic extension of Gamma|_A has covariance G_{D\A}
    g = as_rng(seed)
    X = sample_field(g, green, N)
    P = _extension_operator(laplacian(domain), mask)
    R = X - X[:, mask] @ P[:, mask].T
    free = np.nonzero(~mask)[0]
    worst = 0.0
    if free.size:
        pick = g.choice(free, size=(min(n_entries, free.size), 2))
        for i, j in pick:
            prod = R[:, i] * R[:, j]
            est = Estimate.from_samples(prod)
            worst = max(worst, abs(est.z_score(GA[i, j])))
        if np.any(np.abs(R[:, mask]) > 1e-9):
            worst = math.inf
    stat_ok = worst <= 3.0 + 0.5 * math.log(max(n_entries, 1))
    return Verdict("local_set_decomposition", err, None, bool(exact and stat_ok),
                   {"max_abs_identity_error": err, "worst_z": worst, "n_set": int(mask.sum())})


def cameron_martin_check(seed: SeedLike, domain: LatticeDomain, F, phi=None, N: int = 10_000,
                         green: GreenOperator | None = None) -> Verdict:
    """Three estimates of E[phi(Gamma + F)] and the normaliser E[exp((F, Gamma))].

    ``phi`` is a vector g (linear functional gamma -> <g, gamma>) or a callable
    on an (N, n) array; the analytic value is only available for vectors.
    """
    green = green_operator(domain) if green is None else green
    F = np.asarray(F, dtype=float)
    L = laplacian(domain)
    LF = L @ F
    energy = float(F @ LF)
    g = as_rng(seed)
    X = sample_field(g, green, N)
    Y = sample_field(g, green, N)
    if phi is None:
        phi = np.ones(domain.n) / domain.n
    if callable(phi):
        f = phi
        analytic = None
    else:
        gv = np.asarray(phi, dtype=float)
        f = lambda A: A @ gv  # noqa: E731
        analytic = float(gv @ F)
    shifted = Estimate.from_samples(f(Y + F))
    pair = X @ LF
    w = np.exp(pair - pair.max())
    vals = f(X)
    sw = w.sum()
    rew = float(np.dot(w, vals) / sw)
    # delta-method standard error of the self-normalised estimator
    wn = w / sw
    rew_se = float(math.sqrt(np.sum(wn ** 2 * (vals - rew) ** 2)))
    ess = float(sw ** 2 / np.sum(w ** 2))
    norm = Estimate.from_samples(np.exp(pair))
    norm_exact = math.exp(0.5 * energy)
    zs = {"shift_vs_reweight": (shifted.mean - rew) / math.hypot(shifted.stderr, rew_se)
          if (shifted.stderr or rew_se) else 0.0,
          "normaliser": norm.z_score(norm_exact)}
    if analytic is not None:
        zs["shift_vs_analytic"] = shifted.z_score(analytic)
        zs["reweight_vs_analytic"] = (rew - analytic) / rew_se if rew_se else 0.0
    ok = all(abs(z) <= 3.0 for z in zs.values())
    if energy <= 1.0:
        ok = ok and ess > N / 10
    detail = {"shifted": shifted.mean, "reweighted": rew, "analytic": analytic,
              "normaliser_mc": norm.mean, "normaliser_exact": norm_exact,
              "energy": energy, "ess": ess}
    detail.update({f"z_{k}": v for k, v in zs.items()})
    return Verdict("cameron_martin", max(abs(z) for z in zs.values()), None, bool(ok), detail)


def mahalanobis_check(seed: SeedLike, green: GreenOperator, N: int = 2000) -> Verdict:
    """chi^2(|interior|) goodness of fit of x^T G^{-1} x over N draws."""
    from scipy import stats

    X = sample_field(seed, green, N)
    L = laplacian(green.domain)
    q = np.einsum("ij,jk,ik->i", X, L, X)
    res = stats.kstest(q, stats.chi2(green.domain.n).cdf)
    return Verdict("mahalanobis_chi2", float(res.statistic), float(res.pvalue),
                   bool(res.pvalue > 0.01))


def green_vs_continuum(domain: LatticeDomain, green: GreenOperator | None = None,
                       min_sep: int = 8, n_pairs: int = 200, seed: int = 0):
    """Largest relative error between lattice and continuum disc Green over
    random bulk pairs (separation and boundary distance >= ``min_sep``)."""
    green = green_operator(domain) if green is None else green
    pos = domain.positions()
    h = domain.spacing
    bulk = np.nonzero(1.0 - np.abs(pos) >= min_sep * h)[0]
    g = np.random.default_rng(seed)
    errs = []
    tries = 0
    while len(errs) < n_pairs and tries < 100 * n_pairs:
        tries += 1
        i, j = g.choice(bulk, 2, replace=False)
        if abs(pos[i] - pos[j]) < min_sep * h:
            continue
        c = float(disc_green_continuum(pos[i], pos[j]))
        errs.append(abs(green.matrix[i, j] - c) / c)
    return float(np.max(errs)), float(np.mean(errs))


# ---------------------------------------------------------------------------
# thinness probe

@dataclass
class ThinnessResult:
    eps: np.ndarray
    area: np.ndarray
    diagnostic: np.ndarray  # area * log(1/eps)
    exponent: float
    stderr: float


def neighbourhood_area(points, eps: float, resolution: int = 8) -> float:
    """Area of the eps-neighbourhood of a finite point set, by quadrature on
    a grid of spacing eps/resolution restricted to cells near the points."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if pts.shape[0] == 0:
        return 0.0
    s = eps / resolution
    # snap points to a coarse grid of spacing eps first to bound the work
    coarse = np.unique(np.floor(pts / eps).astype(np.int64), axis=0)
    r = resolution
    off = np.arange(-r, 2 * r)
    oi, oj = np.meshgrid(off, off, indexing="ij")
    cells = (coarse[:, None, :] * r + np.stack([oi.ravel(), oj.ravel()], axis=1)[None, :, :])
    cells = np.unique(cells.reshape(-1, 2), axis=0)
    centres = (cells + 0.5) * s
    d, _ = cKDTree(pts).query(centres, distance_upper_bound=eps)
    return float(np.count_nonzero(d <= eps) * s * s)


def thinness_probe(point_set, eps_grid, resolution: int = 8) -> ThinnessResult:
    eps = np.asarray(eps_grid, dtype=float)
    if eps.size < 3:
        raise InvalidArgument("need at least 3 eps values")
    if np.any(np.diff(eps) >= 0) or np.any(eps <= 0):
        raise InvalidArgument("eps_grid must be positive and strictly decreasing")
    sets = point_set if isinstance(point_set, (list, tuple)) else [point_set]
    area = np.array([np.mean([neighbourhood_area(p, e, resolution) for p in sets]) for e in eps])
    diag = area * np.log(1.0 / eps)
    slope, se = exponent_fit(eps, area)
    return ThinnessResult(eps, area, diag, slope, se)
