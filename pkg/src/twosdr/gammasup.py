"""Mode-seeking clustering by a self-updating process with
q-exponential kernel weights, plus the phase-transition scan used to
pick the scale parameter tau.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InvalidInputError

DEFAULT_S = 0.025
DEFAULT_MIN_SIZE = 10


def qexp(u, q):
    """q-exponential {1 + (1 - q) u}_+^{1/(1-q)}; ordinary exp at q = 1.

    Compactly supported for q < 1: zero once u <= -1/(1-q).
    """
    u = np.asarray(u, dtype=np.float64)
    if q == 1.0:
        return np.exp(u)
    base = np.maximum(1.0 + (1.0 - q) * u, 0.0)
    return base ** (1.0 / (1.0 - q))


@dataclass(frozen=True)
class GammaSupConfig:
    """Tuning knobs.  ``move_tol`` and ``merge_tol`` default to small
    multiples of the data diameter when left unset."""

    tau: float
    s: float = DEFAULT_S
    max_iter: int = 500
    move_tol: float | None = None
    merge_tol: float | None = None

    def validate(self):
        if self.tau <= 0 or self.s <= 0:
            raise InvalidInputError("tau and s must be positive")
        if self.max_iter < 1:
            raise InvalidInputError("max_iter must be >= 1")
        for name in ("move_tol", "merge_tol"):
            v = getattr(self, name)
            if v is not None and v <= 0:
                raise InvalidInputError(f"{name} must be positive")


@dataclass
class ClusterResult:
    labels: np.ndarray
    centers: np.ndarray
    iterations: int
    converged: bool

    @property
    def n_clusters(self):
        return self.centers.shape[0]

    def sizes(self):
        return np.bincount(self.labels, minlength=self.n_clusters)


def _group(points, tol):
    """Single-linkage grouping of near-coincident points (union-find)."""
    n = points.shape[0]
    parent = np.arange(n)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    D = cdist(points, points)
    for i in range(n):
        for j in np.nonzero(D[i] <= tol)[0]:
            ri, rj = find(i), find(int(j))
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(n)])
    _, labels = np.unique(roots, return_inverse=True)
    return labels


def gamma_sup(points, config: GammaSupConfig) -> ClusterResult:
    """Iterate the self-updating recursion until the representatives stop
    moving, then merge coincident representatives into clusters.

    Weights between current representatives are
    exp_{1-s}(-||(mu_j - mu_i)/tau||^2); each update is the weighted
    mean, a convex combination of the previous state.
    """
    config.validate()
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise InvalidInputError("points must be a non-empty n x d array")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("points must be finite")

    n = pts.shape[0]
    diameter = float(cdist(pts, pts).max()) if n > 1 else 0.0
    scale = diameter if diameter > 0 else 1.0
    move_tol = config.move_tol if config.move_tol is not None else 1e-8 * scale
    merge_tol = config.merge_tol if config.merge_tol is not None else 1e-6 * scale

    mu = pts.copy()
    q = 1.0 - config.s
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iter + 1):
        d2 = cdist(mu, mu, "sqeuclidean") / config.tau**2
        w = qexp(-d2, q)
        new_mu = (w @ mu) / w.sum(axis=1, keepdims=True)
        shift = np.abs(new_mu - mu).max()
        mu = new_mu
        if shift < move_tol:
            converged = True
            break

    labels = _group(mu, merge_tol)
    k = labels.max() + 1
    centers = np.stack([mu[labels == j].mean(axis=0) for j in range(k)])
    return ClusterResult(labels=labels, centers=centers,
                         iterations=iterations, converged=converged)


def normalize_scores(points):
    """Center and divide by the global standard deviation (the
    preprocessing used before a tau scan)."""
    pts = np.asarray(points, dtype=np.float64)
    centered = pts - pts.mean(axis=0)
    sd = centered.std()
    if sd == 0:
        return centered
    return centered / sd


def bracket_tau(points, s=DEFAULT_S, max_iter=500):
    """Bracket the interesting tau range: an upper value grouping all
    points into one cluster, and a lower value (upper halved repeatedly)
    at which every point is its own cluster."""
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    upper = float(cdist(pts, pts).max()) if n > 1 else 1.0
    upper = max(upper, 1e-12)
    for _ in range(60):
        res = gamma_sup(pts, GammaSupConfig(tau=upper, s=s, max_iter=max_iter))
        if res.n_clusters == 1:
            break
        upper *= 2.0
    lower = upper
    for _ in range(60):
        lower /= 2.0
        res = gamma_sup(pts, GammaSupConfig(tau=lower, s=s, max_iter=max_iter))
        if res.n_clusters == n:
            break
    return lower, upper


@dataclass
class PhaseTransitionScan:
    taus: np.ndarray
    n_clusters: np.ndarray
    n_large_clusters: np.ndarray
    recommended_tau: float
    min_size: int


def phase_transition_scan(points, s=DEFAULT_S, tau_grid=None, min_size=DEFAULT_MIN_SIZE,
                          grid_points=15, normalize=True, max_iter=500):
    """Cluster counts over a tau grid, plus the recommended tau.

    The grid defaults to a geometric sweep between the bracketing
    values from :func:`bracket_tau`.  The recommendation maximizes the
    number of clusters of size > ``min_size``; ties go to the largest
    such tau (the most stable regime).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if normalize:
        pts = normalize_scores(pts)
    if tau_grid is None:
        lower, upper = bracket_tau(pts, s=s, max_iter=max_iter)
        tau_grid = np.geomspace(lower, upper, grid_points)
    tau_grid = np.asarray(tau_grid, dtype=np.float64)
    if tau_grid.size == 0:
        raise InvalidInputError("tau grid must be non-empty")

    counts = np.empty(tau_grid.size, dtype=np.int64)
    large = np.empty(tau_grid.size, dtype=np.int64)
    for i, tau in enumerate(tau_grid):
        res = gamma_sup(pts, GammaSupConfig(tau=float(tau), s=s, max_iter=max_iter))
        counts[i] = res.n_clusters
        large[i] = int(np.sum(res.sizes() > min_size))

    order = np.lexsort((tau_grid, large))
    best = order[-1]
    return PhaseTransitionScan(
        taus=tau_grid,
        n_clusters=counts,
        n_large_clusters=large,
        recommended_tau=float(tau_grid[best]),
        min_size=min_size,
    )
