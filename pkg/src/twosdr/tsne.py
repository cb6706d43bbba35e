"""Exact t-SNE (no tree approximation) for visual checks of score
separability: Gaussian input affinities matched to a target perplexity
by per-point bisection, Student-t output kernel, gradient descent with
momentum and optional early exaggeration.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateDataError, InvalidInputError
from .rng import make_rng

_EPS = 1e-12


@dataclass(frozen=True)
class TsneConfig:
    out_dim: int = 2
    perplexity: float = 30.0
    eta: float = 200.0
    momentum_early: float = 0.5
    momentum_late: float = 0.8
    momentum_switch: int = 250
    iters: int = 1000
    seed: int = 0
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250

    def validate(self, n):
        if self.perplexity <= 1 or self.perplexity >= n:
            raise InvalidInputError("perplexity must lie in (1, n)")
        if self.eta <= 0:
            raise InvalidInputError("learning rate must be positive")
        for a in (self.momentum_early, self.momentum_late):
            if not 0 <= a < 1:
                raise InvalidInputError("momentum must lie in [0, 1)")
        if self.out_dim < 1 or self.iters < 1:
            raise InvalidInputError("out_dim and iters must be positive")


def _conditional_row(d, target):
    """Gaussian conditional distribution over the distances ``d`` whose
    entropy is bisected to ``target`` (= log perplexity)."""
    if d.min() == d.max():
        # equidistant neighbours: any bandwidth gives the uniform law
        return np.full(d.size, 1.0 / d.size)
    lo, hi = 0.0, np.inf
    beta = 1.0 / max(d.mean(), _EPS)
    row = None
    for _ in range(100):
        w = np.exp(-beta * (d - d.min()))
        row = w / w.sum()
        entropy = -np.sum(row * np.log(np.maximum(row, _EPS)))
        if abs(entropy - target) < 1e-10:
            break
        if entropy > target:  # too flat: raise precision
            lo = beta
            beta = beta * 2.0 if np.isinf(hi) else (beta + hi) / 2.0
        else:
            hi = beta
            beta = (lo + beta) / 2.0
    if row is None or not np.all(np.isfinite(row)):
        raise DegenerateDataError("perplexity bisection failed")
    return row


def conditional_affinities(X, perplexity):
    """Row-stochastic matrix of conditional neighbour probabilities
    pi_{j|i}; each row's bandwidth matches the target perplexity."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 3:
        raise InvalidInputError("need an n x d array with n >= 3")
    n = X.shape[0]
    if not 1 < perplexity < n:
        raise InvalidInputError("perplexity must lie in (1, n)")
    D2 = cdist(X, X, "sqeuclidean")
    target = np.log(perplexity)
    P = np.zeros((n, n))
    for i in range(n):
        try:
            row = _conditional_row(np.delete(D2[i], i), target)
        except DegenerateDataError as exc:
            raise DegenerateDataError(f"{exc} at row {i}") from exc
        P[i, np.arange(n) != i] = row
    return P


def affinities(X, perplexity):
    """Symmetric joint probabilities p_ij = (pi_{j|i} + pi_{i|j}) / (2n).

    Each row's Gaussian bandwidth is bisected until the conditional
    entropy equals log(perplexity); achieved row perplexities match the
    target to high accuracy.
    """
    P = conditional_affinities(X, perplexity)
    n = P.shape[0]
    return (P + P.T) / (2.0 * n)


def _q_matrix(Y):
    num = 1.0 / (1.0 + cdist(Y, Y, "sqeuclidean"))
    np.fill_diagonal(num, 0.0)
    return num / num.sum(), num


def kl_divergence(P, Y):
    Q, _ = _q_matrix(Y)
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / np.maximum(Q[mask], _EPS))))


def tsne_gradient(P, Y):
    """dI/dY with I the KL divergence from the Student-t output kernel:
    4 sum_j (p_ij - q_ij)(y_i - y_j) / (1 + ||y_i - y_j||^2)."""
    Q, num = _q_matrix(Y)
    W = (P - Q) * num
    return 4.0 * ((np.diag(W.sum(axis=1)) - W) @ Y)


def tsne(X, config: TsneConfig = TsneConfig()):
    """Embed ``X``; returns (Y, kl_trace).  Deterministic given the seed."""
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    config.validate(n)
    P = affinities(X, config.perplexity)
    rng = make_rng(config.seed)
    Y = 1e-2 * rng.standard_normal((n, config.out_dim))
    velocity = np.zeros_like(Y)
    trace = np.empty(config.iters)
    for t in range(config.iters):
        P_t = P
        if config.early_exaggeration > 1 and t < config.exaggeration_iters:
            P_t = P * config.early_exaggeration
        grad = tsne_gradient(P_t, Y)
        alpha = (config.momentum_early if t < config.momentum_switch
                 else config.momentum_late)
        velocity = alpha * velocity - config.eta * grad
        Y = Y + velocity
        Y = Y - Y.mean(axis=0)  # keep the embedding centered
        trace[t] = kl_divergence(P, Y)
    return Y, trace
