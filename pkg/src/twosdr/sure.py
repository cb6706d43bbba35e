"""Stage-1 rank selection: noise-variance estimation with a
Marchenko-Pastur tail correction, the closed-form degrees of freedom,
and the unbiased-risk criterion evaluated over a rank grid beneath an
oversized surrogate fit.
"""

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import (
    DegenerateSpectrumError,
    InvalidInputError,
    SelectionFailedError,
)
from .linalg import as_stack, center, sym_eig
from .mpca import fit_glram, DEFAULT_MAX_ITER, DEFAULT_TOL

TAIL_FRACTION = 7.0 / 8.0
VEC_SPECTRUM_MAX_DIM = 4096
_TIE_REL = 1e-12


# ---------------------------------------------------------------------------
# Marchenko-Pastur tail correction
# ---------------------------------------------------------------------------

def _mp_density(x, gamma):
    a = (1.0 - np.sqrt(gamma)) ** 2
    b = (1.0 + np.sqrt(gamma)) ** 2
    out = np.zeros_like(x)
    inside = (x > a) & (x < b)
    xi = x[inside]
    out[inside] = np.sqrt((b - xi) * (xi - a)) / (2.0 * np.pi * gamma * xi)
    return out


def mp_lower_tail_mean(gamma, fraction=TAIL_FRACTION):
    """Mean of the lowest ``fraction`` of the unit-variance MP law.

    For gamma >= 1 the law is conditioned on the nonzero part of the
    spectrum (the continuous density carries mass 1/gamma there).
    """
    if gamma <= 0:
        raise InvalidInputError("aspect ratio must be positive")
    if not 0 < fraction <= 1:
        raise InvalidInputError("fraction must lie in (0, 1]")
    a = (1.0 - np.sqrt(gamma)) ** 2
    b = (1.0 + np.sqrt(gamma)) ** 2
    scale = max(gamma, 1.0)  # conditional density for the gamma >= 1 branch

    def mass(t):
        val, _ = integrate.quad(
            lambda x: scale * _mp_density(np.atleast_1d(x), gamma)[0], a, t,
            limit=200,
        )
        return val

    if fraction >= 1.0 - 1e-12:
        t = b
    else:
        t = optimize.brentq(lambda t: mass(t) - fraction, a, b, xtol=1e-12)
    num, _ = integrate.quad(
        lambda x: x * scale * _mp_density(np.atleast_1d(x), gamma)[0], a, t,
        limit=200,
    )
    return num / fraction


def estimate_noise_variance(eigvals, n, dim=None, fraction=TAIL_FRACTION):
    """Noise variance from the tail of a sample-covariance spectrum.

    The naive mean of the smallest ``fraction`` of the eigenvalues
    under-estimates the variance because pure-noise eigenvalues spread
    into a Marchenko-Pastur bulk; the estimate divides the observed tail
    mean by the matching lower-quantile MP mean at aspect ratio
    gamma = dim / n.  When gamma >= 1 only the nonzero part of the
    spectrum (at most n - 1 values for centered data) enters.
    """
    eigvals = np.asarray(eigvals, dtype=np.float64)
    if eigvals.ndim != 1 or eigvals.size == 0:
        raise InvalidInputError("eigvals must be a non-empty 1-d array")
    if np.any(eigvals < -1e-10 * max(eigvals.max(initial=0.0), 1.0)):
        raise InvalidInputError("eigvals must be non-negative")
    if np.any(np.diff(eigvals) > 1e-9 * max(eigvals.max(initial=0.0), 1.0)):
        raise InvalidInputError("eigvals must be non-increasing")
    if n < 2:
        raise InvalidInputError("n must be >= 2")
    if dim is None:
        dim = eigvals.size
    gamma = dim / n

    if gamma < 1.0:
        spectrum = eigvals[:dim]
    else:
        spectrum = eigvals[: min(dim, n - 1)]
    m0 = spectrum.size
    tail_count = int(np.floor(fraction * m0))
    if tail_count < 1:
        raise InvalidInputError("spectrum too short for the requested tail")
    tail_mean = float(spectrum[m0 - tail_count:].mean())
    correction = mp_lower_tail_mean(gamma, tail_count / m0)
    return max(tail_mean / correction, 0.0)


def vectorized_spectrum(stack):
    """Nonzero spectrum of the vectorized sample covariance.

    Works through the n x n Gram matrix so the cost never exceeds
    O(n^2 pq); returns min(pq, n - 1) non-increasing eigenvalues.
    """
    stack = as_stack(stack, min_samples=2)
    n, p, q = stack.shape
    _, Xc = center(stack)
    Z = Xc.reshape(n, p * q)
    if p * q <= n:
        S = Z.T @ Z / n
        vals = np.linalg.eigvalsh(S)[::-1]
        return np.clip(vals, 0.0, None)
    G = Z @ Z.T / n
    vals = np.linalg.eigvalsh(G)[::-1][: n - 1]
    return np.clip(vals, 0.0, None)


# ---------------------------------------------------------------------------
# Degrees of freedom and the risk criterion
# ---------------------------------------------------------------------------

def _cross_sum(values, k):
    """sum_{i<=k} sum_{l>k} (v_i + v_l) / (v_i - v_l), guarding ties at
    the k-boundary."""
    m = values.size
    if k >= m:
        return 0.0
    top = values[0] if values[0] > 0 else 1.0
    if values[k - 1] - values[k] < _TIE_REL * top:
        raise DegenerateSpectrumError(
            f"eigenvalue tie at rank boundary {k} makes df undefined"
        )
    head = values[:k, None]
    tail = values[None, k:]
    return float(np.sum((head + tail) / (head - tail)))


def degrees_of_freedom(lam, xi, p0, q0, n):
    """Effective parameter count of the rank-(p0, q0) stage-1 fit:

    pq + (n-1) p0 q0 + eigenvalue-ratio interaction sums over both modes.
    """
    lam = np.asarray(lam, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    p, q = lam.size, xi.size
    if not (1 <= p0 <= p and 1 <= q0 <= q):
        raise InvalidInputError(f"ranks ({p0}, {q0}) out of range for ({p}, {q})")
    if n < 2:
        raise InvalidInputError("n must be >= 2")
    return (
        p * q
        + (n - 1) * p0 * q0
        + _cross_sum(lam, p0)
        + _cross_sum(xi, q0)
    )


def sure_score(stack, A_sub, B_sub, p0, q0, sigma2, lam, xi, n):
    """Unbiased risk estimate for one rank pair:

    n^-1 sum ||X_i - A U_i B^T||_F^2 + 2 n^-1 sigma2 df - pq sigma2,

    with A_sub / B_sub the first p0 / q0 columns of the oversized bases.
    """
    stack = as_stack(stack, min_samples=2)
    if A_sub.shape[1] != p0 or B_sub.shape[1] != q0:
        raise InvalidInputError("basis column counts do not match (p0, q0)")
    _, Xc = center(stack)
    p, q = stack.shape[1], stack.shape[2]
    cores = np.einsum("ip,nij,jq->npq", A_sub, Xc, B_sub, optimize=True)
    residual = (np.sum(Xc * Xc) - np.sum(cores * cores)) / n
    df = degrees_of_freedom(lam, xi, p0, q0, n)
    return float(residual + 2.0 * sigma2 * df / n - p * q * sigma2)


# ---------------------------------------------------------------------------
# Grid selection
# ---------------------------------------------------------------------------

@dataclass
class SureGrid:
    """Per-candidate criterion values over the (p0, q0) grid.

    Skipped (degenerate-spectrum) cells hold NaN in ``scores``.
    """

    p_u: int
    q_u: int
    sigma2: float
    scores: np.ndarray
    argmin: tuple

    def to_dict(self):
        return {
            "p_u": self.p_u,
            "q_u": self.q_u,
            "sigma2": self.sigma2,
            "scores": [[None if np.isnan(v) else v for v in row]
                       for row in self.scores],
            "argmin": list(self.argmin),
        }


def surrogate_ranks(stack, variance_fraction=0.35):
    """Smallest mode ranks capturing ``variance_fraction`` of the
    mode-wise variance (the default oversized-rank rule)."""
    stack = as_stack(stack, min_samples=2)
    n, p, q = stack.shape
    _, Xc = center(stack)
    S_col = np.tensordot(Xc, Xc, axes=([0, 2], [0, 2])) / n
    S_row = np.tensordot(Xc, Xc, axes=([0, 1], [0, 1])) / n
    ranks = []
    for S in (S_col, S_row):
        vals = sym_eig((S + S.T) / 2.0).values
        cum = np.cumsum(vals)
        ranks.append(int(np.searchsorted(cum, variance_fraction * cum[-1]) + 1))
    return ranks[0], ranks[1]


def pooled_mode_sigma2(model, n):
    """Fallback noise-variance estimate from the mode spectra when the
    vectorized spectrum is too large to form: each mode covariance sees
    noise at level sigma2 times the rank of the opposing projector."""
    p, q = model.shape
    p0, q0 = model.ranks
    est_col = estimate_noise_variance(model.lam / q0, n * q0, dim=p)
    est_row = estimate_noise_variance(model.xi / p0, n * p0, dim=q)
    return 0.5 * (est_col + est_row)


def select_mpca_rank(
    stack,
    p_u=None,
    q_u=None,
    sigma2=None,
    max_iter=DEFAULT_MAX_ITER,
    tol=DEFAULT_TOL,
    sigma2_method="vec",
):
    """Choose the stage-1 rank pair by minimizing the risk criterion.

    Fits ONE oversized model at (p_u, q_u) (defaulting to the 35%%
    mode-variance rule), scores every (p0, q0) cell by truncating basis
    columns (no refit), and returns the truncated model together with
    the full score grid.  Tie-breaking prefers smaller p0*q0, then
    smaller p0.

    ``sigma2_method`` controls the noise-variance estimate when
    ``sigma2`` is not supplied.  "vec" reads it off the vectorized
    sample spectrum (falling back to the mode spectra for images beyond
    the size threshold) and targets the entrywise noise floor.  "mode"
    always uses the pooled mode spectra; under a misspecified
    matrix-factor model this counts everything without mode structure
    as noise, which is the level the risk comparison actually needs.
    """
    stack = as_stack(stack, min_samples=2)
    n, p, q = stack.shape
    if p_u is None or q_u is None:
        d_pu, d_qu = surrogate_ranks(stack)
        p_u = d_pu if p_u is None else p_u
        q_u = d_qu if q_u is None else q_u
    if not (1 <= p_u <= p and 1 <= q_u <= q):
        raise InvalidInputError(f"surrogate ranks ({p_u}, {q_u}) out of range")

    model = fit_glram(stack, p_u, q_u, max_iter=max_iter, tol=tol)

    if sigma2_method not in ("vec", "mode"):
        raise InvalidInputError("sigma2_method must be 'vec' or 'mode'")
    if sigma2 is None:
        if sigma2_method == "mode":
            sigma2 = pooled_mode_sigma2(model, n)
        elif p * q <= VEC_SPECTRUM_MAX_DIM:
            spectrum = vectorized_spectrum(stack)
            sigma2 = estimate_noise_variance(spectrum, n, dim=p * q)
        else:
            sigma2 = pooled_mode_sigma2(model, n)
    sigma2 = float(sigma2)

    _, Xc = center(stack)
    total = float(np.sum(Xc * Xc)) / n
    cores = np.einsum("ip,nij,jq->npq", model.A, Xc, model.B, optimize=True)
    energy = np.sum(cores * cores, axis=0) / n  # (p_u, q_u) per-cell energy
    captured = np.cumsum(np.cumsum(energy, axis=0), axis=1)

    scores = np.full((p_u, q_u), np.nan)
    for i in range(p_u):
        for j in range(q_u):
            try:
                df = degrees_of_freedom(model.lam, model.xi, i + 1, j + 1, n)
            except DegenerateSpectrumError:
                continue
            residual = total - captured[i, j]
            scores[i, j] = residual + 2.0 * sigma2 * df / n - p * q * sigma2

    if np.all(np.isnan(scores)):
        raise SelectionFailedError("every grid cell had a degenerate spectrum")

    best = None
    for i in range(p_u):
        for j in range(q_u):
            if np.isnan(scores[i, j]):
                continue
            key = (scores[i, j], (i + 1) * (j + 1), i + 1)
            if best is None or key < best[0]:
                best = (key, (i + 1, j + 1))
    p_hat, q_hat = best[1]

    grid = SureGrid(p_u=p_u, q_u=q_u, sigma2=sigma2, scores=scores,
                    argmin=(p_hat, q_hat))
    selected = model.truncated(p_hat, q_hat)
    selected.sigma2 = sigma2
    return selected, grid
