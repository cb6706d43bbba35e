"""Stage-2 PCA on vectorized cores, with rank selection by a
generalized information criterion (plus AIC/BIC baselines).

The working model is a simple spiked covariance: r distinct spike
eigenvalues above a flat tail, so log|Sigma_r| is the sum of the top-r
log eigenvalues plus (m - r) times the log of the tail mean.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDataError, DegenerateSpectrumError, InvalidInputError
from .linalg import as_stack, sym_eig, vec

_EIG_FLOOR_REL = 1e-12


@dataclass
class PcaModel:
    """PCA of vectorized cores.  ``basis`` holds the leading ``r``
    eigenvectors once a rank is chosen; ``kappa`` is the full spectrum."""

    basis: np.ndarray
    kappa: np.ndarray
    r: int | None = None
    c_tail: float | None = None

    @property
    def dim(self):
        return self.kappa.size

    def with_rank(self, r):
        if not 1 <= r <= self.dim:
            raise InvalidInputError(f"rank {r} out of range for dim {self.dim}")
        tail = self.kappa[r:]
        return PcaModel(
            basis=self.basis[:, :r],
            kappa=self.kappa,
            r=r,
            c_tail=float(tail.mean()) if tail.size else 0.0,
        )


def pca_on_cores(cores):
    """Full eigendecomposition of n^-1 sum vec(U_i) vec(U_i)^T.

    Cores are taken as already centered by the stage-1 mean; no
    re-centering happens here.
    """
    cores = as_stack(cores)
    n = cores.shape[0]
    if n < 2:
        raise DegenerateDataError("need at least 2 cores for a spectrum")
    V = vec(cores)  # (n, p0*q0)
    S = V.T @ V / n
    eig = sym_eig(S)
    return PcaModel(basis=eig.vectors, kappa=np.clip(eig.values, 0.0, None))


@dataclass
class GicCurve:
    """Per-rank fit/penalty values and the selected rank."""

    method: str
    r_values: np.ndarray
    log_det: np.ndarray
    bias: np.ndarray
    criterion: np.ndarray
    r_hat: int
    clamped: bool = False

    def to_dict(self):
        return {
            "method": self.method,
            "r": self.r_values.tolist(),
            "log_det": self.log_det.tolist(),
            "bias": self.bias.tolist(),
            "criterion": self.criterion.tolist(),
            "r_hat": int(self.r_hat),
            "clamped": self.clamped,
        }


def gic_bias(delta, r):
    """Asymptotic bias correction for the rank-r spiked working model:

    C(r,2) + sum_{j<=r} sum_{l>r} d_l (d_j - d_r) / (d_r (d_j - d_l))
           + r + mean(tail^2) / mean(tail)^2.

    The last summand is >= 1 with equality iff the tail is flat.
    """
    delta = np.asarray(delta, dtype=np.float64)
    m = delta.size
    if not 0 <= r < m:
        raise InvalidInputError(f"rank {r} out of range for spectrum length {m}")
    if np.any(delta <= 0):
        raise InvalidInputError("spectrum must be strictly positive")
    tail = delta[r:]
    out = math.comb(r, 2) + r + float(np.mean(tail**2) / np.mean(tail) ** 2)
    if r == 0:
        return out
    head = delta[:r, None]
    tails = delta[None, r:]
    num = tails * (head - delta[r - 1])
    den = delta[r - 1] * (head - tails)
    zero_den = den == 0.0
    if np.any(zero_den & (num != 0.0)):
        raise DegenerateSpectrumError(
            "eigenvalue tie across the rank boundary with nonzero numerator"
        )
    terms = np.where(zero_den, 0.0, num / np.where(zero_den, 1.0, den))
    return out + float(terms.sum())


def _prepare_spectrum(kappa, r_max):
    kappa = np.asarray(kappa, dtype=np.float64)
    m = kappa.size
    if m < 2:
        raise InvalidInputError("spectrum must have at least 2 eigenvalues")
    if r_max is None:
        r_max = m - 1
    if not 1 <= r_max < m:
        raise InvalidInputError(f"r_max {r_max} out of range for length {m}")
    clamped = False
    floor = _EIG_FLOOR_REL * max(kappa.max(initial=0.0), 1e-300)
    if np.any(kappa[: r_max + 1] <= 0):
        kappa = np.maximum(kappa, floor)
        clamped = True
    kappa = np.maximum(kappa, floor)  # keep log finite deep in the tail too
    return kappa, m, r_max, clamped


def _log_det_curve(kappa, m, r_max):
    logs = np.log(kappa)
    head = np.concatenate([[0.0], np.cumsum(logs)])
    tail_sums = np.concatenate([[0.0], np.cumsum(kappa[::-1])])[::-1]
    out = np.empty(r_max)
    for r in range(1, r_max + 1):
        tail_mean = tail_sums[r] / (m - r)
        out[r - 1] = head[r] + (m - r) * np.log(tail_mean)
    return out


def gic_select(kappa, n, r_max=None):
    """Rank by  argmin_r  log|Sigma_r| + (log n / n) b_r."""
    kappa, m, r_max, clamped = _prepare_spectrum(kappa, r_max)
    if n < 2:
        raise InvalidInputError("n must be >= 2")
    log_det = _log_det_curve(kappa, m, r_max)
    bias = np.array([gic_bias(kappa, r) for r in range(1, r_max + 1)])
    criterion = log_det + (np.log(n) / n) * bias
    r_hat = int(np.argmin(criterion)) + 1
    return GicCurve(
        method="GIC",
        r_values=np.arange(1, r_max + 1),
        log_det=log_det,
        bias=bias,
        criterion=criterion,
        r_hat=r_hat,
        clamped=clamped,
    )


def spiked_param_count(m, r):
    """Parameters of the rank-r simple spiked model: r spike values, one
    tail level, and sum_{j<=r} (m - j) rotation parameters."""
    return r + 1 + r * m - r * (r + 1) // 2


def aic_bic_select(kappa, n, r_max=None, mode="BIC"):
    """Rank by  argmin_r  log|Sigma_r| + (penalty / n) k_r  with
    penalty 2 (AIC) or log n (BIC)."""
    if mode not in ("AIC", "BIC"):
        raise InvalidInputError(f"mode must be 'AIC' or 'BIC', got {mode!r}")
    kappa, m, r_max, clamped = _prepare_spectrum(kappa, r_max)
    if n < 2:
        raise InvalidInputError("n must be >= 2")
    penalty = 2.0 if mode == "AIC" else float(np.log(n))
    log_det = _log_det_curve(kappa, m, r_max)
    counts = np.array([spiked_param_count(m, r) for r in range(1, r_max + 1)],
                      dtype=np.float64)
    criterion = log_det + (penalty / n) * counts
    r_hat = int(np.argmin(criterion)) + 1
    return GicCurve(
        method=mode,
        r_values=np.arange(1, r_max + 1),
        log_det=log_det,
        bias=counts,
        criterion=criterion,
        r_hat=r_hat,
        clamped=clamped,
    )
