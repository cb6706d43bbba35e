"""Reproducible generators for the two simulation designs.

Both designs are pure functions of their seed (counter-based Philox
streams, see :mod:`twosdr.rng`), and both return the noiseless signal
stack alongside the noisy one so every experiment has ground truth.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError
from .linalg import unvec
from .rng import make_rng


def _default_pca_spikes():
    return tuple(10.0 * (26 - i) for i in range(1, 26))


def _default_hmpca_spikes():
    return tuple(40.0 * (9 - i) for i in range(1, 9))


@dataclass(frozen=True)
class PcaSynthSpec:
    """Vector-model design: y = Gamma nu + eps with isotropic noise."""

    n: int
    p: int = 40
    q: int = 40
    r_star: int = 25
    delta: tuple = field(default_factory=_default_pca_spikes)
    c: float = 4.0
    seed: int = 0

    def validate(self):
        if self.n < 1 or self.p < 1 or self.q < 1:
            raise InvalidInputError("n, p, q must be positive")
        d = np.asarray(self.delta, dtype=np.float64)
        if d.size != self.r_star or self.r_star > self.p * self.q:
            raise InvalidInputError("delta length must equal r_star <= p*q")
        if np.any(d <= 0) or np.any(np.diff(d) > 0):
            raise InvalidInputError("delta must be positive non-increasing")
        if self.c < 0:
            raise InvalidInputError("noise scale c must be >= 0")

    @property
    def snr(self):
        """E||Gamma nu||^2 / (p q c)."""
        return float(np.sum(self.delta) / (self.p * self.q * self.c))


@dataclass(frozen=True)
class HmpcaSynthSpec:
    """Two-layer design: matrix factor model on top of a spiked core."""

    n: int
    p: int = 50
    q: int = 50
    p0_star: int = 8
    q0_star: int = 8
    r_star: int = 8
    kappa: tuple = field(default_factory=_default_hmpca_spikes)
    sigma2: float = 1.1
    c: float | None = None  # default 1.001 * sigma2
    noise_family: str = "gaussian"
    seed: int = 0

    def validate(self):
        if self.n < 1 or self.p < 1 or self.q < 1:
            raise InvalidInputError("n, p, q must be positive")
        if not (1 <= self.p0_star <= self.p and 1 <= self.q0_star <= self.q):
            raise InvalidInputError("core ranks out of range")
        if self.r_star > self.p0_star * self.q0_star:
            raise InvalidInputError("r_star must not exceed p0_star * q0_star")
        k = np.asarray(self.kappa, dtype=np.float64)
        if k.size != self.r_star or np.any(np.diff(k) > 0):
            raise InvalidInputError("kappa length must equal r_star, non-increasing")
        if np.any(k <= self.c_value):
            raise InvalidInputError("spikes must exceed the core noise level c")
        if self.noise_family not in ("gaussian", "t5"):
            raise InvalidInputError("noise_family must be 'gaussian' or 't5'")

    @property
    def c_value(self):
        return 1.001 * self.sigma2 if self.c is None else self.c

    @property
    def snr(self):
        """sum(kappa - c) / (p q sigma2 + p0* q0* c)."""
        c = self.c_value
        num = float(np.sum(np.asarray(self.kappa) - c))
        den = self.p * self.q * self.sigma2 + self.p0_star * self.q0_star * c
        return num / den


def random_orthonormal(rows, cols, rng):
    """Uniformly random frame with orthonormal columns (QR of a Gaussian
    matrix, signs fixed by forcing a positive R diagonal)."""
    if cols > rows:
        raise InvalidInputError("cannot build more orthonormal columns than rows")
    G = rng.standard_normal((rows, cols))
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def gen_multivariate_t(dim, dof, n, seed=None, rng=None):
    """n samples of a dim-variate t distribution with ``dof`` degrees of
    freedom, rescaled to unit marginal variance.  Requires dof > 2."""
    if dof <= 2:
        raise InvalidInputError("dof must exceed 2 for a finite variance")
    if rng is None:
        rng = make_rng(0 if seed is None else seed)
    z = rng.standard_normal((n, dim))
    w = rng.chisquare(dof, size=n) / dof
    return z / np.sqrt(w)[:, None] * np.sqrt((dof - 2.0) / dof)


def _noise(rng, family, n, dim):
    if family == "gaussian":
        return rng.standard_normal((n, dim))
    return gen_multivariate_t(dim, 5, n, rng=rng)


@dataclass(frozen=True)
class SynthData:
    """Generated sample: noisy stack, noiseless signal stack, and the
    generating factors keyed by name."""

    stack: np.ndarray
    truth: np.ndarray
    factors: dict


def gen_pca_data(spec: PcaSynthSpec) -> SynthData:
    """Draw from the vector design: Gamma is a uniformly random
    orthonormal frame, nu has diagonal covariance ``delta``, and the
    additive noise has variance ``c`` per entry."""
    spec.validate()
    rng = make_rng(spec.seed)
    pq = spec.p * spec.q
    Gamma = random_orthonormal(pq, spec.r_star, rng)
    nu = rng.standard_normal((spec.n, spec.r_star)) * np.sqrt(spec.delta)
    signal = nu @ Gamma.T
    noise = np.sqrt(spec.c) * rng.standard_normal((spec.n, pq))
    truth = unvec(signal, spec.p, spec.q)
    stack = unvec(signal + noise, spec.p, spec.q)
    return SynthData(stack=stack, truth=truth,
                     factors={"Gamma": Gamma, "nu": nu})


def gen_hmpca_data(spec: HmpcaSynthSpec) -> SynthData:
    """Draw from the two-layer design.

    vec(U) = G nu + eps with spike variances kappa_i - c and core noise
    variance c, so Cov(vec U) has eigenvalues kappa_1..kappa_r then c.
    X = A U B^T + E with image noise variance sigma2.  The t5 family
    replaces both eps and E by multivariate t draws (5 dof, unit
    marginal variance) scaled to the same levels.

    ``truth`` is the rank-r* signal A fold(G nu) B^T; both eps and E
    count as noise for reconstruction error.
    """
    spec.validate()
    rng = make_rng(spec.seed)
    c = spec.c_value
    m = spec.p0_star * spec.q0_star
    A = random_orthonormal(spec.p, spec.p0_star, rng)
    B = random_orthonormal(spec.q, spec.q0_star, rng)
    G = random_orthonormal(m, spec.r_star, rng)
    spike_sd = np.sqrt(np.asarray(spec.kappa, dtype=np.float64) - c)
    nu = rng.standard_normal((spec.n, spec.r_star)) * spike_sd
    eps = np.sqrt(c) * _noise(rng, spec.noise_family, spec.n, m)
    E = np.sqrt(spec.sigma2) * _noise(rng, spec.noise_family, spec.n,
                                      spec.p * spec.q)

    core_signal = unvec(nu @ G.T, spec.p0_star, spec.q0_star)
    cores = unvec(nu @ G.T + eps, spec.p0_star, spec.q0_star)
    truth = np.einsum("ip,npq,jq->nij", A, core_signal, B, optimize=True)
    stack = (
        np.einsum("ip,npq,jq->nij", A, cores, B, optimize=True)
        + unvec(E, spec.p, spec.q)
    )
    return SynthData(stack=stack, truth=truth,
                     factors={"A": A, "B": B, "G": G, "nu": nu, "U": cores})
