"""Estimator-style wrappers (fit/transform/predict, get_params) around
the functional core, for use in scikit-learn pipelines.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin

from .errors import InvalidInputError
from .gammasup import (
    DEFAULT_MIN_SIZE,
    DEFAULT_S,
    GammaSupConfig,
    gamma_sup,
    normalize_scores,
    phase_transition_scan,
)
from .linalg import as_stack
from .pipeline import denoise, fit_2sdr, scores
from .tsne import TsneConfig, tsne


def _check_fitted(est, attr):
    if not hasattr(est, attr):
        raise InvalidInputError(
            f"{type(est).__name__} instance is not fitted yet"
        )


class TwoStageReducer(BaseEstimator, TransformerMixin):
    """Two-stage reduction of an (n, p, q) image stack.

    ``fit`` selects the stage-1 rank pair by the unbiased-risk grid and
    the stage-2 rank by the generalized information criterion;
    ``transform`` returns the n x r score matrix and ``inverse_transform``
    / ``reconstruct`` map back to denoised images.
    """

    def __init__(self, p_u=None, q_u=None, sigma2=None, r_max=None):
        self.p_u = p_u
        self.q_u = q_u
        self.sigma2 = sigma2
        self.r_max = r_max

    def fit(self, X, y=None):
        X = as_stack(X, min_samples=2)
        self.model_ = fit_2sdr(X, p_u=self.p_u, q_u=self.q_u,
                               sigma2=self.sigma2, r_max=self.r_max)
        self.ranks_ = self.model_.ranks
        self.n_features_in_ = X.shape[1] * X.shape[2]
        return self

    def transform(self, X):
        _check_fitted(self, "model_")
        return scores(self.model_, as_stack(X))

    def reconstruct(self, X):
        """Denoised images: projection of each sample onto the fitted
        low-dimensional subspace, mapped back to image space."""
        _check_fitted(self, "model_")
        return denoise(self.model_, as_stack(X))

    def inverse_transform(self, S):
        _check_fitted(self, "model_")
        from .linalg import unvec
        from .mpca import reconstruct as mpca_reconstruct

        S = np.asarray(S, dtype=np.float64)
        if S.ndim != 2 or S.shape[1] != self.model_.pca.r:
            raise InvalidInputError(
                f"scores must be n x {self.model_.pca.r}, got {S.shape}"
            )
        p0, q0 = self.model_.mpca.ranks
        V = S @ self.model_.pca.basis.T
        return mpca_reconstruct(self.model_.mpca, unvec(V, p0, q0))


class GammaSupClusterer(BaseEstimator, ClusterMixin):
    """Mode-seeking clusterer over score vectors.

    With ``tau=None`` the scale is chosen by the phase-transition scan
    (the tau maximizing the number of clusters of size > ``min_size``).
    """

    def __init__(self, tau=None, s=DEFAULT_S, min_size=DEFAULT_MIN_SIZE,
                 max_iter=500, normalize=True):
        self.tau = tau
        self.s = s
        self.min_size = min_size
        self.max_iter = max_iter
        self.normalize = normalize

    def fit(self, X, y=None):
        pts = np.asarray(X, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if self.normalize:
            pts = normalize_scores(pts)
        if self.tau is None:
            scan = phase_transition_scan(
                pts, s=self.s, min_size=self.min_size,
                normalize=False, max_iter=self.max_iter,
            )
            self.scan_ = scan
            self.tau_ = scan.recommended_tau
        else:
            self.tau_ = float(self.tau)
        result = gamma_sup(
            pts, GammaSupConfig(tau=self.tau_, s=self.s, max_iter=self.max_iter)
        )
        self.result_ = result
        self.labels_ = result.labels
        self.cluster_centers_ = result.centers
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).labels_


class ExactTsneEmbedding(BaseEstimator):
    """Exact two-dimensional stochastic-neighbor embedding of scores."""

    def __init__(self, out_dim=2, perplexity=30.0, eta=200.0, iters=1000,
                 seed=0, early_exaggeration=12.0):
        self.out_dim = out_dim
        self.perplexity = perplexity
        self.eta = eta
        self.iters = iters
        self.seed = seed
        self.early_exaggeration = early_exaggeration

    def fit(self, X, y=None):
        config = TsneConfig(
            out_dim=self.out_dim,
            perplexity=self.perplexity,
            eta=self.eta,
            iters=self.iters,
            seed=self.seed,
            early_exaggeration=self.early_exaggeration,
        )
        self.embedding_, self.kl_trace_ = tsne(np.asarray(X), config)
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).embedding_
