"""End-to-end two-stage reduction: oversized stage-1 fit with rank
selection, PCA of the cores with rank selection, then denoising and
score extraction against the combined model.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .gic import GicCurve, PcaModel, gic_select, pca_on_cores
from .linalg import as_stack, unvec, vec
from .mpca import MpcaModel, project, reconstruct
from .sure import SureGrid, select_mpca_rank

_CORE_MEAN_TOL = 1e-8


@dataclass
class Hybrid2SdrModel:
    """Stage-1 model truncated to the selected ranks, stage-2 PCA at the
    selected rank, and the two selection reports for auditability."""

    mpca: MpcaModel
    pca: PcaModel
    sure_grid: SureGrid
    gic_curve: GicCurve

    @property
    def ranks(self):
        p0, q0 = self.mpca.ranks
        return p0, q0, self.pca.r


def fit_2sdr(stack, p_u=None, q_u=None, sigma2=None, r_max=None):
    """Run the four-step procedure on a stack.

    Stage 1 picks (p0, q0) by the unbiased-risk grid under surrogate
    ranks (p_u, q_u); stage 2 runs PCA on the vectorized cores and picks
    r by the generalized information criterion.
    """
    stack = as_stack(stack, min_samples=2)
    mpca_model, grid = select_mpca_rank(stack, p_u=p_u, q_u=q_u, sigma2=sigma2)
    cores = project(mpca_model, stack)

    # Cores inherit zero mean from stage-1 centering; no re-centering.
    core_mean = np.abs(cores.mean(axis=0)).max()
    scale = max(np.abs(cores).max(), 1.0)
    if core_mean > _CORE_MEAN_TOL * scale:
        raise InvalidInputError("cores are unexpectedly far from zero mean")

    pca_model = pca_on_cores(cores)
    m = pca_model.dim
    if r_max is None:
        r_max = min(m - 1, stack.shape[0] - 1)
    curve = gic_select(pca_model.kappa, stack.shape[0], r_max=r_max)
    pca_model = pca_model.with_rank(curve.r_hat)
    return Hybrid2SdrModel(mpca=mpca_model, pca=pca_model,
                           sure_grid=grid, gic_curve=curve)


def scores(model, stack):
    """n x r score matrix G^T vec(U_i)."""
    cores = project(model.mpca, stack)
    return vec(cores) @ model.pca.basis


def denoise(model, stack):
    """Project each sample onto the selected r-dimensional affine
    subspace and map it back to image space."""
    p0, q0 = model.mpca.ranks
    cores = project(model.mpca, stack)
    V = vec(cores)
    smoothed = (V @ model.pca.basis) @ model.pca.basis.T
    return reconstruct(model.mpca, unvec(smoothed, p0, q0))
