"""twosdr: two-stage dimension reduction for stacks of noisy matrix
images.

Stage 1 fits a low-rank matrix factorization (mode bases A, B and small
cores) with the rank pair chosen by an unbiased-risk criterion; stage 2
runs PCA on the vectorized cores with the rank chosen by a generalized
information criterion.  The package also ships synthetic-data
generators with known ground truth, reconstruction/clustering metrics,
a mode-seeking clusterer with automatic scale selection, an exact
stochastic-neighbor embedding, bit-exact file formats and a CLI.
"""

__version__ = "0.1.0"

from .errors import (
    DegenerateDataError,
    DegenerateSpectrumError,
    FormatError,
    InvalidInputError,
    PerfectReconstruction,
    SelectionFailedError,
    TwosdrError,
)
from .estimators import ExactTsneEmbedding, GammaSupClusterer, TwoStageReducer
from .gammasup import (
    ClusterResult,
    GammaSupConfig,
    gamma_sup,
    phase_transition_scan,
)
from .gic import GicCurve, PcaModel, aic_bic_select, gic_select, pca_on_cores
from .linalg import as_stack, sym_eig, unvec, vec
from .metrics import c_impurity, impurity, mse, psnr
from .mpca import MpcaModel, fit_glram, project, reconstruct
from .pipeline import Hybrid2SdrModel, denoise, fit_2sdr, scores
from .sure import SureGrid, estimate_noise_variance, select_mpca_rank, sure_score
from .synth import (
    HmpcaSynthSpec,
    PcaSynthSpec,
    SynthData,
    gen_hmpca_data,
    gen_multivariate_t,
    gen_pca_data,
)
from .tsne import TsneConfig, affinities, tsne

__all__ = [
    "__version__",
    "TwosdrError", "InvalidInputError", "DegenerateDataError",
    "DegenerateSpectrumError", "SelectionFailedError", "FormatError",
    "PerfectReconstruction",
    "as_stack", "vec", "unvec", "sym_eig",
    "MpcaModel", "fit_glram", "project", "reconstruct",
    "SureGrid", "select_mpca_rank", "sure_score", "estimate_noise_variance",
    "PcaModel", "GicCurve", "pca_on_cores", "gic_select", "aic_bic_select",
    "Hybrid2SdrModel", "fit_2sdr", "scores", "denoise",
    "PcaSynthSpec", "HmpcaSynthSpec", "SynthData",
    "gen_pca_data", "gen_hmpca_data", "gen_multivariate_t",
    "mse", "psnr", "impurity", "c_impurity",
    "GammaSupConfig", "ClusterResult", "gamma_sup", "phase_transition_scan",
    "TsneConfig", "affinities", "tsne",
    "TwoStageReducer", "GammaSupClusterer", "ExactTsneEmbedding",
]
