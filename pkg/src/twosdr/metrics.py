"""Reconstruction and clustering quality measures."""

import numpy as np

from .errors import InvalidInputError, PerfectReconstruction
from .linalg import as_stack


def mse(recon, truth):
    """sum_i ||vec(recon_i) - vec(truth_i)||^2 / (p q n)."""
    recon = as_stack(recon)
    truth = as_stack(truth)
    if recon.shape != truth.shape:
        raise InvalidInputError(
            f"shape mismatch: {recon.shape} vs {truth.shape}"
        )
    return float(np.mean((recon - truth) ** 2))


def psnr(truth, recon, value_range=None):
    """10 log10(range^2 / MSE).

    ``value_range`` defaults to max - min of the truth stack (float data
    has no datatype-implied range).  Raises PerfectReconstruction when
    the MSE is exactly zero.
    """
    truth = as_stack(truth)
    err = mse(recon, truth)
    if value_range is None:
        value_range = float(truth.max() - truth.min())
    if value_range <= 0:
        raise InvalidInputError("value range must be positive")
    if err == 0.0:
        raise PerfectReconstruction("MSE is zero; PSNR is unbounded")
    return float(10.0 * np.log10(value_range**2 / err))


def _contingency(true_labels, pred_labels):
    t = np.asarray(true_labels)
    p = np.asarray(pred_labels)
    if t.ndim != 1 or t.shape != p.shape:
        raise InvalidInputError("label vectors must be 1-d and equal length")
    if t.size == 0:
        raise InvalidInputError("label vectors must be non-empty")
    _, ti = np.unique(t, return_inverse=True)
    _, pi = np.unique(p, return_inverse=True)
    counts = np.zeros((ti.max() + 1, pi.max() + 1), dtype=np.int64)
    np.add.at(counts, (ti, pi), 1)
    return counts


def impurity(true_labels, pred_labels):
    """1 - n^-1 sum_j max_i |class_i intersect cluster_j|; zero when every
    predicted cluster is pure."""
    counts = _contingency(true_labels, pred_labels)
    return float(1.0 - counts.max(axis=0).sum() / counts.sum())


def c_impurity(true_labels, pred_labels):
    """1 - n^-1 sum_i max_j |class_i intersect cluster_j|; zero when every
    class lands in a single predicted cluster."""
    counts = _contingency(true_labels, pred_labels)
    return float(1.0 - counts.max(axis=1).sum() / counts.sum())
