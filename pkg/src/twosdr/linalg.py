"""Numeric substrate: image stacks, centering, mode covariances and a
deterministic symmetric eigendecomposition used by every other module.

A *stack* is an ``(n, p, q)`` float64 array of n images of identical
shape.  All operations here are pure functions.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

SYM_TOL = 1e-10


def as_stack(data, min_samples=1):
    """Validate and return ``data`` as an (n, p, q) float64 stack.

    Raises InvalidInputError on wrong rank, empty axes or non-finite
    entries.
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 3:
        raise InvalidInputError(f"stack must be 3-d (n, p, q), got shape {arr.shape}")
    n, p, q = arr.shape
    if n < min_samples:
        raise InvalidInputError(f"stack needs at least {min_samples} samples, got {n}")
    if p < 1 or q < 1:
        raise InvalidInputError(f"image dimensions must be positive, got ({p}, {q})")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("stack contains NaN or Inf entries")
    return arr


def vec(images):
    """Column-stacking vectorization of one image or a stack of images."""
    arr = np.asarray(images)
    if arr.ndim == 2:
        return arr.reshape(-1, order="F")
    return arr.reshape(arr.shape[0], -1, order="F")


def unvec(vectors, p, q):
    """Inverse of :func:`vec` for one vector or a batch of row vectors."""
    arr = np.asarray(vectors)
    if arr.ndim == 1:
        return arr.reshape(p, q, order="F")
    return arr.reshape(arr.shape[0], p, q, order="F")


def center(stack):
    """Subtract the entrywise sample mean.

    Returns ``(mean, centered)``.  Requires n >= 2.
    """
    stack = as_stack(stack, min_samples=2)
    mean = stack.mean(axis=0)
    return mean, stack - mean


@dataclass(frozen=True)
class SymEigen:
    """Top-k eigenpairs of a symmetric matrix, eigenvalues non-increasing,
    columns of ``vectors`` orthonormal with a fixed sign convention."""

    values: np.ndarray
    vectors: np.ndarray


def _fix_signs(vectors):
    # Sign convention: the largest-magnitude entry of each column is
    # positive; np.argmax breaks exact ties toward the lowest index.
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def sym_eig(M, k=None):
    """Top-k eigenpairs of the symmetric matrix ``M``.

    ``M`` must be symmetric within SYM_TOL * ||M||; it is symmetrized as
    (M + M^T)/2 before decomposition to shed accumulated rounding
    asymmetry.  Output is deterministic: repeated calls on the same
    input are bit-identical.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError(f"expected a square matrix, got shape {M.shape}")
    m = M.shape[0]
    if k is None:
        k = m
    if not 1 <= k <= m:
        raise InvalidInputError(f"k={k} out of range for a {m}x{m} matrix")
    norm = np.linalg.norm(M)
    if np.linalg.norm(M - M.T) > SYM_TOL * max(norm, 1.0):
        raise InvalidInputError("matrix is not symmetric within tolerance")
    sym = (M + M.T) / 2.0
    values, vectors = np.linalg.eigh(sym)
    values = values[::-1][:k]
    vectors = vectors[:, ::-1][:, :k]
    return SymEigen(values=values, vectors=_fix_signs(vectors))


def _check_projector(P, dim, name):
    P = np.asarray(P, dtype=np.float64)
    if P.shape != (dim, dim):
        raise InvalidInputError(
            f"{name} projector must be {dim}x{dim}, got shape {P.shape}"
        )
    scale = max(np.linalg.norm(P), 1.0)
    if np.linalg.norm(P - P.T) > SYM_TOL * scale:
        raise InvalidInputError(f"{name} projector is not symmetric")
    if np.linalg.norm(P @ P - P) > SYM_TOL * scale * max(dim, 10):
        raise InvalidInputError(f"{name} projector is not idempotent")
    return P


def mode_covariance(centered, projector, mode):
    """Projected mode-wise scatter of a centered stack.

    column mode: n^-1 sum_i X_i P X_i^T   (p x p)
    row mode:    n^-1 sum_i X_i^T P X_i   (q x q)

    ``projector`` must be a symmetric idempotent matrix matching the
    opposing mode's dimension.
    """
    stack = as_stack(centered)
    n, p, q = stack.shape
    if mode == "column":
        P = _check_projector(projector, q, "row-space")
        Y = stack @ P
        C = np.tensordot(Y, stack, axes=([0, 2], [0, 2])) / n
    elif mode == "row":
        P = _check_projector(projector, p, "column-space")
        Y = np.einsum("nij,ik->njk", stack, P, optimize=True)
        C = np.tensordot(Y, stack, axes=([0, 2], [0, 1])) / n
    else:
        raise InvalidInputError(f"mode must be 'column' or 'row', got {mode!r}")
    return (C + C.T) / 2.0


def mode_scatter_from_factor(centered, factor, mode):
    """Same as :func:`mode_covariance` with projector ``factor @ factor.T``,
    computed in factored form (cheaper, used by the GLRAM inner loop)."""
    stack = as_stack(centered)
    n = stack.shape[0]
    if mode == "column":
        Y = stack @ factor  # (n, p, k)
        C = np.tensordot(Y, Y, axes=([0, 2], [0, 2])) / n
    elif mode == "row":
        Y = np.einsum("nij,ik->njk", stack, factor, optimize=True)  # (n, q, k)
        C = np.tensordot(Y, Y, axes=([0, 2], [0, 2])) / n
    else:
        raise InvalidInputError(f"mode must be 'column' or 'row', got {mode!r}")
    return (C + C.T) / 2.0
