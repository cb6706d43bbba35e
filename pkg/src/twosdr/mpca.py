"""Stage-1 factorization: alternating generalized low-rank approximation
of a matrix stack, plus projection to cores and reconstruction.

The model is  X_i = mean + A U_i B^T + noise  with orthonormal mode
bases A (p x p0) and B (q x q0) and p0 x q0 cores U_i.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDataError, InvalidInputError
from .linalg import as_stack, center, mode_scatter_from_factor, sym_eig

DEFAULT_MAX_ITER = 30
DEFAULT_TOL = 1e-6
_TIE_REL = 1e-12


@dataclass
class MpcaModel:
    """Fitted stage-1 model.

    ``lam`` and ``xi`` are the full eigenvalue lists (lengths p and q) of
    the final column- and row-mode covariances; ``sigma2`` is filled in
    by rank selection, not by the fit itself.
    """

    mean: np.ndarray
    A: np.ndarray
    B: np.ndarray
    lam: np.ndarray
    xi: np.ndarray
    sigma2: float | None = None
    converged: bool = True
    n_iter: int = 0
    notes: tuple = field(default_factory=tuple)
    capture_history: tuple = field(default_factory=tuple)

    @property
    def shape(self):
        return self.A.shape[0], self.B.shape[0]

    @property
    def ranks(self):
        return self.A.shape[1], self.B.shape[1]

    def truncated(self, p0, q0):
        """Model restricted to the first p0 / q0 basis columns."""
        if not (1 <= p0 <= self.A.shape[1] and 1 <= q0 <= self.B.shape[1]):
            raise InvalidInputError(f"cannot truncate to ranks ({p0}, {q0})")
        return MpcaModel(
            mean=self.mean,
            A=self.A[:, :p0],
            B=self.B[:, :q0],
            lam=self.lam,
            xi=self.xi,
            sigma2=self.sigma2,
            converged=self.converged,
            n_iter=self.n_iter,
            notes=self.notes,
            capture_history=self.capture_history,
        )


def _boundary_tie_note(values, k, label):
    if k < len(values) and values[0] > 0:
        gap = values[k - 1] - values[k]
        if gap < _TIE_REL * values[0]:
            return (f"near-tie in {label} eigenvalues at the rank boundary {k}",)
    return ()


def fit_glram(stack, p0, q0, max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL):
    """Fit mode bases by alternating eigendecompositions.

    B is initialized from one PCA pass on the plain row scatter; the
    iteration then alternates A | B updates until the captured variance
    trace changes by less than ``tol`` relatively (or ``max_iter`` is
    hit, in which case the model is returned flagged non-converged).
    """
    stack = as_stack(stack, min_samples=2)
    n, p, q = stack.shape
    if not (1 <= p0 <= p and 1 <= q0 <= q):
        raise InvalidInputError(f"ranks ({p0}, {q0}) out of range for ({p}, {q})")
    if max_iter < 1:
        raise InvalidInputError("max_iter must be >= 1")
    if tol <= 0:
        raise InvalidInputError("tol must be positive")

    mean, Xc = center(stack)
    total = float(np.sum(Xc * Xc)) / n
    if total <= 1e-300:
        raise DegenerateDataError("all samples are identical; nothing to fit")

    # One PCA pass on the unprojected row scatter seeds B.
    S_row0 = mode_scatter_from_factor(Xc, np.eye(p), "row")
    B = sym_eig(S_row0, q0).vectors

    captured = -np.inf
    history = []
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        S_col = mode_scatter_from_factor(Xc, B, "column")
        eig_col = sym_eig(S_col, p)
        A = eig_col.vectors[:, :p0]
        S_row = mode_scatter_from_factor(Xc, A, "row")
        eig_row = sym_eig(S_row, q)
        B = eig_row.vectors[:, :q0]
        new_captured = float(np.sum(eig_row.values[:q0]))
        history.append(new_captured)
        if abs(new_captured - captured) < tol * max(abs(new_captured), 1e-300):
            captured = new_captured
            converged = True
            break
        captured = new_captured

    # Final full spectra at the fixed point reached.
    S_col = mode_scatter_from_factor(Xc, B, "column")
    eig_col = sym_eig(S_col, p)
    A = eig_col.vectors[:, :p0]
    S_row = mode_scatter_from_factor(Xc, A, "row")
    eig_row = sym_eig(S_row, q)
    B = eig_row.vectors[:, :q0]

    notes = _boundary_tie_note(eig_col.values, p0, "column-mode")
    notes += _boundary_tie_note(eig_row.values, q0, "row-mode")

    return MpcaModel(
        mean=mean,
        A=A,
        B=B,
        lam=eig_col.values,
        xi=eig_row.values,
        converged=converged,
        n_iter=n_iter,
        notes=notes,
        capture_history=tuple(history),
    )


def project(model, stack):
    """Cores U_i = A^T (X_i - mean) B for every sample in the stack."""
    stack = as_stack(stack)
    if stack.shape[1:] != model.shape:
        raise InvalidInputError(
            f"stack images {stack.shape[1:]} do not match model {model.shape}"
        )
    Xc = stack - model.mean
    return np.einsum("ip,nij,jq->npq", model.A, Xc, model.B, optimize=True)


def reconstruct(model, cores):
    """Images mean + A U_i B^T from a stack of cores."""
    cores = as_stack(cores)
    if cores.shape[1:] != model.ranks:
        raise InvalidInputError(
            f"cores {cores.shape[1:]} do not match model ranks {model.ranks}"
        )
    return model.mean + np.einsum(
        "ip,npq,jq->nij", model.A, cores, model.B, optimize=True
    )
