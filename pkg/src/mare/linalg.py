"""Dense real linear-algebra kernels.

Everything here works on small dense ``float64`` arrays (a few hundred rows
at most).  LAPACK does the heavy lifting through numpy/scipy; this module adds
the ordering, thresholds and failure modes the Riccati solvers rely on.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .errors import (
    NearSingularOperator,
    NoConvergence,
    NullSpaceDimension,
    ReorderFailure,
    SignFailure,
    SingularMatrix,
)

#: relative pivot / eigenvalue threshold, scaled by the matrix max-norm
SINGULARITY_THRESHOLD = 1e-12
#: orthogonality loss tolerated after block reordering
REORDER_ORTHO_TOL = 1e-8


def as_matrix(M, name="matrix"):
    """Return ``M`` as a finite 2-D float64 array (copy not guaranteed)."""
    A = np.asarray(M, dtype=float)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def _square(M, name="matrix"):
    A = as_matrix(M, name)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    return A


def max_norm(M):
    M = np.asarray(M)
    return float(np.max(np.abs(M))) if M.size else 0.0


def linear_solve(M, RHS, threshold=SINGULARITY_THRESHOLD):
    """Solve ``M X = RHS`` by LU with partial pivoting.

    Raises :class:`SingularMatrix` when a pivot falls below
    ``threshold * max|M|``.
    """
    M = _square(M, "M")
    B = np.asarray(RHS, dtype=float)
    vector = B.ndim == 1
    if vector:
        B = B[:, None]
    if B.shape[0] != M.shape[0]:
        raise ValueError(f"RHS has {B.shape[0]} rows, M has dimension {M.shape[0]}")
    if M.shape[0] == 0:
        return B.copy()
    scale = max_norm(M)
    if scale == 0.0:
        raise SingularMatrix("matrix is zero")
    with warnings.catch_warnings():
        # exact singularity is reported below through the pivot check
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(M, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() <= threshold * scale:
        raise SingularMatrix(
            f"pivot {pivots.min():.3e} below threshold {threshold * scale:.3e}"
        )
    X = sla.lu_solve((lu, piv), B, check_finite=False)
    return X[:, 0] if vector else X


def eigenvalues(M):
    """All eigenvalues of a real square matrix as a complex array."""
    M = _square(M, "M")
    if M.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    try:
        return np.linalg.eigvals(M).astype(complex)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc


def sort_descending(lams):
    """Sort eigenvalues by descending real part, ties by descending imaginary part."""
    lams = np.asarray(lams, dtype=complex)
    order = np.lexsort((-lams.imag, -lams.real))
    return lams[order]


@dataclass(frozen=True)
class SchurForm:
    """Real Schur decomposition ``M = Q T Q^T``."""

    Q: np.ndarray
    T: np.ndarray

    def blocks(self):
        return schur_blocks(self.T)

    def block_eigenvalues(self):
        """Eigenvalues read off the diagonal blocks, in diagonal order."""
        out = []
        for start, size in self.blocks():
            if size == 1:
                out.append(complex(self.T[start, start]))
            else:
                ev = np.linalg.eigvals(self.T[start:start + 2, start:start + 2])
                ev = sorted(ev.astype(complex), key=lambda z: -z.imag)
                out.extend(ev)
        return np.array(out, dtype=complex)


def schur_blocks(T):
    """``(start, size)`` of every diagonal block of a quasi-triangular ``T``."""
    n = T.shape[0]
    blocks = []
    i = 0
    while i < n:
        if i + 1 < n and T[i + 1, i] != 0.0:
            blocks.append((i, 2))
            i += 2
        else:
            blocks.append((i, 1))
            i += 1
    return blocks


def _block_eigs(T, start, size):
    if size == 1:
        return (complex(T[start, start]),)
    ev = np.linalg.eigvals(T[start:start + 2, start:start + 2]).astype(complex)
    return tuple(sorted(ev, key=lambda z: -z.imag))


def descending_real_part(eigs):
    """Default ordering key: real part, then imaginary part, larger first."""
    return (float(np.mean([z.real for z in eigs])), float(max(abs(z.imag) for z in eigs)))


def ordered_real_schur(M, key=descending_real_part):
    """Real Schur form with eigenvalues ordered by descending real part.

    Ties in the real part are broken by descending imaginary part; complex
    conjugate pairs always stay together in one 2x2 block.  Adjacent blocks
    are exchanged with LAPACK ``dtrexc``.

    ``key`` maps the eigenvalues of one diagonal block (a tuple of one or two
    complex numbers) to a sortable value; blocks with larger keys move up.
    """
    M = _square(M, "M")
    n = M.shape[0]
    if n == 0:
        return SchurForm(np.zeros((0, 0)), np.zeros((0, 0)))
    try:
        T, Q = sla.schur(M, output="real")
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    T = np.asfortranarray(T)
    Q = np.asfortranarray(Q)

    pos = 0
    while pos < n:
        blocks = [b for b in schur_blocks(T) if b[0] >= pos]
        keys = [key(_block_eigs(T, *b)) for b in blocks]
        # first maximum keeps the sort stable among equal keys
        best = blocks[max(range(len(blocks)), key=lambda i: (keys[i], -i))]
        if best[0] != pos:
            T, Q, info = lapack.dtrexc(T, Q, best[0] + 1, pos + 1)
            if info != 0:
                raise ReorderFailure(f"dtrexc failed with info={info}")
        # the moved block may have split into two 1x1 blocks; re-read its size
        pos += 2 if (pos + 1 < n and T[pos + 1, pos] != 0.0) else 1

    T = np.array(T)
    Q = np.array(Q)
    loss = np.linalg.norm(Q.T @ Q - np.eye(n))
    if loss > REORDER_ORTHO_TOL:
        raise ReorderFailure(f"orthogonality loss {loss:.2e} after reordering")
    return SchurForm(Q=Q, T=T)


def solve_sylvester(P, Q, C, threshold=SINGULARITY_THRESHOLD):
    """Solve ``P X + X Q = C`` (Bartels-Stewart).

    Raises :class:`NearSingularOperator` when some ``lambda_i(P) + mu_j(Q)``
    is below ``threshold`` times the larger max-norm of ``P`` and ``Q``.
    """
    P = _square(P, "P")
    Q = _square(Q, "Q")
    C = as_matrix(C, "C")
    if C.shape != (P.shape[0], Q.shape[0]):
        raise ValueError(f"C has shape {C.shape}, expected {(P.shape[0], Q.shape[0])}")
    if C.size == 0:
        return np.zeros_like(C)
    sep = sylvester_separation(P, Q)
    scale = max(max_norm(P), max_norm(Q), 1.0)
    if sep <= threshold * scale:
        raise NearSingularOperator(
            f"min |lambda(P) + lambda(Q)| = {sep:.3e}; Sylvester operator singular"
        )
    return sla.solve_sylvester(P, Q, C)


def sylvester_separation(P, Q):
    """``min |lambda_i(P) + mu_j(Q)|`` over the two spectra."""
    lp = eigenvalues(P)
    lq = eigenvalues(Q)
    return float(np.min(np.abs(lp[:, None] + lq[None, :])))


def sylvester_kron(P, Q, C):
    """Dense Kronecker-form solve of ``P X + X Q = C``.

    Meant for small operands only (verification and the critical-case
    fallback).  Uses least squares so a singular operator still yields the
    minimum-norm solution.  Returns ``(X, cond)``.
    """
    P = as_matrix(P)
    Q = as_matrix(Q)
    C = as_matrix(C)
    m, n = C.shape
    # column-major vec: vec(PX + XQ) = (I kron P + Q^T kron I) vec(X)
    L = np.kron(np.eye(n), P) + np.kron(Q.T, np.eye(m))
    x, *_ = np.linalg.lstsq(L, C.reshape(-1, order="F"), rcond=None)
    cond = float(np.linalg.cond(L))
    return x.reshape((m, n), order="F"), cond


def _collatz_wielandt(N, steps=200):
    """Lower and upper Perron-root bounds for a nonnegative ``N``."""
    n = N.shape[0]
    x = np.ones(n)
    shifted = N + np.eye(n)
    for _ in range(steps):
        x = shifted @ x
        x /= x.max()
    y = N @ x
    ratios = y / x
    return float(ratios.min()), float(ratios.max())


def spectral_radius(M, nonnegative=False):
    """Largest eigenvalue modulus.

    With ``nonnegative=True`` the value is cross-checked against
    Collatz-Wielandt bounds ``min (Nx)_i/x_i <= rho <= max (Nx)_i/x_i``
    computed from a power-iteration vector.
    """
    M = _square(M, "M")
    if M.shape[0] == 0:
        return 0.0
    rho = float(np.max(np.abs(eigenvalues(M))))
    if nonnegative:
        if np.any(M < 0):
            raise ValueError("nonnegative=True but M has negative entries")
        lo, hi = _collatz_wielandt(M)
        slack = 1e-6 * max(rho, 1.0)
        if not (lo - slack <= rho <= hi + slack):
            raise NoConvergence(
                f"spectral radius {rho} outside Collatz-Wielandt bounds [{lo}, {hi}]"
            )
    return rho


def null_rank(M, tol=1e-10):
    """Numerical dimension of the null space: singular values <= tol*max(1, sigma_max)."""
    M = _square(M, "M")
    if M.shape[0] == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s <= tol * max(1.0, s[0])))


def min_singular_value(M):
    M = _square(M, "M")
    if M.shape[0] == 0:
        return np.inf
    return float(np.linalg.svd(M, compute_uv=False)[-1])


def nonneg_null_vector(M, side="right", tol=1e-10):
    """Nonnegative null vector of a singular M-matrix, normalized to unit 1-norm.

    ``side="left"`` returns ``w`` with ``w^T M = 0``.  The null space must be
    numerically one-dimensional.
    """
    M = _square(M, "M")
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    A = M.T if side == "left" else M
    U, s, Vt = np.linalg.svd(A)
    scale = max(1.0, s[0])
    rank_def = int(np.sum(s <= tol * scale))
    if rank_def != 1:
        raise NullSpaceDimension(f"numerical null space has dimension {rank_def}, expected 1")
    w = Vt[-1].copy()
    if w.sum() < 0:
        w = -w
    w[np.abs(w) <= 1e-12] = 0.0
    if np.any(w < -1e-9):
        raise SignFailure("null vector has entries of both signs")
    w = np.clip(w, 0.0, None)
    total = w.sum()
    if total <= 0:
        raise SignFailure("null vector vanished after clamping")
    return w / total
