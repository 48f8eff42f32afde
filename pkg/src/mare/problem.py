"""The Riccati problem ``XCX - XD - AX + B = 0`` and its solution records.

The coefficients are stored as the four blocks of

    K = [[ D, -C],
         [-B,  A]]

with ``A`` m x m, ``B`` m x n, ``C`` n x m and ``D`` n x n.  ``K`` must be a
Z-matrix; whether it is an M-matrix (and a regular one) is the business of
:mod:`mare.mmatrix`.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from .errors import BadDimensions, NotRegular, NotZ, ShapeMismatch
from .mmatrix import MatrixKind, categorize, is_z_matrix

#: A[i, i] <= ZERO_DIAG_TOL * (1 + ||A||_inf) counts as a zero diagonal entry
ZERO_DIAG_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class RiccatiProblem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float, ndmin=2)
        D = np.array(self.D, dtype=float, ndmin=2)
        m, n = A.shape[0], D.shape[0]
        B = np.array(self.B, dtype=float).reshape(m, n) if np.size(self.B) == m * n else None
        C = np.array(self.C, dtype=float).reshape(n, m) if np.size(self.C) == n * m else None
        if A.shape != (m, m) or D.shape != (n, n) or B is None or C is None:
            raise BadDimensions(
                f"inconsistent blocks: A {np.shape(self.A)}, B {np.shape(self.B)}, "
                f"C {np.shape(self.C)}, D {np.shape(self.D)}"
            )
        for name, blk in (("A", A), ("B", B), ("C", C), ("D", D)):
            if not np.all(np.isfinite(blk)):
                raise ValueError(f"block {name} has non-finite entries")
            blk.setflags(write=False)
            object.__setattr__(self, name, blk)
        if m + n and not is_z_matrix(self.K):
            raise NotZ("K = [D -C; -B A] is not a Z-matrix")

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def n(self):
        return self.D.shape[0]

    @property
    def K(self):
        return np.block([[self.D, -self.C], [-self.B, self.A]])

    @classmethod
    def from_k(cls, K, n):
        """Split an (n+m) x (n+m) Z-matrix into its four blocks."""
        K = linalg.as_matrix(K, "K")
        if K.shape[0] != K.shape[1]:
            raise BadDimensions(f"K must be square, got {K.shape}")
        size = K.shape[0]
        if not (1 <= n < size):
            raise BadDimensions(f"need 1 <= n < {size}, got n={n}")
        if not is_z_matrix(K):
            raise NotZ("K is not a Z-matrix")
        return cls(A=K[n:, n:], B=-K[n:, :n], C=-K[:n, n:], D=K[:n, :n])

    def h_matrix(self):
        """``H = diag(I_n, -I_m) K = [[D, -C], [B, -A]]``."""
        return np.block([[self.D, -self.C], [self.B, -self.A]])

    def residual(self, X):
        X = np.asarray(X, dtype=float)
        if X.shape != (self.m, self.n):
            raise ShapeMismatch(f"X has shape {X.shape}, expected {(self.m, self.n)}")
        return X @ self.C @ X - X @ self.D - self.A @ X + self.B

    def relative_residual(self, X):
        """``||R(X)||_F`` over ``||B|| + ||X|| (||C|| ||X|| + ||D|| + ||A||)`` (Frobenius)."""
        X = np.asarray(X, dtype=float)
        nx = np.linalg.norm(X)
        denom = np.linalg.norm(self.B) + nx * (
            np.linalg.norm(self.C) * nx + np.linalg.norm(self.D) + np.linalg.norm(self.A)
        )
        res = np.linalg.norm(self.residual(X))
        if denom == 0.0:
            return float(res)
        return float(res / denom)

    def dual(self):
        """The problem ``YBY - YA - DY + C = 0`` written in the same block form."""
        return RiccatiProblem(A=self.D, B=self.C, C=self.B, D=self.A)

    def same_blocks(self, other):
        return all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in "ABCD"
        )


@dataclass(frozen=True)
class ConvergenceLog:
    method: str
    iterations: int = 0
    residual_history: list = field(default_factory=list)
    rate_estimate: float = float("nan")
    parameters: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class FactorizationReport:
    ok: bool
    defect: float
    r_kind: Optional[MatrixKind] = None
    s_kind: Optional[MatrixKind] = None


@dataclass(frozen=True, eq=False)
class Solution:
    Phi: np.ndarray
    R: np.ndarray
    residual_phi: float
    log: ConvergenceLog
    Psi: Optional[np.ndarray] = None
    S: Optional[np.ndarray] = None
    residual_psi: float = float("nan")
    psi_log: Optional[ConvergenceLog] = None
    kind: Optional[MatrixKind] = None
    factorization: Optional[FactorizationReport] = None
    analysis: Optional[object] = None


def make_solution(p, Phi, log, **extra):
    Phi = np.asarray(Phi, dtype=float)
    return Solution(
        Phi=Phi,
        R=p.D - p.C @ Phi,
        residual_phi=float(np.linalg.norm(p.residual(Phi))),
        log=log,
        **extra,
    )


@dataclass(frozen=True, eq=False)
class ReductionData:
    """Removal of the zero-diagonal rows of ``A`` (which must be zero rows of K).

    ``permutation`` lists the original row indices of ``A`` in their new
    order: kept rows first, zero rows last.
    """

    original: RiccatiProblem
    permutation: list
    r: int
    reduced: RiccatiProblem

    @property
    def kept(self):
        return self.permutation[: len(self.permutation) - self.r]

    @property
    def removed(self):
        return self.permutation[len(self.permutation) - self.r:]


def zero_diagonal_indices(p):
    a = np.diag(p.A)
    cutoff = ZERO_DIAG_TOL * (1.0 + np.linalg.norm(p.A, np.inf))
    return [i for i in range(p.m) if a[i] <= cutoff]


def reduce_zero_diagonal(p):
    """Drop rows/columns of ``A`` whose diagonal vanishes.

    For a regular K every such row of K is identically zero; when it is not,
    K cannot be regular and :class:`NotRegular` is raised.
    """
    zeros = zero_diagonal_indices(p)
    cutoff = ZERO_DIAG_TOL * (1.0 + linalg.max_norm(p.K))
    for i in zeros:
        if linalg.max_norm(p.A[i]) > cutoff or linalg.max_norm(p.B[i]) > cutoff:
            raise NotRegular(
                f"A[{i},{i}] = 0 but row {p.n + i} of K is not a zero row, "
                "so no v > 0 gives Kv >= 0"
            )
    zero_set = set(zeros)
    kept = [i for i in range(p.m) if i not in zero_set]
    perm = kept + zeros
    reduced = RiccatiProblem(
        A=p.A[np.ix_(kept, kept)],
        B=p.B[kept, :],
        C=p.C[:, kept],
        D=p.D,
    )
    return ReductionData(original=p, permutation=perm, r=len(zeros), reduced=reduced)


def embed_solution(red, Phi_reduced):
    """Pad with zero rows for the removed indices and undo the permutation."""
    Phi_reduced = np.asarray(Phi_reduced, dtype=float)
    p = red.original
    if Phi_reduced.shape != (p.m - red.r, p.n):
        raise ShapeMismatch(
            f"reduced solution has shape {Phi_reduced.shape}, expected {(p.m - red.r, p.n)}"
        )
    Phi = np.zeros((p.m, p.n))
    Phi[red.kept, :] = Phi_reduced
    return Phi


def verify_factorization(p, Phi, Psi, tol=1e-8):
    """Check ``H W = W diag(R, -S)`` with ``W = [[I, Psi], [Phi, I]]``.

    Also requires ``R = D - C Phi`` and ``S = A - B Psi`` to categorize as
    regular M-matrices.  Failure is reported, not raised.
    """
    Phi = np.asarray(Phi, dtype=float)
    Psi = np.asarray(Psi, dtype=float)
    m, n = p.m, p.n
    if Phi.shape != (m, n) or Psi.shape != (n, m):
        raise ShapeMismatch("Phi must be m x n and Psi n x m")
    R = p.D - p.C @ Phi
    S = p.A - p.B @ Psi
    W = np.block([[np.eye(n), Psi], [Phi, np.eye(m)]])
    right = np.block([[R, np.zeros((n, m))], [np.zeros((m, n)), -S]])
    defect = float(np.linalg.norm(p.h_matrix() @ W - W @ right))
    r_kind = categorize(R)
    s_kind = categorize(S)
    ok = defect <= tol and r_kind.regular and s_kind.regular
    return FactorizationReport(ok=bool(ok), defect=defect, r_kind=r_kind, s_kind=s_kind)
