"""Z-matrix / M-matrix categorization and regularity certificates."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linprog
from scipy.sparse.csgraph import connected_components

from . import linalg

#: relative slack on s - rho(N) when deciding the M-matrix property
M_TOL = 1e-8


@dataclass(frozen=True)
class MatrixKind:
    is_z: bool
    is_m: bool
    singular: bool
    irreducible: bool
    regular: bool
    certificate: Optional[np.ndarray]
    null_rank: int

    @property
    def nonsingular_m(self):
        return self.is_m and not self.singular

    def summary(self):
        if not self.is_z:
            return "not a Z-matrix"
        if not self.is_m:
            return "Z-matrix, not an M-matrix"
        parts = [
            "singular" if self.singular else "nonsingular",
            "irreducible" if self.irreducible else "reducible",
            "regular" if self.regular else "not regular",
        ]
        return "M-matrix (" + ", ".join(parts) + ")"


def is_z_matrix(M):
    """True iff every off-diagonal entry of ``M`` is <= 0."""
    M = linalg._square(M, "M")
    off = M - np.diag(np.diag(M))
    return bool(np.all(off <= 0.0))


def is_irreducible(M):
    """Strong connectivity of the digraph with an edge i->j for each nonzero M[i, j], i != j.

    A 1x1 matrix counts as irreducible.
    """
    M = linalg._square(M, "M")
    n = M.shape[0]
    if n <= 1:
        return True
    adj = (M != 0.0).astype(np.int8)
    np.fill_diagonal(adj, 0)
    ncomp, _ = connected_components(adj, directed=True, connection="strong")
    return ncomp == 1


def _certificate_ok(M, v, tol):
    scale = max(linalg.max_norm(M), 1.0) * max(float(np.max(v)), 1.0)
    return bool(np.all(v > 0) and np.all(M @ v >= -tol * scale))


def regularity_certificate(M, tol=1e-10):
    """Return ``v >= 1`` with ``Mv >= 0`` if one exists, else ``None``.

    The all-ones vector is tried first; otherwise the feasibility problem
    ``min sum(v)  s.t.  Mv >= 0, v >= 1`` is handed to HiGHS.
    """
    M = linalg._square(M, "M")
    n = M.shape[0]
    if n == 0:
        return np.zeros(0)
    ones = np.ones(n)
    if _certificate_ok(M, ones, tol):
        return ones
    res = linprog(
        c=ones,
        A_ub=-M,
        b_ub=np.zeros(n),
        bounds=[(1.0, None)] * n,
        method="highs",
    )
    if res.status != 0:
        return None
    v = np.maximum(np.asarray(res.x, dtype=float), 1.0)
    if not _certificate_ok(M, v, tol):
        return None
    return v


def categorize(M, tol=1e-10):
    """Place ``M`` in the Z/M/singular/irreducible/regular taxonomy.

    ``M = sI - N`` with ``s`` the largest diagonal entry; ``M`` is an
    M-matrix when ``s >= rho(N)`` (up to :data:`M_TOL`), or whenever a
    regularity certificate exists.  Singularity is read from the smallest
    singular value, which stays accurate when the zero eigenvalue is
    defective.
    """
    M = linalg._square(M, "M")
    n = M.shape[0]
    irreducible = is_irreducible(M)
    nrank = linalg.null_rank(M, tol) if n else 0
    if not is_z_matrix(M):
        return MatrixKind(False, False, False, irreducible, False, None, nrank)
    if n == 0:
        return MatrixKind(True, True, False, True, True, np.zeros(0), 0)

    cert = regularity_certificate(M, tol)
    s = float(np.max(np.diag(M)))
    N = s * np.eye(n) - M
    rho = linalg.spectral_radius(N)
    is_m = cert is not None or (s - rho) >= -M_TOL * max(abs(s), 1.0)
    singular = False
    if is_m:
        sigma = linalg.min_singular_value(M)
        singular = sigma <= tol * max(1.0, np.linalg.norm(M, 2))
    return MatrixKind(
        is_z=True,
        is_m=bool(is_m),
        singular=bool(singular),
        irreducible=irreducible,
        regular=cert is not None,
        certificate=cert,
        null_rank=nrank,
    )
