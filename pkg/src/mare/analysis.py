"""Structure of the minimal solution for singular K.

Null vectors of K, the zero-eigenvalue structure of H, the three-way case
split driven by the sign of ``u1.v1 - u2.v2``, a battery of property checks
on a computed solution, and a probe for ``rho(Phi Psi) < 1``.
"""

import enum
import itertools
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg, matrixfile
from .errors import DegenerateNullSpace, MareError, NullSpaceDimension, SignFailure
from .mmatrix import categorize

#: |gap| <= GAP_TOL * ||u||_2 ||v||_2 counts as a zero gap (critical case)
GAP_TOL = 1e-10
#: |lambda| <= ZERO_TOL * max(1, max|H|) places an eigenvalue of H in the zero cluster
ZERO_TOL = 1e-6
#: tolerance for the equalities and inequalities in verify_properties
PROP_TOL = 1e-8


class CaseLabel(enum.Enum):
    NONSINGULAR_K = "NonsingularK"
    CASE_I = "I"
    CASE_II = "II"
    CASE_III = "III"
    DEGENERATE = "DegenerateNullSpace"

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class NullData:
    u1: np.ndarray
    u2: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    gap: float

    @property
    def u(self):
        return np.concatenate([self.u1, self.u2])

    @property
    def v(self):
        return np.concatenate([self.v1, self.v2])


def null_data(K, n, tol=1e-10):
    """Nonnegative left/right null vectors of a singular M-matrix, split at ``n``.

    Both are scaled to unit 1-norm.  Raises :class:`DegenerateNullSpace` when
    either null space is not numerically one-dimensional.
    """
    K = linalg.as_matrix(K, "K")
    try:
        v = linalg.nonneg_null_vector(K, "right", tol)
        u = linalg.nonneg_null_vector(K, "left", tol)
    except NullSpaceDimension as exc:
        raise DegenerateNullSpace(str(exc)) from exc
    gap = float(u[:n] @ v[:n] - u[n:] @ v[n:])
    return NullData(u1=u[:n], u2=u[n:], v1=v[:n], v2=v[n:], gap=gap)


@dataclass(frozen=True)
class EigenStructure:
    m1: int
    n1: int
    r: int
    eigvec_count: int
    lambdas: tuple


def zero_eigen_structure(p, tol=ZERO_TOL):
    """Count eigenvalues of H left of, right of, and at zero.

    ``eigvec_count`` is the numerical dimension of null(H).
    """
    Hm = p.h_matrix()
    lams = linalg.sort_descending(linalg.eigenvalues(Hm))
    ztol = tol * max(1.0, linalg.max_norm(Hm))
    zero = np.abs(lams) <= ztol
    n1 = int(np.sum(~zero & (lams.real > 0)))
    m1 = int(np.sum(~zero & (lams.real < 0)))
    r = int(np.sum(zero))
    eigvec_count = linalg.null_rank(Hm) if r else 0
    return EigenStructure(m1=m1, n1=n1, r=r, eigvec_count=eigvec_count, lambdas=tuple(lams))


def gap_label(nd):
    band = GAP_TOL * np.linalg.norm(nd.u) * np.linalg.norm(nd.v)
    if abs(nd.gap) <= band:
        return CaseLabel.CASE_III
    return CaseLabel.CASE_I if nd.gap > 0 else CaseLabel.CASE_II


def classify_case(p, kind=None):
    kind = kind or categorize(p.K)
    if not kind.singular:
        return CaseLabel.NONSINGULAR_K
    try:
        nd = null_data(p.K, p.n)
    except (DegenerateNullSpace, SignFailure):
        return CaseLabel.DEGENERATE
    return gap_label(nd)


# --------------------------------------------------------------------------
# property verification


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    margin: float
    detail: str = ""


@dataclass(frozen=True, eq=False)
class PropertyReport:
    checks: list = field(default_factory=list)

    @property
    def ok(self):
        return all(c.ok for c in self.checks)

    def failed(self):
        return [c for c in self.checks if not c.ok]

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self):
        return [c.name for c in self.checks]


def _leq(name, lhs, rhs, tol=PROP_TOL):
    """lhs <= rhs entrywise; margin is min(rhs - lhs)."""
    diff = np.asarray(rhs, dtype=float) - np.asarray(lhs, dtype=float)
    margin = float(diff.min()) if diff.size else np.inf
    return Check(name, margin >= -tol, margin)


def _eq(name, lhs, rhs, tol=PROP_TOL):
    dev = float(np.max(np.abs(np.asarray(lhs) - np.asarray(rhs)), initial=0.0))
    return Check(name, dev <= tol, tol - dev, f"max deviation {dev:.3e}")


def _neq(name, lhs, rhs, tol=PROP_TOL):
    dev = float(np.max(np.abs(np.asarray(lhs) - np.asarray(rhs)), initial=0.0))
    return Check(name, dev > tol, dev - tol, f"max deviation {dev:.3e}")


def is_numerically_singular(M, tol=PROP_TOL):
    if M.shape[0] == 0:
        return False
    return linalg.min_singular_value(M) <= tol * max(1.0, np.linalg.norm(M, 2))


def _singular(name, M, want=True):
    sigma = linalg.min_singular_value(M) if M.shape[0] else np.inf
    got = is_numerically_singular(M)
    return Check(name, got == want, sigma, f"sigma_min = {sigma:.3e}")


def _multiset_match(a, b, tol):
    a = linalg.sort_descending(a)
    b = linalg.sort_descending(b)
    if len(a) != len(b):
        return np.inf
    # conjugate pairs may come out in either order; compare greedily
    remaining = list(b)
    worst = 0.0
    for z in a:
        j = int(np.argmin([abs(z - w) for w in remaining]))
        worst = max(worst, abs(z - remaining[j]))
        remaining.pop(j)
    return worst


def verify_properties(p, sol, cert=None, nd=None, case=None):
    """Check the known structural properties of ``Phi`` and ``Psi``.

    ``cert`` is a regularity certificate of K (``Kv >= 0``, ``v > 0``);
    ``nd`` the null data for singular K.  Every check carries its margin.
    """
    n, m = p.n, p.m
    Phi = sol.Phi
    Psi = sol.Psi
    checks = []
    if cert is not None:
        v1, v2 = cert[:n], cert[n:]
        checks.append(_leq("cert: Phi v1 <= v2", Phi @ v1, v2))
        if Psi is not None:
            checks.append(_leq("cert: Psi v2 <= v1", Psi @ v2, v1))
    if nd is not None:
        checks.append(_leq("null: Phi v1 <= v2", Phi @ nd.v1, nd.v2))
        checks.append(_leq("null: u2^T Phi <= u1^T", nd.u2 @ Phi, nd.u1))
        if Psi is not None:
            checks.append(_leq("null: Psi v2 <= v1", Psi @ nd.v2, nd.v1))
            checks.append(_leq("null: u1^T Psi <= u2^T", nd.u1 @ Psi, nd.u2))
    if Psi is None:
        return PropertyReport(checks)

    IPP = np.eye(m) - Phi @ Psi
    IQQ = np.eye(n) - Psi @ Phi
    checks.append(Check("I - Phi Psi regular M-matrix", categorize(IPP).regular, 0.0))
    checks.append(Check("I - Psi Phi regular M-matrix", categorize(IQQ).regular, 0.0))

    R = p.D - p.C @ Phi
    S = p.A - p.B @ Psi
    APC = p.A - Phi @ p.C
    DPB = p.D - Psi @ p.B
    checks.append(Check(
        "D - Psi B singular iff D - C Phi singular",
        is_numerically_singular(DPB) == is_numerically_singular(R), 0.0,
    ))
    checks.append(Check(
        "A - Phi C singular iff A - B Psi singular",
        is_numerically_singular(APC) == is_numerically_singular(S), 0.0,
    ))

    if nd is not None and case in (CaseLabel.CASE_I, CaseLabel.CASE_II, CaseLabel.CASE_III):
        u1, u2, v1, v2 = nd.u1, nd.u2, nd.v1, nd.v2
        if case is CaseLabel.CASE_I:
            checks += [
                _eq("I: Phi v1 = v2", Phi @ v1, v2),
                _eq("I: u1^T Psi = u2^T", u1 @ Psi, u2),
                _neq("I: Psi v2 != v1", Psi @ v2, v1),
                _neq("I: u2^T Phi != u1^T", u2 @ Phi, u1),
                _singular("I: D - C Phi singular", R, True),
                _singular("I: A - Phi C nonsingular", APC, False),
            ]
        elif case is CaseLabel.CASE_II:
            checks += [
                _eq("II: Psi v2 = v1", Psi @ v2, v1),
                _eq("II: u2^T Phi = u1^T", u2 @ Phi, u1),
                _neq("II: Phi v1 != v2", Phi @ v1, v2),
                _neq("II: u1^T Psi != u2^T", u1 @ Psi, u2),
                _singular("II: D - C Phi nonsingular", R, False),
                _singular("II: A - Phi C singular", APC, True),
            ]
        else:
            checks += [
                _eq("III: Phi v1 = v2", Phi @ v1, v2),
                _eq("III: Psi v2 = v1", Psi @ v2, v1),
                _eq("III: u1^T Psi = u2^T", u1 @ Psi, u2),
                _eq("III: u2^T Phi = u1^T", u2 @ Phi, u1),
                _singular("III: D - C Phi singular", R, True),
                _singular("III: A - Phi C singular", APC, True),
                _singular("III: I - Phi Psi singular", IPP, True),
            ]

    es = zero_eigen_structure(p)
    lams = np.array(es.lambdas)
    tol = PROP_TOL * max(1.0, linalg.max_norm(p.h_matrix()))
    if es.r >= 2:
        # a defective zero eigenvalue is only located to about sqrt(eps)
        tol = max(tol, 1e-6)
    dev_r = _multiset_match(linalg.eigenvalues(R), lams[:n], tol)
    dev_s = _multiset_match(linalg.eigenvalues(S), -lams[n:], tol)
    checks.append(Check("eig(D - C Phi) = top n eigenvalues of H", dev_r <= tol, tol - dev_r))
    checks.append(Check("eig(A - B Psi) = -(bottom m eigenvalues of H)", dev_s <= tol, tol - dev_s))
    tr_dev = abs(np.trace(R) - float(np.sum(lams[:n].real)))
    checks.append(Check("trace(D - C Phi) = sum of top n Re(lambda)", tr_dev <= PROP_TOL * max(1.0, abs(np.trace(R))), -tr_dev))
    split = max(abs(lams[n - 1].imag), abs(lams[n].imag)) if n < len(lams) else 0.0
    real_tol = tol if es.r >= 2 else 1e-10 * max(1.0, linalg.max_norm(p.h_matrix()))
    checks.append(Check("lambda_n and lambda_n+1 real", split <= real_tol, -split))
    return PropertyReport(checks)


def gap_matches_simple_zero(nd, es):
    """Nonzero gap iff zero is a simple eigenvalue of H."""
    band = GAP_TOL * np.linalg.norm(nd.u) * np.linalg.norm(nd.v)
    return (abs(nd.gap) > band) == (es.r == 1)


# --------------------------------------------------------------------------
# conjecture probe


@dataclass(frozen=True)
class ProbeResult:
    rho: float
    margin: float
    case: CaseLabel
    skipped: bool = False
    reason: str = ""
    candidate: bool = False
    path: Optional[str] = None


def conjecture_probe(p, sol, case=None, out_dir=None, tol=1e-10, tag="candidate"):
    """Measure ``1 - rho(Phi Psi)`` for regular singular K with a nonzero gap.

    A margin at or below ``tol`` marks a candidate counterexample to the
    claim that ``I - Phi Psi`` is then nonsingular; with ``out_dir`` set the
    problem is written there as a matrix file.
    """
    case = case or classify_case(p)
    if case not in (CaseLabel.CASE_I, CaseLabel.CASE_II):
        return ProbeResult(np.nan, np.nan, case, skipped=True,
                           reason=f"case {case} is outside the probe's scope")
    if sol.Psi is None:
        return ProbeResult(np.nan, np.nan, case, skipped=True, reason="no Psi available")
    rho = linalg.spectral_radius(np.clip(sol.Phi @ sol.Psi, 0.0, None), nonnegative=True)
    margin = 1.0 - rho
    candidate = margin <= tol
    path = None
    if candidate and out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, f"{tag}.mare")
        matrixfile.write(path, p.K, p.n, comments=[f"rho(Phi Psi) = {rho!r}", f"case = {case}"])
    return ProbeResult(rho, margin, case, candidate=candidate, path=path)


# --------------------------------------------------------------------------
# counting positive solutions


@dataclass(frozen=True, eq=False)
class SolutionCount:
    count: int
    solutions: list
    subsets_tried: int
    skipped: bool = False
    reason: str = ""

    @property
    def ok(self):
        return self.skipped or self.count <= 2


MAX_ENUM_SIZE = 10
MAX_SUBSETS = 2 ** 8


def second_solution_count_check(p, tol=1e-8):
    """Enumerate graph-form solutions over n-subsets of the eigenvalues of H.

    Applies when every eigenvalue of H is simple and ``n + m <= 10``.
    Counts the entrywise positive solutions, which should number at most two.
    """
    from .solvers import schur_select

    size = p.n + p.m
    if size > MAX_ENUM_SIZE:
        return SolutionCount(0, [], 0, skipped=True, reason=f"n + m = {size} > {MAX_ENUM_SIZE}")
    Hm = p.h_matrix()
    lams = linalg.sort_descending(linalg.eigenvalues(Hm))
    scale = max(1.0, linalg.max_norm(Hm))
    gaps = np.abs(lams[:, None] - lams[None, :])
    np.fill_diagonal(gaps, np.inf)
    if gaps.min() <= 1e-6 * scale:
        return SolutionCount(0, [], 0, skipped=True, reason="H has a repeated eigenvalue")

    found = []
    tried = 0
    for subset in itertools.combinations(range(size), p.n):
        chosen = lams[list(subset)]
        if not all(np.min(np.abs(chosen - np.conj(z))) <= 1e-8 * scale for z in chosen):
            continue
        tried += 1
        if tried > MAX_SUBSETS:
            break
        try:
            X = schur_select(p, subset)
        except MareError:
            continue
        if p.relative_residual(X) > tol:
            continue
        if np.all(X > tol * max(1.0, linalg.max_norm(X))):
            found.append(X)
    return SolutionCount(len(found), found, tried)


# --------------------------------------------------------------------------
# bundle


@dataclass(frozen=True, eq=False)
class Analysis:
    case: CaseLabel
    eigen: EigenStructure
    null: Optional[NullData]
    properties: Optional[PropertyReport]
    probe: Optional[ProbeResult]


def analyze_structure(p, kind=None):
    """Case label, eigen structure and null data; no solve needed."""
    kind = kind or categorize(p.K)
    es = zero_eigen_structure(p)
    nd = None
    case = CaseLabel.NONSINGULAR_K
    if kind.singular:
        try:
            nd = null_data(p.K, p.n)
            case = gap_label(nd)
        except (DegenerateNullSpace, SignFailure):
            case = CaseLabel.DEGENERATE
    return case, es, nd


def analyze_solution(p, sol, out_dir=None):
    kind = sol.kind or categorize(p.K)
    case, es, nd = analyze_structure(p, kind)
    props = verify_properties(p, sol, cert=kind.certificate, nd=nd, case=case)
    probe = None
    if case in (CaseLabel.CASE_I, CaseLabel.CASE_II):
        probe = conjecture_probe(p, sol, case=case, out_dir=out_dir)
    return Analysis(case=case, eigen=es, null=nd, properties=props, probe=probe)
