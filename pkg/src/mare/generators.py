"""Fixed test problems and seeded random M-matrices.

Random streams come from numpy's PCG64 bit generator
(``numpy.random.default_rng(seed)``), so a seed pins the matrix bit for bit
on a given numpy version.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import GenerationFailure
from .mmatrix import categorize
from .problem import RiccatiProblem

FIXTURE_IDS = ("EX1", "EX2", "EX3", "KM", "SC1", "DISC1", "DISC2")
CATEGORIES = (
    "nonsingular",
    "irreducible_singular",
    "reducible_singular_regular",
    "reducible_singular_critical",
)
MAX_REDRAWS = 100


@dataclass(frozen=True, eq=False)
class Fixture:
    id: str
    K: np.ndarray
    n: int
    expected: dict = field(default_factory=dict)
    #: the nearby matrix K_eps for the discontinuity fixtures
    K_eps: Optional[np.ndarray] = None

    @property
    def problem(self):
        return RiccatiProblem.from_k(self.K, self.n)

    @property
    def perturbed(self):
        return None if self.K_eps is None else RiccatiProblem.from_k(self.K_eps, self.n)


def fixture(fid, eps=1e-3):
    fid = fid.upper()
    if fid == "EX1":
        K = [[2, -1, -1, 0], [0, 2, -1, -1], [0, -1, 2, -1], [0, -1, -1, 2]]
        exp = dict(phi=[[0, 0.5], [0, 0.5]], eigenvalues=[2, 1, 0, -3], case="II",
                   m1=1, n1=2, r=1, eigvec_count=1)
        return Fixture("EX1", np.array(K, float), 2, exp)
    if fid == "EX2":
        K = [[2, -1, 0, -1], [-1, 2, 0, -1], [0, 0, 2, -2], [-1, -1, 0, 2]]
        exp = dict(phi=[[0.5, 0.5], [0.5, 0.5]], eigenvalues=[3, 0, -1, -2], case="I",
                   other_solution=[[2, 2], [1, 1]], other_selection=[0, 2],
                   positive_solutions=2)
        return Fixture("EX2", np.array(K, float), 2, exp)
    if fid == "EX3":
        K = [[1, 0, 0, -1], [0, 1, 0, -1], [0, 0, 1, -1], [0, -1, 0, 1]]
        exp = dict(phi=[[0, 1], [0, 1]], eigenvalues=[1, 0, 0, -1], case="III",
                   r=2, eigvec_count=1)
        return Fixture("EX3", np.array(K, float), 2, exp)
    if fid == "KM":
        return Fixture("KM", np.array([[0.0, 0.0], [-1.0, 0.0]]), 1, dict(outcome="NotRegular"))
    if fid == "SC1":
        return Fixture("SC1", np.array([[3.0, -1.0], [-1.0, 2.0]]), 1,
                       dict(phi=[[(5 - np.sqrt(21)) / 2]]))
    if fid == "DISC1":
        K_eps = eps * np.array([[1.0, -1.0], [-1.0, 1.0]])
        return Fixture("DISC1", np.zeros((2, 2)), 1,
                       dict(phi=[[0.0]], phi_eps=[[1.0]]), K_eps)
    if fid == "DISC2":
        K = np.array([[1, 0, -1, 0], [0, 0, 0, 0], [-1, 0, 1, 0], [0, 0, 0, 0]], float)
        K_eps = K.copy()
        K_eps[1, 1] = K_eps[3, 3] = eps
        K_eps[1, 3] = K_eps[3, 1] = -eps
        return Fixture("DISC2", K, 2,
                       dict(phi=[[1.0, 0.0], [0.0, 0.0]], phi_eps=[[1.0, 0.0], [0.0, 1.0]]),
                       K_eps)
    raise KeyError(f"unknown fixture {fid!r}; known: {FIXTURE_IDS}")


@dataclass(frozen=True)
class GenSpec:
    n: int
    m: int
    seed: int
    category: str = "nonsingular"
    zero_row_sums: bool = True
    #: (transient, closed) class sizes for the reducible categories
    block_structure: Optional[tuple] = None
    #: probability that an optional off-diagonal entry is nonzero
    density: float = 0.6
    #: reject singular draws whose zero eigenvalue of H is not simple
    require_simple_zero: bool = True

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be >= 1")
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}; choose from {CATEGORIES}")
        if self.block_structure is not None:
            t, c = self.block_structure
            if t < 1 or c < 1 or t + c != self.n + self.m:
                raise ValueError("block_structure must be (transient, closed) summing to n + m")


def _generator_from_offdiag(off):
    np.fill_diagonal(off, 0.0)
    return np.diag(off.sum(axis=1)) - off


def _draw(spec, rng):
    N = spec.n + spec.m
    if spec.category == "nonsingular":
        off = rng.uniform(0.0, 1.0, (N, N)) * (rng.uniform(size=(N, N)) < spec.density)
        K = _generator_from_offdiag(off)
        K += np.diag(rng.uniform(0.1, 1.0, N))
        return K
    if spec.category == "irreducible_singular":
        off = rng.uniform(0.1, 1.0, (N, N))
        K = _generator_from_offdiag(off)
    else:
        if spec.block_structure is not None:
            t, c = spec.block_structure
        else:
            c = int(rng.integers(1, N))
            t = N - c
        perm = rng.permutation(N)
        closed, transient = perm[:c], perm[c:]
        off = np.zeros((N, N))
        off[np.ix_(closed, closed)] = rng.uniform(0.1, 1.0, (c, c))
        dense = rng.uniform(0.0, 1.0, (t, N)) * (rng.uniform(size=(t, N)) < spec.density)
        off[transient, :] = dense
        # every transient state feeds the closed class directly, so it is the only closed class
        target = closed[rng.integers(0, c, t)]
        off[transient, target] += rng.uniform(0.1, 1.0, t)
        K = _generator_from_offdiag(off)
    if not spec.zero_row_sums:
        # K diag(1/w) keeps the Z-sign pattern and has the null vector w > 0
        w = rng.uniform(0.5, 2.0, N)
        K = K / w[None, :]
    if spec.category == "reducible_singular_critical":
        K = _make_critical(K, spec.n)
    return K


def _make_critical(K, n):
    """Scale the bottom block rows so that u1.v1 = u2.v2 (zero gap)."""
    from .analysis import null_data

    nd = null_data(K, n)
    top = float(nd.u1 @ nd.v1)
    bottom = float(nd.u2 @ nd.v2)
    if top <= 0 or bottom <= 0:
        return None
    K = K.copy()
    K[n:, :] *= bottom / top
    return K


def _accepts(spec, K):
    from .analysis import CaseLabel, classify_case

    kind = categorize(K)
    if not (kind.is_m and kind.regular):
        return False
    if spec.category == "nonsingular":
        return not kind.singular
    if not kind.singular or kind.null_rank != 1:
        return False
    if spec.category == "irreducible_singular":
        if not kind.irreducible:
            return False
    elif kind.irreducible:
        return False
    p = RiccatiProblem.from_k(K, spec.n)
    case = classify_case(p, kind)
    if spec.category == "reducible_singular_critical":
        return case is CaseLabel.CASE_III
    if spec.require_simple_zero:
        return case in (CaseLabel.CASE_I, CaseLabel.CASE_II)
    return True


def random_generator_k(spec):
    """Draw a K of the requested category; redraws until it categorizes correctly."""
    rng = np.random.default_rng(spec.seed)
    for _ in range(MAX_REDRAWS):
        K = _draw(spec, rng)
        if K is not None and _accepts(spec, K):
            return K
    raise GenerationFailure(
        f"no {spec.category} matrix with n={spec.n}, m={spec.m} after {MAX_REDRAWS} draws "
        f"(seed {spec.seed})"
    )


def random_problem(spec):
    return RiccatiProblem.from_k(random_generator_k(spec), spec.n)


def perturb_alpha(p, alpha):
    """The problem for ``[[D, -C], [-alpha B, alpha A]]``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return RiccatiProblem(A=alpha * p.A, B=alpha * p.B, C=p.C, D=p.D)
