import numpy as np
import pytest

from mare import solvers
from mare.errors import (
    IllDefined,
    MaxIterExceeded,
    NearSingularOperator,
    NotMMatrix,
    NotRegular,
    SplitsConjugatePair,
)
from mare.generators import GenSpec, fixture, random_problem
from mare.problem import RiccatiProblem
from mare.solvers import SolverOptions


def _phi(fid):
    return np.array(fixture(fid).expected["phi"], dtype=float)


def test_options_validation():
    with pytest.raises(NotImplementedError):
        SolverOptions(method="modified_schur")
    with pytest.raises(ValueError):
        SolverOptions(method="bisection")
    with pytest.raises(ValueError):
        SolverOptions(tol=0.0)
    with pytest.raises(ValueError):
        SolverOptions(max_iter=0)
    assert SolverOptions(method="newton").iteration_cap == 100
    assert SolverOptions(method="fixed_point").iteration_cap == 10000
    assert SolverOptions().method == "schur"


@pytest.mark.parametrize("method", solvers.METHODS)
@pytest.mark.parametrize("fid", ["EX1", "EX2", "SC1"])
def test_methods_on_fixtures(method, fid):
    sol = solvers.solve(fixture(fid).problem, SolverOptions(method=method), analyze=False)
    assert np.max(np.abs(sol.Phi - _phi(fid))) <= 1e-10


@pytest.mark.parametrize("method", solvers.METHODS)
def test_scalar_quadratic_oracle(method):
    # x^2 - (a + d) x + b = 0 with c = 1; minimal root from the quadratic formula
    a, b, d = 2.5, 1.5, 3.0
    p = RiccatiProblem(A=[[a]], B=[[b]], C=[[1.0]], D=[[d]])
    s = a + d
    root = 2 * b / (s + np.sqrt(s * s - 4 * b))
    sol = solvers.solve(p, SolverOptions(method=method), analyze=False)
    assert abs(sol.Phi[0, 0] - root) <= 1e-12


def test_fixed_point_monotone_from_zero():
    p = fixture("EX2").problem
    iterates = []
    solvers.solve_fixed_point(p, callback=lambda k, X: iterates.append(X.copy()))
    assert np.all(iterates[0] == 0.0)
    for X0, X1 in zip(iterates, iterates[1:]):
        assert np.all(X1 >= X0 - 1e-15)


def test_fixed_point_ill_defined():
    p = RiccatiProblem.from_k(np.zeros((2, 2)), 1)
    with pytest.raises(IllDefined):
        solvers.solve_fixed_point(p)


def test_fixed_point_cap_carries_log():
    p = fixture("EX1").problem
    with pytest.raises(MaxIterExceeded) as info:
        solvers.solve_fixed_point(p, SolverOptions(method="fixed_point", max_iter=3))
    assert info.value.log is not None
    assert len(info.value.log.residual_history) >= 3


def test_newton_quadratic_convergence():
    p = random_problem(GenSpec(3, 3, seed=4, category="nonsingular"))
    sol = solvers.solve_newton(p)
    h = [r for r in sol.log.residual_history if 1e-14 < r < 1e-2]
    assert len(h) >= 2
    for r0, r1 in zip(h, h[1:]):
        assert np.log10(r1) <= 1.5 * np.log10(r0)


def test_newton_singular_at_start():
    p = RiccatiProblem.from_k(np.zeros((2, 2)), 1)
    with pytest.raises(NearSingularOperator):
        solvers.solve_newton(p)


def test_newton_critical_case_fallback():
    p = fixture("EX3").problem
    sol = solvers.solve_newton(p)
    # the double zero eigenvalue limits Newton to about sqrt(eps) accuracy
    assert np.max(np.abs(sol.Phi - _phi("EX3"))) <= 1e-5


def test_schur_critical_case_exact():
    sol = solvers.solve_schur(fixture("EX3").problem)
    assert np.max(np.abs(sol.Phi - _phi("EX3"))) <= 1e-10
    assert any("zero cluster" in note for note in sol.log.notes)


def test_schur_conjugate_pair_split():
    p = RiccatiProblem.from_k(np.array([[0.0, -1.0], [-1.0, 0.0]]), 1)
    with pytest.raises(SplitsConjugatePair):
        solvers.solve_schur(p)


def test_schur_select_second_solution():
    X = solvers.schur_select(fixture("EX2").problem, [0, 2])
    assert np.allclose(X, [[2.0, 2.0], [1.0, 1.0]], atol=1e-10)
    # the default selection reproduces the minimal solution
    X0 = solvers.schur_select(fixture("EX2").problem, [0, 1])
    assert np.allclose(X0, 0.5, atol=1e-10)


def test_doubling_init_matches_sda_formulas():
    rng = np.random.default_rng(7)
    for seed in range(5):
        p = random_problem(GenSpec(2, 3, seed=seed, category="nonsingular"))
        A, B, C, D = p.A, p.B, p.C, p.D
        g = max(np.max(np.diag(A)), np.max(np.diag(D))) * (1 + rng.uniform())
        In, Im = np.eye(p.n), np.eye(p.m)
        W = A + g * Im - B @ np.linalg.solve(D + g * In, C)
        V = D + g * In - C @ np.linalg.solve(A + g * Im, B)
        E0 = In - 2 * g * np.linalg.inv(V)
        F0 = Im - 2 * g * np.linalg.inv(W)
        G0 = 2 * g * np.linalg.solve(D + g * In, C) @ np.linalg.inv(W)
        H0 = 2 * g * np.linalg.inv(W) @ B @ np.linalg.inv(D + g * In)
        st = solvers.doubling_init(p, g, g)
        for got, want in ((st.E, E0), (st.F, F0), (st.G, G0), (st.H, H0)):
            assert np.allclose(got, want, atol=1e-12)


def test_doubling_sandwich_and_psi():
    p = fixture("EX2").problem
    seen = []
    sol = solvers.solve_doubling(p, callback=lambda k, s: seen.append(s))
    for s0, s1 in zip(seen, seen[1:]):
        assert np.all(s1.H >= s0.H - 1e-14) and np.all(s1.H <= sol.Phi + 1e-10)
        assert np.all(s1.G >= s0.G - 1e-14) and np.all(s1.G <= sol.Psi + 1e-10)
    full = solvers.solve(p)
    assert np.allclose(sol.Psi, full.Psi, atol=1e-10)
    assert sol.log.parameters["alpha"] == 2.0 and sol.log.parameters["beta"] == 2.0


def test_doubling_rate_bound_below_one_when_nonsingular():
    p = random_problem(GenSpec(3, 2, seed=3, category="nonsingular"))
    sol = solvers.solve_doubling(p)
    assert 0 <= sol.log.parameters["rate_bound"] < 1


def test_sda_mode():
    p = fixture("EX1").problem
    sol = solvers.solve_doubling(p, SolverOptions(method="doubling", gamma=3.0))
    assert sol.log.parameters["alpha"] == sol.log.parameters["beta"] == 3.0
    assert np.allclose(sol.Phi, _phi("EX1"), atol=1e-10)


def test_doubling_critical_case():
    sol = solvers.solve_doubling(fixture("EX3").problem)
    assert np.max(np.abs(sol.Phi - _phi("EX3"))) <= 1e-6
    for seed in range(5):
        p = random_problem(GenSpec(3, 2, seed, "reducible_singular_critical"))
        ref = solvers.solve_schur(p).Phi
        got = solvers.solve_doubling(p).Phi
        assert np.max(np.abs(got - ref)) <= 1e-6


def test_solve_rejects_before_iterating():
    with pytest.raises(NotRegular):
        solvers.solve(fixture("KM").problem)
    K = np.array([[1.0, -2.0], [-2.0, 1.0]])
    with pytest.raises(NotMMatrix):
        solvers.solve(RiccatiProblem.from_k(K, 1))


def test_solve_full_pipeline_fields():
    p = fixture("EX1").problem
    sol = solvers.solve(p)
    assert sol.Psi.shape == (2, 2)
    assert np.allclose(sol.R, p.D - p.C @ sol.Phi)
    assert np.allclose(sol.S, p.A - p.B @ sol.Psi)
    assert sol.factorization.ok
    assert sol.analysis.properties.ok, sol.analysis.properties.failed()


@pytest.mark.parametrize("category", ["nonsingular", "irreducible_singular",
                                      "reducible_singular_regular"])
def test_methods_agree_on_random_problems(category):
    for seed in range(6):
        p = random_problem(GenSpec(3, 3, seed, category))
        ref = solvers.solve(p, analyze=False).Phi
        for method in ("newton", "doubling"):
            got = solvers.solve(p, SolverOptions(method=method), analyze=False).Phi
            assert np.max(np.abs(got - ref)) <= 1e-8, (method, seed)
