"""Algorithms for the minimal nonnegative solution.

Four methods share one entry point, :func:`solve`:

``fixed_point``
    diagonal-splitting iteration started at zero (monotone, linear rate)
``newton``
    Newton's method started at zero; each step is a Sylvester solve
``schur``
    invariant subspace of ``H`` for its n eigenvalues of largest real part
``doubling``
    ADDA/SDA doubling, which delivers both ``Phi`` and ``Psi``
"""

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from .errors import (
    AmbiguousInvariantSubspace,
    IllDefined,
    MaxIterExceeded,
    NearSingularIGH,
    NearSingularOperator,
    NotMMatrix,
    NotRegular,
    SingularBlock,
    SingularMatrix,
    SingularY1,
    SplitsConjugatePair,
)
from .mmatrix import categorize
from .problem import (
    ConvergenceLog,
    RiccatiProblem,
    embed_solution,
    make_solution,
    reduce_zero_diagonal,
    verify_factorization,
)

METHODS = ("fixed_point", "newton", "doubling", "schur")
DEFAULT_MAX_ITER = {"fixed_point": 10000, "newton": 100, "doubling": 100, "schur": 1}
#: largest block size handled by the dense Kronecker fallback in Newton's method
KRON_FALLBACK_MAX = 8
#: doubling may stop early on stagnation once successive differences are this small
STAGNATION_LEVEL = 1e-6


@dataclass(frozen=True)
class SolverOptions:
    method: str = "schur"
    tol: float = 1e-12
    max_iter: Optional[int] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    gamma: Optional[float] = None
    shift_delta: float = 0.0
    #: eigenvalues with |lambda| <= zero_tol * max(1, max|H|) form the zero cluster
    zero_tol: float = 1e-6

    def __post_init__(self):
        if self.method == "modified_schur":
            raise NotImplementedError("the modified Schur method is not implemented")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.shift_delta < 0:
            raise ValueError("shift_delta must be >= 0")

    @property
    def iteration_cap(self):
        return self.max_iter if self.max_iter is not None else DEFAULT_MAX_ITER[self.method]


def _clean(X, scale=1.0):
    """Zero out rounding-level negative entries of a nonnegative solution."""
    X = np.array(X, dtype=float)
    floor = -1e-12 * max(1.0, scale)
    X[(X < 0) & (X >= floor)] = 0.0
    return X


def _rate(history):
    """Crude linear-rate estimate from the last residual ratios."""
    h = [x for x in history if x > 0]
    if len(h) < 3:
        return float("nan")
    return float(h[-1] / h[-2]) if h[-2] > 0 else float("nan")


def _empty_solution(p, method):
    log = ConvergenceLog(method=method, iterations=0, residual_history=[0.0])
    return make_solution(p, np.zeros((p.m, p.n)), log)


# --------------------------------------------------------------------------
# fixed-point iteration


def solve_fixed_point(p, opts=None, callback=None):
    """Diagonal-splitting fixed-point iteration from ``X_0 = 0``.

    Each sweep updates every entry independently::

        X_new[r, s] = (X C X + X D2 + A2 X + B)[r, s] / (a_rr + d_ss)

    with ``A = diag(A) - A2`` and ``D = diag(D) - D2``.  The iterates
    increase monotonically to the minimal solution.  ``callback(k, X_k)`` is
    invoked for every iterate, ``X_0`` included.
    """
    opts = opts or SolverOptions(method="fixed_point")
    if p.m == 0 or p.n == 0:
        return _empty_solution(p, "fixed_point")
    a = np.diag(p.A)
    d = np.diag(p.D)
    denom = a[:, None] + d[None, :]
    if np.any(denom <= 0):
        i, j = np.argwhere(denom <= 0)[0]
        raise IllDefined(f"a[{i},{i}] + d[{j},{j}] = {denom[i, j]} <= 0")
    A2 = np.diag(a) - p.A
    D2 = np.diag(d) - p.D
    C, B = p.C, p.B

    # R(X_k) = denom * (X_{k+1} - X_k), so each sweep also yields the residual of X_k
    nA, nB, nC, nD = (np.linalg.norm(M) for M in (p.A, p.B, p.C, p.D))

    def relres(X, diff):
        nx = np.linalg.norm(X)
        scale = nB + nx * (nC * nx + nD + nA)
        res = np.linalg.norm(denom * diff)
        return float(res / scale) if scale else float(res)

    X = np.zeros((p.m, p.n))
    history = []
    if callback:
        callback(0, X)
    cap = opts.iteration_cap
    for k in range(1, cap + 1):
        Xn = (X @ C @ X + X @ D2 + A2 @ X + B) / denom
        history.append(relres(X, Xn - X))
        if history[-1] <= opts.tol:
            # X_{k-1} already passes; X_k is no worse by monotonicity
            break
        X = Xn
        if callback:
            callback(k, X)
    else:
        history.append(p.relative_residual(X))
        log = ConvergenceLog(
            method="fixed_point", iterations=cap, residual_history=history,
            rate_estimate=_rate(history),
        )
        raise MaxIterExceeded(
            f"fixed-point iteration: relative residual {history[-1]:.3e} after {cap} iterations",
            log,
        )
    k -= 1
    log = ConvergenceLog(
        method="fixed_point", iterations=k, residual_history=history,
        rate_estimate=_rate(history),
    )
    return make_solution(p, X, log)


# --------------------------------------------------------------------------
# Newton's method


def solve_newton(p, opts=None, callback=None):
    """Newton's method from ``X_0 = 0``.

    Step: ``(A - X C) X_new + X_new (D - C X) = B - X C X``.  When the
    Sylvester operator turns singular near the limit (the critical case
    where zero is a double eigenvalue of ``H``), blocks of size at most
    :data:`KRON_FALLBACK_MAX` are finished with a least-squares Kronecker solve
    and the condition estimate is logged.
    """
    opts = opts or SolverOptions(method="newton")
    if p.m == 0 or p.n == 0:
        return _empty_solution(p, "newton")
    A, B, C, D = p.A, p.B, p.C, p.D
    X = np.zeros((p.m, p.n))
    history = [p.relative_residual(X)]
    notes = []
    if callback:
        callback(0, X)
    cap = opts.iteration_cap
    for k in range(1, cap + 1):
        P = A - X @ C
        Q = D - C @ X
        rhs = B - X @ C @ X
        try:
            X_new = linalg.solve_sylvester(P, Q, rhs)
        except NearSingularOperator as exc:
            if k == 1:
                raise NearSingularOperator(
                    f"I kron A + D^T kron I is singular at X_0 = 0: {exc}"
                ) from exc
            if max(p.m, p.n) > KRON_FALLBACK_MAX:
                raise NearSingularOperator(
                    f"critical case suspected (zero is a multiple eigenvalue of H): {exc}"
                ) from exc
            X_new, cond = linalg.sylvester_kron(P, Q, rhs)
            notes.append(f"step {k}: singular Sylvester operator, Kronecker fallback cond={cond:.2e}")
        X = X_new
        if callback:
            callback(k, X)
        history.append(p.relative_residual(X))
        if history[-1] <= opts.tol:
            log = ConvergenceLog(
                method="newton", iterations=k, residual_history=history,
                rate_estimate=_newton_order(history), notes=notes,
            )
            return make_solution(p, _clean(X), log)
    log = ConvergenceLog(
        method="newton", iterations=cap, residual_history=history,
        rate_estimate=_newton_order(history), notes=notes,
    )
    raise MaxIterExceeded(
        f"Newton: relative residual {history[-1]:.3e} after {cap} iterations", log
    )


def _newton_order(history):
    """Observed convergence order log(r_k)/log(r_{k-1}) over the last two residuals."""
    h = [x for x in history if 0 < x < 1]
    if len(h) < 2:
        return float("nan")
    return float(math.log(h[-1]) / math.log(h[-2]))


# --------------------------------------------------------------------------
# Schur method


def _graph_solution(Y, n):
    """``X = Y2 Y1^{-1}`` for an (n+m) x n basis ``Y = [Y1; Y2]``."""
    Y1, Y2 = Y[:n], Y[n:]
    try:
        Xt = linalg.linear_solve(Y1.T, Y2.T, threshold=1e-10)
    except SingularMatrix as exc:
        raise SingularY1(
            "the selected invariant subspace is not the graph of a solution "
            f"(leading block singular: {exc})"
        ) from exc
    return Xt.T, float(np.linalg.cond(Y1))


def _null_basis(Z, k, tol=1e-10):
    """Orthonormal basis of null(Z^j) for the smallest j giving dimension >= k."""
    c = Z.shape[0]
    scale = max(1.0, linalg.max_norm(Z))
    Zj = np.eye(c)
    for j in range(1, c + 1):
        Zj = Zj @ Z
        _, s, Vt = np.linalg.svd(Zj)
        dim = int(np.sum(s <= tol * scale ** j))
        if dim == k:
            return Vt[c - k:].T
        if dim > k:
            raise AmbiguousInvariantSubspace(
                f"zero eigenvalue cluster of size {c}: null(Z^{j}) has dimension {dim}, "
                f"need exactly {k}"
            )
    raise AmbiguousInvariantSubspace(f"could not isolate a {k}-dimensional zero subspace")


def solve_schur(p, opts=None):
    """Minimal solution from the invariant subspace of ``H`` for its n largest eigenvalues.

    When zero is a multiple eigenvalue of ``H`` and the split after position
    n falls inside the zero cluster, the basis is completed from the null
    space of the projected cluster block rather than from a split of that
    (numerically perturbed) block.
    """
    opts = opts or SolverOptions(method="schur")
    if p.m == 0 or p.n == 0:
        return _empty_solution(p, "schur")
    n = p.n
    Hm = p.h_matrix()
    ztol = opts.zero_tol * max(1.0, linalg.max_norm(Hm))
    lams = linalg.sort_descending(linalg.eigenvalues(Hm))
    in_cluster = np.abs(lams) <= ztol
    above = int(np.sum(~in_cluster & (lams.real > 0)))
    c = int(np.sum(in_cluster))
    k = n - above
    notes = []

    if c >= 2 and 0 < k < c:
        def key(eigs):
            z = eigs[0]
            if abs(z) <= ztol:
                group = 1
            else:
                group = 2 if z.real > 0 else 0
            return (group, linalg.descending_real_part(eigs))

        sf = linalg.ordered_real_schur(Hm, key=key)
        W = sf.Q[:, above:above + c]
        Z = W.T @ Hm @ W
        N = _null_basis(Z, k)
        Y = np.hstack([sf.Q[:, :above], W @ N])
        notes.append(f"zero cluster of size {c} split {k}/{c - k} via null space")
    else:
        sf = linalg.ordered_real_schur(Hm)
        if n < sf.T.shape[0] and sf.T[n, n - 1] != 0.0:
            raise SplitsConjugatePair(
                f"eigenvalues {n} and {n + 1} of H form a complex conjugate pair"
            )
        Y = sf.Q[:, :n]

    X, cond = _graph_solution(Y, n)
    log = ConvergenceLog(
        method="schur", iterations=1,
        residual_history=[p.relative_residual(X)],
        parameters={"cond_Y1": cond, "eigenvalues": list(lams)},
        notes=notes,
    )
    return make_solution(p, _clean(X, linalg.max_norm(X)), log)


def schur_select(p, selection):
    """Solution built from the eigenvectors of a chosen set of n eigenvalues.

    ``selection`` indexes the eigenvalues of ``H`` sorted by descending real
    part (ties by descending imaginary part).  The eigenvalues should be
    simple.  The result is generally not the minimal solution and need not
    be nonnegative.
    """
    Hm = p.h_matrix()
    lams = linalg.sort_descending(linalg.eigenvalues(Hm))
    selection = sorted(set(int(i) for i in selection))
    if len(selection) != p.n:
        raise ValueError(f"need exactly n={p.n} eigenvalue indices, got {len(selection)}")
    chosen = lams[selection]
    tol = 1e-6 * max(1.0, linalg.max_norm(Hm))

    def picked(z):
        return bool(np.min(np.abs(chosen - z)) <= tol)

    for z in chosen:
        if not picked(np.conj(z)):
            raise SplitsConjugatePair(f"selection contains {z} without its conjugate")

    def key(eigs):
        return (all(picked(z) for z in eigs), linalg.descending_real_part(eigs))

    sf = linalg.ordered_real_schur(Hm, key=key)
    top = sf.block_eigenvalues()[:p.n]
    if not all(picked(z) for z in top):
        raise SplitsConjugatePair("selected eigenvalues do not fill the leading n positions")
    X, _ = _graph_solution(sf.Q[:, :p.n], p.n)
    return X


# --------------------------------------------------------------------------
# doubling


@dataclass
class DoublingState:
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    k: int = 0


def doubling_init(p, alpha, beta):
    """Initial ADDA blocks from one linear solve.

    ``[[E0, -G0], [-H0, F0]] = [[D + aI, -C], [B, -A - bI]]^{-1} [[D - bI, -C], [B, -A + aI]]``
    with ``a = alpha`` and ``b = beta``.  ``alpha == beta`` gives SDA.
    """
    m, n = p.m, p.n
    In, Im = np.eye(n), np.eye(m)
    left = np.block([[p.D + alpha * In, -p.C], [p.B, -p.A - beta * Im]])
    right = np.block([[p.D - beta * In, -p.C], [p.B, -p.A + alpha * Im]])
    try:
        X = linalg.linear_solve(left, right)
    except SingularMatrix as exc:
        raise SingularBlock(f"doubling initialization matrix is singular: {exc}") from exc
    return DoublingState(E=X[:n, :n], F=X[n:, n:], G=-X[:n, n:], H=-X[n:, :n], k=0)


def doubling_step(state):
    """One doubling step; raises :class:`NearSingularIGH` on a tiny pivot."""
    E, F, G, H = state.E, state.F, state.G, state.H
    n, m = E.shape[0], F.shape[0]
    try:
        # E (I - GH)^{-1} and F (I - HG)^{-1} via transposed solves
        EW = linalg.linear_solve((np.eye(n) - G @ H).T, E.T).T
        FW = linalg.linear_solve((np.eye(m) - H @ G).T, F.T).T
    except SingularMatrix as exc:
        raise NearSingularIGH(f"I - G_k H_k nearly singular at k={state.k}: {exc}") from exc
    return DoublingState(
        E=EW @ E,
        F=FW @ F,
        G=G + EW @ G @ F,
        H=H + FW @ H @ E,
        k=state.k + 1,
    )


def _balance(state):
    """Rescale ``E -> sE``, ``F -> F/s`` so that ``||E|| = ||F||``.

    G and H only ever see E and F through products ``E ... F`` and
    ``F ... E``, so the rescaling leaves every later G_k, H_k unchanged; it
    keeps one of E_k, F_k from overflowing while the other underflows.
    """
    ne = np.linalg.norm(state.E, np.inf)
    nf = np.linalg.norm(state.F, np.inf)
    if not (ne > 0 and nf > 0 and np.isfinite(ne) and np.isfinite(nf)):
        return state
    s = math.sqrt(nf / ne)
    return dataclasses.replace(state, E=state.E * s, F=state.F / s)


def rate_bound(R, S, alpha, beta):
    """``rho((R + aI)^{-1}(R - bI)) * rho((S + bI)^{-1}(S - aI))``."""
    n, m = R.shape[0], S.shape[0]
    r1 = linalg.spectral_radius(linalg.linear_solve(R + alpha * np.eye(n), R - beta * np.eye(n)))
    r2 = linalg.spectral_radius(linalg.linear_solve(S + beta * np.eye(m), S - alpha * np.eye(m)))
    return r1 * r2


def default_parameters(p, opts):
    if opts.gamma is not None:
        g = opts.gamma + opts.shift_delta
        return g, g
    alpha = opts.alpha if opts.alpha is not None else float(np.max(np.diag(p.A)))
    beta = opts.beta if opts.beta is not None else float(np.max(np.diag(p.D)))
    return alpha + opts.shift_delta, beta + opts.shift_delta


def solve_doubling(p, opts=None, callback=None):
    """ADDA (SDA when ``gamma`` is given) for ``Phi = lim H_k`` and ``Psi = lim G_k``.

    Defaults: ``alpha = max a_ii``, ``beta = max d_ii``.  On a singular
    initialization or a nearly singular ``I - G_k H_k`` the run is repeated
    once with both parameters raised by ``1e-2 * max(alpha, beta)``, then, if
    ``alpha != beta``, as SDA with ``gamma = max(alpha, beta)`` plus that shift.
    ``callback(k, state)`` sees every iterate.
    """
    opts = opts or SolverOptions(method="doubling")
    if p.m == 0 or p.n == 0:
        sol = _empty_solution(p, "doubling")
        return dataclasses.replace(sol, Psi=np.zeros((p.n, p.m)), S=p.A.copy())
    alpha, beta = default_parameters(p, opts)
    delta = 1e-2 * max(alpha, beta, 1.0)
    attempts = [(alpha, beta), (alpha + delta, beta + delta)]
    if alpha != beta:
        # with a double zero eigenvalue the Cayley factors of zero have moduli
        # alpha/beta and beta/alpha, so one of E_k, F_k blows up unless alpha == beta
        gamma = max(alpha, beta) + delta
        attempts.append((gamma, gamma))
    notes = []
    for i, (a, b) in enumerate(attempts):
        try:
            return _doubling_run(p, opts, a, b, callback, notes=list(notes))
        except (NearSingularIGH, SingularBlock) as exc:
            if i + 1 == len(attempts):
                raise
            na, nb = attempts[i + 1]
            notes.append(f"retry with alpha={na:.6g}, beta={nb:.6g} after: {exc}")


def _doubling_run(p, opts, alpha, beta, callback, notes):
    state = doubling_init(p, alpha, beta)
    if callback:
        callback(0, state)
    Hs = [state.H]
    Gs = [state.G]
    history = [p.relative_residual(state.H)]
    cap = opts.iteration_cap
    converged = False
    last_diff = np.inf
    for _ in range(cap):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                new = _balance(doubling_step(state))
            finite = all(np.all(np.isfinite(x)) for x in (new.E, new.F, new.G, new.H))
            if not finite:
                raise NearSingularIGH(f"non-finite iterate at k={state.k + 1}")
        except NearSingularIGH as exc:
            if last_diff <= STAGNATION_LEVEL:
                # critical case: I - G_k H_k degenerates as the iterates converge
                notes = notes + [f"stopped at k={state.k}: {exc}"]
                converged = True
                break
            raise
        dH = np.linalg.norm(new.H - state.H, np.inf) / max(1.0, np.linalg.norm(new.H, np.inf))
        dG = np.linalg.norm(new.G - state.G, np.inf) / max(1.0, np.linalg.norm(new.G, np.inf))
        diff = max(dH, dG)
        if diff > last_diff and last_diff <= STAGNATION_LEVEL:
            notes = notes + [f"stopped at k={state.k}: successive differences stagnated"]
            converged = True
            break
        if callback:
            callback(new.k, new)
        state = new
        last_diff = diff
        Hs.append(state.H)
        Gs.append(state.G)
        history.append(p.relative_residual(state.H))
        if diff <= opts.tol:
            converged = True
            break
    params = {"alpha": alpha, "beta": beta}
    if not converged:
        log = ConvergenceLog(method="doubling", iterations=state.k, residual_history=history,
                             parameters=params, notes=notes)
        raise MaxIterExceeded(f"doubling: no convergence in {cap} steps", log)

    Phi = _clean(state.H, linalg.max_norm(state.H))
    Psi = _clean(state.G, linalg.max_norm(state.G))
    R = p.D - p.C @ Phi
    S = p.A - p.B @ Psi
    try:
        params["rate_bound"] = rate_bound(R, S, alpha, beta)
    except SingularMatrix:
        params["rate_bound"] = float("nan")
    params["error_history"] = [float(np.linalg.norm(Hk - Phi, np.inf)) for Hk in Hs]
    params["psi_error_history"] = [float(np.linalg.norm(Gk - Psi, np.inf)) for Gk in Gs]
    if history[-1] > max(1e-8, 1e4 * opts.tol):
        notes = notes + [f"final relative residual {history[-1]:.3e} is large"]
    errs = [e for e in params["error_history"][:-1] if e > 0]
    rate = float("nan")
    if len(errs) >= 2:
        k = len(errs) - 1
        rate = errs[-1] ** (1.0 / 2 ** k)
    log = ConvergenceLog(method="doubling", iterations=state.k, residual_history=history,
                         rate_estimate=rate, parameters=params, notes=notes)
    sol = make_solution(p, Phi, log)
    dual_res = float(np.linalg.norm(p.dual().residual(Psi)))
    return dataclasses.replace(sol, Psi=Psi, S=S, residual_psi=dual_res)


# --------------------------------------------------------------------------
# orchestration

_DISPATCH = {
    "fixed_point": solve_fixed_point,
    "newton": solve_newton,
    "schur": solve_schur,
    "doubling": solve_doubling,
}


def solve_minimal(p, opts):
    """Minimal solution of ``p`` via reduce -> solve -> embed (no dual, no checks)."""
    red = reduce_zero_diagonal(p)
    if red.reduced.m == 0:
        log = ConvergenceLog(method=opts.method, iterations=0, residual_history=[0.0],
                             notes=["A = 0 and B = 0: Phi = 0"])
        return make_solution(p, np.zeros((p.m, p.n)), log), red
    inner = _DISPATCH[opts.method](red.reduced, opts)
    Phi = embed_solution(red, inner.Phi)
    log = inner.log
    if red.r:
        log = dataclasses.replace(log, notes=log.notes + [f"removed {red.r} zero rows of K"])
    return make_solution(p, Phi, log), red


def solve(p, opts=None, analyze=True):
    """Full pipeline: categorize, reduce, solve, embed, dual solve, verify.

    Raises :class:`NotMMatrix` or :class:`NotRegular` before any iteration
    when K does not qualify.
    """
    opts = opts or SolverOptions()
    kind = categorize(p.K)
    if not kind.is_m:
        raise NotMMatrix("K = [D -C; -B A] is not an M-matrix")
    if not kind.regular:
        raise NotRegular(
            "K is an M-matrix but not a regular one: no v > 0 satisfies Kv >= 0"
        )
    primal, _ = solve_minimal(p, opts)
    dual_sol, _ = solve_minimal(p.dual(), opts)
    Phi, Psi = primal.Phi, dual_sol.Phi
    sol = dataclasses.replace(
        primal,
        Psi=Psi,
        S=p.A - p.B @ Psi,
        residual_psi=dual_sol.residual_phi,
        psi_log=dual_sol.log,
        kind=kind,
        factorization=verify_factorization(p, Phi, Psi),
    )
    if analyze:
        from .analysis import analyze_solution

        sol = dataclasses.replace(sol, analysis=analyze_solution(p, sol))
    return sol
