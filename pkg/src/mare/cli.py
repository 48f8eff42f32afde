"""Command-line front end: ``mare solve|analyze|compare|hunt|gen``.

Exit codes
----------
0  success
1  usage or parse error (parse errors carry the offending line number)
2  K is not a regular M-matrix
3  solver non-convergence or generation failure

``--machine`` switches the report to flat ``key=value`` lines; matrices are
flattened row-major under keys like ``phi.0.1`` and floats use ``repr``
(shortest round-trip rendering).  ``MARE_DEFAULT_TOL`` overrides the default
tolerance.
"""

import argparse
import itertools
import os
import sys

import numpy as np

from . import analysis, generators, linalg, matrixfile, solvers
from .errors import (
    BadDimensions,
    GenerationFailure,
    MareError,
    NotMMatrix,
    NotRegular,
    NotZ,
    ParseError,
)
from .mmatrix import categorize
from .problem import RiccatiProblem

EXIT_OK, EXIT_USAGE, EXIT_NOT_REGULAR, EXIT_FAILURE = 0, 1, 2, 3
COMPARE_TOL = 1e-6


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --------------------------------------------------------------------------
# report rendering


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


class Report:
    """Ordered key/value pairs plus matrices; renders human or machine text."""

    def __init__(self):
        self.items = []

    def add(self, key, value):
        self.items.append((key, value))

    def matrix(self, key, M):
        self.items.append((key, np.asarray(M, dtype=float)))

    def eigenvalues(self, key, lams):
        self.items.append((key, np.asarray(lams, dtype=complex)))

    def machine(self):
        out = []
        for key, val in self.items:
            if isinstance(val, np.ndarray) and val.dtype == complex:
                for i, z in enumerate(val):
                    out.append(f"{key}.{i}.re={_fmt(z.real)}")
                    out.append(f"{key}.{i}.im={_fmt(z.imag)}")
            elif isinstance(val, np.ndarray):
                out.append(f"{key}.rows={val.shape[0]}")
                out.append(f"{key}.cols={val.shape[1]}")
                for i, j in itertools.product(range(val.shape[0]), range(val.shape[1])):
                    out.append(f"{key}.{i}.{j}={_fmt(val[i, j])}")
            else:
                out.append(f"{key}={_fmt(val)}")
        return "\n".join(out) + "\n"

    def human(self):
        out = []
        for key, val in self.items:
            if isinstance(val, np.ndarray) and val.dtype == complex:
                text = ", ".join(f"{z.real:.10g}{z.imag:+.10g}i" if z.imag else f"{z.real:.10g}"
                                 for z in val)
                out.append(f"{key}: [{text}]")
            elif isinstance(val, np.ndarray):
                out.append(f"{key} =")
                for row in val:
                    out.append("    " + "  ".join(f"{x:>18.12g}" for x in row))
            elif isinstance(val, float):
                out.append(f"{key}: {val:.12g}")
            else:
                out.append(f"{key}: {_fmt(val)}")
        return "\n".join(out) + "\n"

    def render(self, machine):
        return self.machine() if machine else self.human()


def _kind_section(rep, kind):
    rep.add("kind.z", kind.is_z)
    rep.add("kind.m", kind.is_m)
    rep.add("kind.singular", kind.singular)
    rep.add("kind.irreducible", kind.irreducible)
    rep.add("kind.regular", kind.regular)
    rep.add("kind.null_rank", kind.null_rank)


def _structure_section(rep, case, es, nd):
    rep.add("case", str(case))
    rep.add("m1", es.m1)
    rep.add("n1", es.n1)
    rep.add("r", es.r)
    rep.add("eigvec_count", es.eigvec_count)
    rep.eigenvalues("eig", es.lambdas)
    if nd is not None:
        rep.add("gap", nd.gap)
        rep.matrix("u", nd.u[None, :])
        rep.matrix("v", nd.v[None, :])


def _log_section(rep, prefix, log):
    rep.add(f"{prefix}.method", log.method)
    rep.add(f"{prefix}.iterations", log.iterations)
    rep.add(f"{prefix}.final_residual", float(log.residual_history[-1]))
    rate = log.rate_estimate
    rep.add(f"{prefix}.rate_estimate", float("nan") if rate is None else float(rate))
    rep.add(f"{prefix}.note_count", len(log.notes))
    for i, note in enumerate(log.notes):
        rep.add(f"{prefix}.note.{i}", note)


def _solution_section(rep, p, sol):
    rep.matrix("phi", sol.Phi)
    rep.matrix("psi", sol.Psi)
    rep.matrix("R", sol.R)
    rep.matrix("S", sol.S)
    rep.add("residual_phi", float(np.linalg.norm(sol.residual_phi)))
    rep.add("relative_residual_phi", p.relative_residual(sol.Phi))
    rep.add("residual_psi", float(np.linalg.norm(sol.residual_psi)))
    rho = linalg.spectral_radius(np.clip(sol.Phi @ sol.Psi, 0.0, None))
    rep.add("rho_phi_psi", rho)
    rep.add("margin", 1.0 - rho)
    rep.add("factorization.ok", sol.factorization.ok)
    rep.add("factorization.defect", float(sol.factorization.defect))
    _log_section(rep, "log", sol.log)


def _properties_section(rep, props):
    rep.add("properties.ok", props.ok)
    rep.add("properties.count", len(props.checks))
    for i, c in enumerate(props.checks):
        rep.add(f"check.{i}.name", c.name)
        rep.add(f"check.{i}.ok", c.ok)
        rep.add(f"check.{i}.margin", float(c.margin))


# --------------------------------------------------------------------------
# commands


def _default_tol():
    env = os.environ.get("MARE_DEFAULT_TOL")
    if env is None:
        return solvers.SolverOptions().tol
    try:
        tol = float(env)
    except ValueError:
        raise UsageError(f"MARE_DEFAULT_TOL is not a number: {env!r}") from None
    if not tol > 0:
        raise UsageError(f"MARE_DEFAULT_TOL must be positive, got {env!r}")
    return tol


def _load(path):
    try:
        K, n, _ = matrixfile.read(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    return RiccatiProblem.from_k(K, n)


def _options(args, method=None):
    try:
        return solvers.SolverOptions(
            method=method or args.method,
            tol=args.tol if args.tol is not None else _default_tol(),
            max_iter=args.max_iter,
            alpha=args.alpha,
            beta=args.beta,
            gamma=args.gamma,
        )
    except (ValueError, NotImplementedError) as exc:
        raise UsageError(str(exc)) from None


def cmd_solve(args, out):
    p = _load(args.input)
    sol = solvers.solve(p, _options(args))
    rep = Report()
    rep.add("status", "ok")
    rep.add("n", p.n)
    rep.add("m", p.m)
    _kind_section(rep, sol.kind)
    an = sol.analysis
    _structure_section(rep, an.case, an.eigen, an.null)
    _solution_section(rep, p, sol)
    _properties_section(rep, an.properties)
    out.write(rep.render(args.machine))
    return EXIT_OK


def cmd_analyze(args, out):
    p = _load(args.input)
    kind = categorize(p.K)
    rep = Report()
    rep.add("status", "ok")
    rep.add("n", p.n)
    rep.add("m", p.m)
    _kind_section(rep, kind)
    if not kind.is_m:
        raise NotMMatrix("K = [D -C; -B A] is not an M-matrix")
    if not kind.regular:
        raise NotRegular("K is an M-matrix but not a regular one: no v > 0 satisfies Kv >= 0")
    case, es, nd = analysis.analyze_structure(p, kind)
    _structure_section(rep, case, es, nd)
    if not args.structure_only:
        sol = solvers.solve(p, _options(args))
        _solution_section(rep, p, sol)
        _properties_section(rep, sol.analysis.properties)
    out.write(rep.render(args.machine))
    return EXIT_OK


def cmd_compare(args, out):
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if len(set(methods)) < 2:
        raise UsageError("compare needs at least two distinct methods")
    for m in methods:
        if m not in solvers.METHODS:
            raise UsageError(f"unknown method {m!r}; choose from {solvers.METHODS}")
    p = _load(args.input)
    kind = categorize(p.K)
    if not kind.is_m:
        raise NotMMatrix("K = [D -C; -B A] is not an M-matrix")
    if not kind.regular:
        raise NotRegular("K is an M-matrix but not a regular one: no v > 0 satisfies Kv >= 0")
    rep = Report()
    results = {}
    for m in methods:
        try:
            sol, _ = solvers.solve_minimal(p, _options(args, method=m))
        except MareError as exc:
            rep.add(f"{m}.status", "failed")
            rep.add(f"{m}.error", f"{type(exc).__name__}: {exc}")
            continue
        results[m] = sol
        rep.add(f"{m}.status", "ok")
        rep.add(f"{m}.iterations", sol.log.iterations)
        rep.add(f"{m}.final_residual", p.relative_residual(sol.Phi))
    if not results:
        out.write(rep.render(args.machine))
        raise _AllFailed("every method failed")
    rep.add("succeeded", len(results))
    rep.add("failed", len(methods) - len(results))
    if len(results) < 2:
        # a single survivor leaves nothing to compare; the failures are on record
        out.write(rep.render(args.machine))
        return EXIT_OK
    worst = 0.0
    for a, b in itertools.combinations(sorted(results), 2):
        d = float(np.max(np.abs(results[a].Phi - results[b].Phi), initial=0.0))
        rep.add(f"diff.{a}.{b}", d)
        worst = max(worst, d)
    rep.add("max_diff", worst)
    agree = worst <= COMPARE_TOL
    rep.add("agree", agree)
    out.write(rep.render(args.machine))
    return EXIT_OK if agree else EXIT_FAILURE


class _AllFailed(MareError):
    pass


def hunt(trials, seed, size, out_dir=None, category="reducible_singular_regular",
         tol=1e-10):
    """Run the conjecture hunt; returns ``(records, skipped)``.

    Each record is ``(trial, n, m, margin, path)``; ``skipped`` lists
    ``(trial, reason)``.
    """
    rng = np.random.default_rng(seed)
    records, skipped = [], []
    for t in range(trials):
        n, m = (int(x) for x in rng.integers(1, size + 1, 2))
        trial_seed = int(rng.integers(0, 2 ** 63 - 1))
        try:
            p = generators.random_problem(generators.GenSpec(n, m, trial_seed, category))
        except GenerationFailure as exc:
            skipped.append((t, f"generation failed: {exc}"))
            continue
        case = analysis.classify_case(p)
        if case not in (analysis.CaseLabel.CASE_I, analysis.CaseLabel.CASE_II):
            skipped.append((t, f"case {case}: the probe needs a nonzero gap"))
            continue
        try:
            sol = solvers.solve(p, analyze=False)
        except MareError as exc:
            skipped.append((t, f"solve failed: {type(exc).__name__}: {exc}"))
            continue
        probe = analysis.conjecture_probe(p, sol, case=case, out_dir=out_dir, tol=tol,
                                          tag=f"candidate_seed{seed}_trial{t}")
        records.append((t, n, m, probe.margin, probe.path))
    return records, skipped


HIST_EDGES = (0.0, 1e-8, 1e-4, 1e-2, 0.1, 0.25, 0.5, 0.75, 1.0)


def cmd_hunt(args, out):
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if args.size < 1:
        raise UsageError("--size must be >= 1")
    records, skipped = hunt(args.trials, args.seed, args.size, args.out, args.category)
    rep = Report()
    for t, n, m, margin, _ in records:
        rep.add(f"trial.{t}.margin", float(margin))
    for t, reason in skipped:
        rep.add(f"trial.{t}.skipped", reason)
    rep.add("trials", args.trials)
    rep.add("solved", len(records))
    rep.add("skipped", len(skipped))
    margins = np.array([r[3] for r in records], dtype=float)
    candidates = [r for r in records if r[3] <= 1e-10]
    rep.add("candidates", len(candidates))
    for i, r in enumerate(candidates):
        rep.add(f"candidate.{i}.path", r[4] or "")
    if margins.size:
        rep.add("min_margin", float(margins.min()))
        counts, _ = np.histogram(np.clip(margins, HIST_EDGES[0], HIST_EDGES[-1]), bins=HIST_EDGES)
        rep.add("below_zero", int(np.sum(margins < 0)))
        for lo, hi, c in zip(HIST_EDGES[:-1], HIST_EDGES[1:], counts):
            rep.add(f"hist.[{lo:g},{hi:g})", int(c))
    out.write(rep.render(args.machine))
    return EXIT_OK


def cmd_gen(args, out):
    try:
        spec = generators.GenSpec(
            n=args.n, m=args.m, seed=args.seed, category=args.category,
            zero_row_sums=not args.scaled,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    K = generators.random_generator_k(spec)
    comments = [f"category = {spec.category}", f"seed = {spec.seed}"]
    if args.out:
        matrixfile.write(args.out, K, spec.n, comments)
    else:
        out.write(matrixfile.format_matrix_file(K, spec.n, comments))
    kind = categorize(K)
    rep = Report()
    rep.add("category", spec.category)
    _kind_section(rep, kind)
    text = rep.render(args.machine)
    # keep stdout a valid matrix file when no --out is given
    (out if args.out else sys.stderr).write(text)
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def _solver_flags(sp, method=True):
    if method:
        sp.add_argument("--method", default="schur",
                        help=f"one of {', '.join(solvers.METHODS)} (default schur)")
    sp.add_argument("--tol", type=float, default=None,
                    help="tolerance (default 1e-12, or $MARE_DEFAULT_TOL)")
    sp.add_argument("--max-iter", type=int, default=None)
    sp.add_argument("--alpha", type=float, default=None)
    sp.add_argument("--beta", type=float, default=None)
    sp.add_argument("--gamma", type=float, default=None)


def build_parser():
    parser = _Parser(prog="mare", description="Minimal nonnegative solutions of M-matrix "
                     "algebraic Riccati equations XCX - XD - AX + B = 0.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    sp = sub.add_parser("solve", help="solve for Phi and Psi")
    sp.add_argument("input")
    _solver_flags(sp)
    sp.add_argument("--machine", action="store_true")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("analyze", help="categorization, eigen structure, case, properties")
    sp.add_argument("input")
    _solver_flags(sp)
    sp.add_argument("--structure-only", action="store_true", help="skip the solve")
    sp.add_argument("--machine", action="store_true")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("compare", help="run several methods and compare Phi")
    sp.add_argument("input")
    sp.add_argument("--methods", default=",".join(solvers.METHODS),
                    help="comma-separated list (default: all four)")
    _solver_flags(sp, method=False)
    sp.add_argument("--machine", action="store_true")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("hunt", help="search for rho(Phi Psi) >= 1 with a nonzero gap")
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--size", type=int, default=4, help="n and m drawn from 1..size")
    sp.add_argument("--out", default=None, help="directory for candidate matrix files")
    sp.add_argument("--category", default="reducible_singular_regular",
                    choices=generators.CATEGORIES)
    sp.add_argument("--machine", action="store_true")
    sp.set_defaults(func=cmd_hunt)

    sp = sub.add_parser("gen", help="write a random matrix file")
    sp.add_argument("--category", default="nonsingular", choices=generators.CATEGORIES)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--m", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--scaled", action="store_true",
                    help="rescale columns so that Ke != 0 (singular draws keep a positive null vector)")
    sp.add_argument("--out", default=None)
    sp.add_argument("--machine", action="store_true")
    sp.set_defaults(func=cmd_gen)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    err = sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, out)
    except UsageError as exc:
        err.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except (ParseError, BadDimensions) as exc:
        err.write(f"parse error: {exc}\n")
        return EXIT_USAGE
    except (NotRegular, NotMMatrix, NotZ) as exc:
        err.write(f"not a regular M-matrix (need v > 0 with Kv >= 0): {exc}\n")
        return EXIT_NOT_REGULAR
    except MareError as exc:
        err.write(f"failed: {type(exc).__name__}: {exc}\n")
        return EXIT_FAILURE


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
