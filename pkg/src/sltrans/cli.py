"""``sltrans`` command-line interface.

Every command reads a problem file and writes CSV (or a plain table for
``validate`` and ``verify``) with a ``#``-prefixed header echoing the
configuration.  Floats are printed with 17 significant digits.

Exit codes: 0 ok, 2 invalid input, 3 solver failure, 4 near-eigenvalue,
5 verification failure.
"""

from __future__ import annotations

import argparse
import io
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .expansion import expand, boundary_scalar_series
from .expr import DomainError, ExprSyntaxError, parse, to_string
from .hilbert import HilbertElement, QuadratureNonConvergence, h_norm
from .integrate import StepFailure
from .oracle import EigSolveFailure, compare_spectra, oracle_eigenvalues, quadratic_profile
from .problem import ProblemError, ValidatedProblem, symmetry_condition_check
from .problemfile import ProblemFileError, load_problem
from .resolvent import NearEigenvalue, apply_resolvent, resolvent_residual
from .spectrum import BracketInvalid, ZeroNorm, compute_eigenpairs
from .verify import VerifyConfig, run_suites

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3
EXIT_NEAR_EIGENVALUE = 4
EXIT_VERIFY = 5

BREAKPOINT_TAG_DISTANCE = 1e-9

log = logging.getLogger("sltrans")


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def fmt(v: float) -> str:
    return "%.17g" % v


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _count(minimum: int):
    def conv(text: str) -> int:
        v = int(text)
        if v < minimum:
            raise argparse.ArgumentTypeError(f"must be >= {minimum}, got {text}")
        return v

    return conv


def _header(out, args: argparse.Namespace, problem: ValidatedProblem) -> None:
    out.write(f"# sltrans {args.command}\n")
    for key in sorted(vars(args)):
        if key in ("command", "handler", "out", "verbose"):
            continue
        out.write(f"# {key} = {getattr(args, key)}\n")
    s = problem.spec
    out.write(f"# h1 = {fmt(s.h1)}; h2 = {fmt(s.h2)}\n")
    for name in ("r", "p", "q"):
        out.write(f"# {name} = " + " | ".join(to_string(e) for e in getattr(s, name)) + "\n")
    out.write("# alpha = " + ", ".join(map(fmt, s.alpha)) + "; beta = " + ", ".join(map(fmt, s.beta)) + "\n")
    out.write("# gamma = " + ", ".join(map(fmt, s.gamma)) + "; delta = " + ", ".join(map(fmt, s.delta)) + "\n")


def _sample_grid(problem: ValidatedProblem, samples: int):
    """``(x, piece, side)`` rows, each piece sampled on its closed interval."""
    rows = []
    breaks = (problem.h1, problem.h2)
    for i, (a, b) in enumerate(problem.bounds):
        for x in np.linspace(a, b, samples):
            side = ""
            for k, h in enumerate(breaks):
                if abs(x - h) <= BREAKPOINT_TAG_DISTANCE:
                    side = "-0" if i == k else "+0"
            rows.append((float(x), i, side))
    return rows


def _eigenpairs(problem, args, k=None):
    pairs = compute_eigenpairs(problem, args.lambda_min, args.lambda_max, args.grid, tol=args.tol, k=k, jobs=args.jobs)
    return pairs


# ---------------------------------------------------------------------------
# commands


def cmd_validate(args, problem: ValidatedProblem, out) -> int:
    rep = symmetry_condition_check(problem)
    out.write(f"rho = {fmt(problem.rho)}\n")
    out.write(f"p(h1-0) = {fmt(problem.p_minus[0])}; p(h1+0) = {fmt(problem.p_plus[0])}\n")
    out.write(f"p(h2-0) = {fmt(problem.p_minus[1])}; p(h2+0) = {fmt(problem.p_plus[1])}\n")
    out.write(f"r(h1-0) = {fmt(problem.r_minus[0])}; r(h1+0) = {fmt(problem.r_plus[0])}\n")
    out.write(f"r(h2-0) = {fmt(problem.r_minus[1])}; r(h2+0) = {fmt(problem.r_plus[1])}\n")
    out.write(f"self-adjoint transmission: {'yes' if rep.holds else 'no'}; residuals = {fmt(rep.residuals[0])}, {fmt(rep.residuals[1])}\n")
    return EXIT_OK


def cmd_eigs(args, problem: ValidatedProblem, out) -> int:
    pairs = _eigenpairs(problem, args, args.k)
    _header(out, args, problem)
    cols = ["n", "lambda", "D_residual", "norm_check"]
    oracle = None
    if args.oracle and pairs:
        oracle = oracle_eigenvalues(problem, args.M, len(pairs))
        h = max(b - a for a, b in problem.bounds) / args.M
        cmp = compare_spectra([ep.lambda_n for ep in pairs], oracle, quadratic_profile(h))
        cols += ["oracle_lambda", "rel_diff", "within_profile"]
    out.write(",".join(cols) + "\n")
    for n, ep in enumerate(pairs, start=1):
        row = [str(n), fmt(ep.lambda_n), fmt(ep.d_residual), fmt(ep.norm_check)]
        if oracle is not None:
            j = n - 1
            row += [fmt(oracle[j]), fmt(cmp.differences[j]), str(bool(cmp.differences[j] <= cmp.tolerances[j])).lower()]
        out.write(",".join(row) + "\n")
    return EXIT_OK


def _pick(pairs, n):
    if n > len(pairs):
        raise CommandError(f"eigenvalue n={n} requested but only {len(pairs)} found in the window", EXIT_SOLVER)
    return pairs[n - 1]


def cmd_eigenfunction(args, problem: ValidatedProblem, out) -> int:
    ep = _pick(_eigenpairs(problem, args, args.n), args.n)
    _header(out, args, problem)
    out.write(f"# lambda_n = {fmt(ep.lambda_n)}; (phi_n)'_1 = {fmt(ep.boundary_scalar)}\n")
    out.write("x,side,phi,phi_prime\n")
    for x, i, side in _sample_grid(problem, args.samples):
        out.write(f"{fmt(x)},{side},{fmt(float(ep.phi.u(x, i)))},{fmt(float(ep.phi.up(x, i)))}\n")
    return EXIT_OK


def _rhs(args) -> HilbertElement:
    try:
        return HilbertElement.from_expr(parse(args.rhs), args.T2)
    except ExprSyntaxError as err:
        raise CommandError(f"--rhs: {err.msg} at offset {err.offset}", EXIT_INVALID) from None


def cmd_resolvent(args, problem: ValidatedProblem, out) -> int:
    T = _rhs(args)
    U = apply_resolvent(problem, args.lam, T, tol=min(args.tol, 1e-10))
    rep = resolvent_residual(problem, args.lam, T, U)
    _header(out, args, problem)
    out.write("x,side,U1,U1_prime\n")
    for x, i, side in _sample_grid(problem, args.samples):
        xa = np.array([x])
        out.write(f"{fmt(x)},{side},{fmt(float(U.f(xa, i)[0]))},{fmt(float(U.df(xa, i)[0]))}\n")
    out.write(f"# (U1)'_1 = {fmt(U.s)}\n")
    out.write(f"# ode_defect = {fmt(rep.ode_defect)}\n")
    out.write(f"# bc_left = {fmt(rep.bc_left)}; bc_right = {fmt(rep.bc_right)}\n")
    out.write("# trans_defects = " + ", ".join(map(fmt, rep.trans_defects)) + "\n")
    return EXIT_OK


def cmd_expand(args, problem: ValidatedProblem, out) -> int:
    T = _rhs(args)
    pairs = _eigenpairs(problem, args, args.N)
    N = len(pairs) if args.N is None else min(args.N, len(pairs))
    res = expand(problem, pairs, T, N)
    series = boundary_scalar_series(problem, pairs, N)
    _header(out, args, problem)
    out.write("n,lambda_n,c_n,boundary_scalar,residual_norm\n")
    for n in range(1, N + 1):
        ep = pairs[n - 1]
        partial = expand(problem, pairs, T, n).residual_norm if args.residuals else float("nan")
        out.write(f"{n},{fmt(ep.lambda_n)},{fmt(res.coefficients[n - 1])},{fmt(ep.boundary_scalar)},{fmt(partial)}\n")
    out.write(f"# norm_T = {fmt(h_norm(problem, T))}\n")
    out.write(f"# bessel_sum = {fmt(res.bessel_sum)}\n")
    out.write(f"# residual_norm = {fmt(res.residual_norm)}\n")
    out.write(f"# scalar_series = {fmt(series.partial)}; target = {fmt(series.target)}\n")
    return EXIT_OK


def cmd_verify(args, problem: ValidatedProblem, out) -> int:
    config = VerifyConfig(args.lambda_min, args.lambda_max, args.grid, args.k, args.M, args.seed, args.jobs)
    rows = run_suites(problem, config)
    _header(out, args, problem)
    out.write("suite,check,status,measured,tolerance\n")
    for r in rows:
        out.write(f"{r.suite},{r.name},{r.status},{fmt(r.measured)},{fmt(r.tolerance)}\n")
    failed = [r for r in rows if r.counts_as_failure]
    expected = [r for r in rows if r.expected_failure and not r.passed]
    if expected:
        out.write(f"# {len(expected)} expected failures: transmission data do not make K self-adjoint\n")
    out.write(f"# {len(rows) - len(failed)}/{len(rows)} checks passed or failed as expected\n")
    return EXIT_VERIFY if failed else EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _window(p: argparse.ArgumentParser, lmax: float = 100.0) -> None:
    p.add_argument("--lambda-min", type=float, default=-10.0, help="lower end of the eigenvalue scan window")
    p.add_argument("--lambda-max", type=float, default=lmax, help="upper end of the eigenvalue scan window")
    p.add_argument("--grid", type=_count(2), default=None, help="scan nodes (default: 20 per unit of lambda)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sltrans", description="Sturm-Liouville problems with transmission conditions and a spectral boundary condition.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, handler, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("problem", help="problem file (TOML, format = 1)")
        p.add_argument("--out", type=Path, default=None, help="write output here instead of stdout")
        p.add_argument("--tol", type=_positive, default=1e-10, help="eigenvalue refinement tolerance")
        p.add_argument("--jobs", type=_count(1), default=1, help="worker threads for the scan")
        p.set_defaults(handler=handler)
        return p

    command("validate", cmd_validate, "check a problem file")

    p = command("eigs", cmd_eigs, "eigenvalues in a window")
    _window(p)
    p.add_argument("--k", type=_count(0), default=None, help="keep only the first k eigenvalues")
    p.add_argument("--oracle", action="store_true", help="append finite-volume oracle values")
    p.add_argument("--M", type=_count(8), default=128, help="oracle cells per piece")

    p = command("eigenfunction", cmd_eigenfunction, "samples of the n-th normalized eigenfunction")
    _window(p)
    p.add_argument("--n", type=_count(1), required=True, help="1-based index in the window")
    p.add_argument("--samples", type=_count(2), default=101, help="points per piece")

    p = command("resolvent", cmd_resolvent, "solve (K - lam) U = (rhs, T2)")
    p.add_argument("--lam", type=float, required=True)
    p.add_argument("--rhs", default="0", help="expression in x for the function part")
    p.add_argument("--T2", type=float, default=0.0, help="scalar part")
    p.add_argument("--samples", type=_count(2), default=101, help="points per piece")

    p = command("expand", cmd_expand, "eigenfunction expansion coefficients")
    _window(p)
    p.add_argument("--rhs", default="1", help="expression in x for the function part")
    p.add_argument("--T2", type=float, default=0.0, help="scalar part")
    p.add_argument("--N", type=_count(0), default=None, help="number of terms (default: all in window)")
    p.add_argument("--residuals", action="store_true", help="also print ||T - S_n|| for every n")

    p = command("verify", cmd_verify, "run the invariant suites")
    _window(p, lmax=500.0)
    p.add_argument("--k", type=_count(1), default=5, help="eigenpairs used by the suites")
    p.add_argument("--M", type=_count(8), default=128, help="oracle cells per piece")
    p.add_argument("--seed", type=int, default=12345)
    return parser


def _run(args) -> int:
    problem = load_problem(args.problem)
    buf = io.StringIO()
    code = args.handler(args, problem, buf)
    text = buf.getvalue()
    if args.out is not None:
        try:
            args.out.write_text(text, encoding="utf-8")
        except OSError as err:
            raise CommandError(f"cannot write {args.out}: {err.strerror or err}", EXIT_INVALID) from None
    else:
        sys.stdout.write(text)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _run(args)
    except CommandError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.code
    except (ProblemFileError, ProblemError) as err:
        print(f"invalid problem: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_INVALID
    except DomainError as err:
        print(f"invalid input: {err}", file=sys.stderr)
        return EXIT_INVALID
    except NearEigenvalue as err:
        print(f"near eigenvalue: {err}", file=sys.stderr)
        return EXIT_NEAR_EIGENVALUE
    except (StepFailure, QuadratureNonConvergence, EigSolveFailure, ZeroNorm, BracketInvalid) as err:
        print(f"solver failure: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
