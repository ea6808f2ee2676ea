"""Invariant suites run by ``sltrans verify``.

Each check returns a :class:`Check` row.  Checks whose hypothesis is known to
fail for the problem at hand (symmetry of ``K``, of the Green kernel, and
everything resting on orthogonality, when the transmission data do not make
``K`` self-adjoint) are marked ``expected_failure``
and do not count against the run.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .expansion import fourier_coefficients, boundary_scalar_series
from .expr import evaluate, parse, to_string
from .fundamental import build_chi, build_phi
from .hilbert import (
    HilbertElement,
    apply_K,
    h_norm,
    inner_product,
    linear_combination,
    polynomial_domain_element,
    symmetry_test,
)
from .integrate import integrate_ivp
from .oracle import compare_spectra, oracle_eigenvalues, quadratic_profile
from .problem import ValidatedProblem, boundary_forms, symmetry_condition_check, validate_problem
from .resolvent import apply_resolvent, build_kernel, resolvent_residual
from .spectrum import Eigenpair, compute_eigenpairs, reality_probe

__all__ = ["Check", "VerifyConfig", "run_suites", "SUITES"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    passed: bool
    measured: float
    tolerance: float
    expected_failure: bool = False

    @property
    def status(self) -> str:
        if self.expected_failure:
            return "expected-fail" if not self.passed else "pass"
        return "pass" if self.passed else "FAIL"

    @property
    def counts_as_failure(self) -> bool:
        return not self.passed and not self.expected_failure


def _le(suite, name, measured, tol, expected_failure=False) -> Check:
    measured = float(measured)
    return Check(suite, name, bool(measured <= tol), measured, float(tol), expected_failure)


@dataclass
class VerifyConfig:
    lambda_min: float = -10.0
    lambda_max: float = 500.0
    grid: int | None = None
    k: int = 5
    oracle_M: int = 128
    seed: int = 12345
    jobs: int = 1


class _Context:
    def __init__(self, problem: ValidatedProblem, config: VerifyConfig):
        self.problem = problem
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.symmetric = symmetry_condition_check(problem).holds
        self._pairs: list[Eigenpair] | None = None

    @property
    def eigenpairs(self) -> list[Eigenpair]:
        if self._pairs is None:
            c = self.config
            self._pairs = compute_eigenpairs(self.problem, c.lambda_min, c.lambda_max, c.grid, k=c.k, jobs=c.jobs)
        return self._pairs


def suite_problem(ctx: _Context) -> Iterator[Check]:
    P = ctx.problem
    quad = ctx.rng.normal(size=(100, 4))
    worst = 0.0
    for u1, up1, v1, vp1 in quad:
        fu, fv = boundary_forms(P, u1, up1), boundary_forms(P, v1, vp1)
        lhs = P.rho * (u1 * vp1 - up1 * v1)
        rhs = fu.u1_form * fv.u1p_form - fu.u1p_form * fv.u1_form
        worst = max(worst, abs(lhs - rhs) / (1 + abs(lhs)))
    yield _le("problem", "boundary form identity (100 quadruples)", worst, 1e-13)
    again = validate_problem(P.spec)
    same = again.p_minus == P.p_minus and again.p_plus == P.p_plus and again.r_minus == P.r_minus and again.r_plus == P.r_plus
    yield Check("problem", "validation idempotent", same, 0.0 if same else 1.0, 0.0)


def suite_expr(ctx: _Context) -> Iterator[Check]:
    cases = {"2+3*4": 14.0, "2*3^2": 18.0, "2^3^2": 512.0, "-2^2": -4.0, "8/4/2": 1.0, "5-3-1": 1.0}
    worst = max(abs(float(evaluate(parse(t), 0.0)) - v) for t, v in cases.items())
    yield _le("expr", "precedence table", worst, 0.0)
    xs = ctx.rng.uniform(-1, 1, 16)
    worst = 0.0
    for e in (*ctx.problem.spec.r, *ctx.problem.spec.p, *ctx.problem.spec.q):
        worst = max(worst, float(np.max(np.abs(parse(to_string(e)).eval(xs) - e.eval(xs)))))
    yield _le("expr", "coefficient round-trip", worst, 0.0)


def suite_integrator(ctx: _Context) -> Iterator[Check]:
    P = ctx.problem
    a, b = P.bounds[0]
    lam = float(ctx.rng.uniform(-5, 50))
    fwd = integrate_ivp(P, 0, lam, a, b, 0.3, 1.1)
    u1, up1 = fwd(b)
    back = integrate_ivp(P, 0, lam, b, a, float(u1), float(up1))
    u0, up0 = back(a)
    err = max(abs(u0 - 0.3), abs(up0 - 1.1)) / 1.1
    yield _le("integrator", "reversibility piece 0", err, 1e-8)
    x, eps = 0.5 * (a + b), 1e-3
    vals = [integrate_ivp(P, 0, lam + k * eps, a, b, 0.0, 1.0)(x)[0] for k in (-1, 0, 1)]
    second = abs(vals[0] - 2 * vals[1] + vals[2])
    yield _le("integrator", "smooth in lam (second difference)", second, 1e-3 * (1 + abs(vals[1])))


def _wronskian_state(phi, chi, x, piece):
    pu, pw = phi.state(x, piece)
    cu, cw = chi.state(x, piece)
    return pu * cw - pw * cu


def suite_fundamental(ctx: _Context) -> Iterator[Check]:
    P = ctx.problem
    g, d = P.gamma, P.delta
    abel = jump = 0.0
    for lam in ctx.rng.uniform(-5, 100, 5):
        phi, chi = build_phi(P, lam), build_chi(P, lam)
        kap = []
        for i, (a, b) in enumerate(P.bounds):
            xs = np.linspace(a, b, 12)
            k = np.asarray(_wronskian_state(phi, chi, xs, i))
            med = float(np.median(k))
            abel = max(abel, float(np.max(np.abs(k - med))) / abs(med))
            kap.append((k[0], k[-1]))
        for k in range(2):
            # omega in terms of kappa: omega = kappa / p
            left = kap[k][1] / P.p_minus[k]
            right = kap[k + 1][0] / P.p_plus[k]
            factor = g[2 * k] * g[2 * k + 1] / (d[2 * k] * d[2 * k + 1])
            jump = max(jump, abs(right - factor * left) / abs(right))
    yield _le("fundamental", "Abel identity per piece", abel, 1e-9)
    yield _le("fundamental", "Wronskian jump law", jump, 1e-9)


def suite_spectrum(ctx: _Context) -> Iterator[Check]:
    P = ctx.problem
    pairs = ctx.eigenpairs
    yield Check("spectrum", f"found {ctx.config.k} eigenvalues in window", len(pairs) >= ctx.config.k, len(pairs), ctx.config.k)
    if not pairs:
        return
    yield _le("spectrum", "unit norm", max(abs(ep.norm_check - 1) for ep in pairs), 1e-8)
    gram = np.array([[inner_product(P, a.element, b.element) for b in pairs] for a in pairs])
    off = np.abs(gram - np.diag(np.diag(gram)))
    yield _le("spectrum", "orthogonality", float(off.max()), 1e-7, expected_failure=not ctx.symmetric)
    lams = np.array([ep.lambda_n for ep in pairs])
    if len(lams) > 1:
        gaps = np.diff(lams)
        yield Check("spectrum", "strictly increasing", bool(np.all(gaps > 0)), float(gaps.min()), 0.0)
    ora = oracle_eigenvalues(P, ctx.config.oracle_M, len(lams))
    h = (max(b - a for a, b in P.bounds)) / ctx.config.oracle_M
    cmp = compare_spectra(lams, ora, quadratic_profile(h))
    yield Check("spectrum", f"oracle agreement (M={ctx.config.oracle_M})", cmp.passed, float(np.max(cmp.differences - cmp.tolerances)), 0.0)
    samples = [complex(re, im) for re in np.linspace(-5, 50, 3) for im in (-1.0, 0.5, 2.0)]
    probe = reality_probe(P, samples)
    yield Check("spectrum", "no complex eigenvalues (min |D|)", probe.min_abs > 1e-3, probe.min_abs, 1e-3)


def suite_hilbert(ctx: _Context) -> Iterator[Check]:
    P = ctx.problem
    els = [polynomial_domain_element(P, ctx.rng) for _ in range(6)]
    a, b, c = els[:3]
    s1, s2 = inner_product(P, a, b), inner_product(P, b, a)
    yield _le("hilbert", "inner product symmetric", abs(s1 - s2) / (1 + abs(s1)), 1e-12)
    x, y = ctx.rng.normal(size=2)
    lin = inner_product(P, a * x + b * y, c)
    lin_ref = x * inner_product(P, a, c) + y * inner_product(P, b, c)
    yield _le("hilbert", "inner product bilinear", abs(lin - lin_ref) / (1 + abs(lin_ref)), 1e-12)
    cs = max(abs(inner_product(P, u, v)) - h_norm(P, u) * h_norm(P, v) for u in els for v in els)
    yield _le("hilbert", "Cauchy-Schwarz", cs, 1e-12)
    worst = 0.0
    for u, v in zip(els[::2], els[1::2]):
        worst = max(worst, symmetry_test(P, u, v))
    yield _le("hilbert", "K symmetric on random domain elements", worst, 1e-6, expected_failure=not ctx.symmetric)
    if ctx.eigenpairs:
        ep = ctx.eigenpairs[0]
        r = h_norm(P, apply_K(P, ep.element) - ep.element * ep.lambda_n)
        yield _le("hilbert", "K Phi_1 = lam_1 Phi_1", r, 1e-6)


def _mid_gap(pairs: list[Eigenpair], rng) -> float:
    if len(pairs) < 2:
        return pairs[0].lambda_n - 1.0 if pairs else 0.0
    j = int(rng.integers(0, len(pairs) - 1))
    return 0.5 * (pairs[j].lambda_n + pairs[j + 1].lambda_n)


def suite_resolvent(ctx: _Context) -> Iterator[Check]:
    P = ctx.problem
    pairs = ctx.eigenpairs
    lam = _mid_gap(pairs, ctx.rng)
    T = HilbertElement.from_pieces([np.cos, lambda x: 1 + x**2, np.exp], float(ctx.rng.normal()))
    U = apply_resolvent(P, lam, T)
    rep = resolvent_residual(P, lam, T, U)
    yield _le("resolvent", f"defect identity at lam={lam:.6g}", rep.max, 1e-6)
    if pairs:
        ep = pairs[0]
        Ur = apply_resolvent(P, lam, ep.element)
        err = h_norm(P, Ur - ep.element * (1.0 / (ep.lambda_n - lam)))
        yield _le("resolvent", "spectral consistency", err, 1e-6)
    kernel = build_kernel(P, lam)
    pts = []
    for _ in range(100):
        x, y = ctx.rng.uniform(-1, 1, 2)
        pts.append((x, y))
    xs, ys = np.array(pts).T
    sym = float(np.max(np.abs(kernel.symmetric(xs, ys) - kernel.symmetric(ys, xs))))
    yield _le("resolvent", "Green kernel symmetric", sym, 1e-8, expected_failure=not ctx.symmetric)


def suite_expansion(ctx: _Context) -> Iterator[Check]:
    P = ctx.problem
    pairs = ctx.eigenpairs
    if not pairs:
        return
    coeffs = ctx.rng.normal(size=len(pairs))
    T = linear_combination(coeffs, [ep.element for ep in pairs])
    c = fourier_coefficients(P, pairs, T)
    yield _le("expansion", "coefficients recover span element", float(np.max(np.abs(c - coeffs))), 1e-7, expected_failure=not ctx.symmetric)
    norm2 = inner_product(P, T, T)
    yield _le("expansion", "Parseval on the span", abs(norm2 - np.sum(c**2)), 1e-8 * (1 + norm2), expected_failure=not ctx.symmetric)
    T = HilbertElement.from_function(lambda x: np.ones_like(x), 0.5)
    c = fourier_coefficients(P, pairs, T)
    yield _le("expansion", "Bessel inequality", np.sum(c**2) - inner_product(P, T, T), 1e-9, expected_failure=not ctx.symmetric)
    s = boundary_scalar_series(P, pairs)
    yield Check("expansion", "scalar series nondecreasing", bool(np.all(np.diff(s.partial_sums) >= 0)), 0.0, 0.0)
    yield _le("expansion", "scalar series below rho/p(1)", s.partial - s.target, 1e-8, expected_failure=not ctx.symmetric)
    m, n = 0, min(1, len(pairs) - 1)
    if m != n:
        a, b = pairs[m], pairs[n]
        fn = inner_product(P, HilbertElement(a.phi.u, 0.0), HilbertElement(b.phi.u, 0.0))
        bd = -P.boundary_weight * a.boundary_scalar * b.boundary_scalar
        yield _le("expansion", "function-part orthogonality relation", abs(fn - bd), 1e-7, expected_failure=not ctx.symmetric)


SUITES: dict[str, Callable[[_Context], Iterator[Check]]] = {
    "problem": suite_problem,
    "expr": suite_expr,
    "integrator": suite_integrator,
    "fundamental": suite_fundamental,
    "spectrum": suite_spectrum,
    "hilbert": suite_hilbert,
    "resolvent": suite_resolvent,
    "expansion": suite_expansion,
}


def run_suites(problem: ValidatedProblem, config: VerifyConfig | None = None, suites=None) -> list[Check]:
    """Run the named suites (all by default); a crashing suite yields a failed row."""
    ctx = _Context(problem, config or VerifyConfig())
    rows: list[Check] = []
    for name in suites or SUITES:
        try:
            rows.extend(SUITES[name](ctx))
        except Exception as err:  # report, do not abort the table
            log.exception("suite %s crashed", name)
            rows.append(Check(name, f"suite crashed: {type(err).__name__}: {err}", False, float("nan"), float("nan")))
    return rows
