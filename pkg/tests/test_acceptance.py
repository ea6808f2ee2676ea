"""Acceptance criteria, one test per criterion.

Every test prints a single ``[PASS]``/``[FAIL] criterion N: ...`` line with
the measured quantity; the lines are repeated in the pytest terminal summary.
Run alone with ``python3 -m pytest tests/test_acceptance.py -v``.
"""

import time

import numpy as np
import pytest
from scipy.optimize import bisect

import test_expr
from acceptance_log import LINES
from closed_forms import cfg_a_negative_secular, cfg_a_secular
from sltrans.expansion import boundary_coefficient_sum, boundary_scalar_series, boundary_function_series
from sltrans.expr import ExprSyntaxError, evaluate, parse
from sltrans.hilbert import HilbertElement, h_norm, inner_product, polynomial_domain_element, symmetry_test
from sltrans.oracle import compare_spectra, discretize, oracle_eigenvalues, quadratic_profile
from sltrans.resolvent import apply_resolvent, build_kernel, resolvent_residual
from sltrans.spectrum import compute_eigenpairs, reality_probe, refine_brackets, scan_eigenvalues


def verdict(n: int, text: str, ok: bool) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {text}"
    print(line)
    LINES.append(line)
    assert ok, line


def first_five_closed_form() -> np.ndarray:
    """Plain bisection on the closed-form characteristic equation."""
    roots = [-bisect(cfg_a_negative_secular, 0.5, 1.5, xtol=1e-15) ** 2]
    s = np.linspace(0.5, 8.0, 4000)
    v = cfg_a_secular(s)
    for i in np.flatnonzero(v[:-1] * v[1:] < 0)[:4]:
        roots.append(bisect(cfg_a_secular, s[i], s[i + 1], xtol=1e-15) ** 2)
    return np.array(roots)


def test_criterion_1_cfg_a_eigenvalues(problem_a):
    start = time.perf_counter()
    pairs = compute_eigenpairs(problem_a, -5.0, 60.0, 1300, k=5)
    elapsed = time.perf_counter() - start
    shooting = np.array([ep.lambda_n for ep in pairs])
    ref = first_five_closed_form()
    rel = np.abs(shooting - ref) / np.maximum(1.0, np.abs(ref))
    ok = len(pairs) == 5 and rel.max() <= 1e-8 and elapsed < 5.0
    verdict(1, f"max rel err {rel.max():.2e} (<= 1e-8), runtime {elapsed:.2f} s (< 5 s)", ok)


def test_criterion_2_oracle_agreement(problem_a, problem_b):
    start = time.perf_counter()
    parts, ok = [], True
    for name, problem in (("A", problem_a), ("B", problem_b)):
        scan = scan_eigenvalues(problem, -5.0, 120.0, 2500)
        shooting = refine_brackets(problem, scan.brackets[:5])
        op = discretize(problem, 256)
        cmp = compare_spectra(shooting, oracle_eigenvalues(problem, 256, 5), quadratic_profile(op.mesh_width))
        e64 = np.abs(oracle_eigenvalues(problem, 64, 5) - shooting)
        e128 = np.abs(oracle_eigenvalues(problem, 128, 5) - shooting)
        ratios = e64 / e128
        ok &= cmp.passed and bool(np.all((3.5 <= ratios) & (ratios <= 4.5)))
        parts.append(
            f"CFG-{name} max rel diff {cmp.differences.max():.2e} vs profile {cmp.tolerances.min():.1e}.."
            f"{cmp.tolerances.max():.1e}, ratios {ratios.min():.3f}..{ratios.max():.3f}"
        )
    elapsed = time.perf_counter() - start
    ok &= elapsed < 30.0
    verdict(2, "; ".join(parts) + f"; runtime {elapsed:.1f} s (< 30 s)", ok)


def test_criterion_3_orthogonality(problem_a, problem_b, pairs_a, pairs_b):
    worst = 0.0
    for problem, pairs in ((problem_a, pairs_a[:10]), (problem_b, pairs_b[:10])):
        assert len(pairs) == 10
        for m in range(10):
            for n in range(m + 1, 10):
                worst = max(worst, abs(inner_product(problem, pairs[m].element, pairs[n].element)))
    verdict(3, f"max |<Phi_m, Phi_n>| over 90 pairs = {worst:.2e} (<= 1e-7)", worst <= 1e-7)


def test_criterion_4_symmetry(problem_a, problem_b, problem_negative):
    rng = np.random.default_rng(4)
    worst = {}
    for name, problem in (("A", problem_a), ("B", problem_b), ("neg", problem_negative)):
        res = []
        for _ in range(10):
            u = polynomial_domain_element(problem, rng)
            v = polynomial_domain_element(problem, rng)
            res.append(symmetry_test(problem, u, v))
        worst[name] = max(res)
    ok = worst["A"] <= 1e-6 and worst["B"] <= 1e-6 and worst["neg"] >= 1e-2
    verdict(
        4,
        f"max residual CFG-A {worst['A']:.2e}, CFG-B {worst['B']:.2e} (<= 1e-6); "
        f"negative control max {worst['neg']:.2e} (>= 1e-2)",
        ok,
    )


def test_criterion_5_resolvent(problem_a, problem_b, pairs_a, pairs_b):
    rng = np.random.default_rng(5)
    defect = 0.0
    consistency = 0.0
    for problem, pairs in ((problem_a, pairs_a[:10]), (problem_b, pairs_b[:10])):
        lams = np.array([ep.lambda_n for ep in pairs])
        gaps = 0.5 * (lams[:-1] + lams[1:])
        for lam in rng.choice(gaps, size=10):
            polys = [np.polynomial.Polynomial(rng.normal(size=4)) for _ in range(3)]
            T = HilbertElement.from_pieces(polys, float(rng.normal()))
            U = apply_resolvent(problem, lam, T)
            defect = max(defect, resolvent_residual(problem, lam, T, U).max)
        for lam in gaps[:3]:
            kernel = build_kernel(problem, lam)
            for ep in pairs[:5]:
                U = apply_resolvent(problem, kernel, ep.element)
                err = h_norm(problem, U - ep.element * (1.0 / (ep.lambda_n - lam)))
                consistency = max(consistency, err)
    ok = defect <= 1e-6 and consistency <= 1e-6
    verdict(5, f"max defect {defect:.2e} (<= 1e-6), spectral consistency {consistency:.2e} (<= 1e-6)", ok)


def test_criterion_6_scalar_series(problem_a, pairs_a):
    s10, s40 = boundary_scalar_series(problem_a, pairs_a, 10), boundary_scalar_series(problem_a, pairs_a, 40)
    target = problem_a.rho / problem_a.p1
    monotone = bool(np.all(np.diff(s40.partial_sums) >= 0))
    overshoot = float(np.max(s40.partial_sums) - target)
    ok = monotone and overshoot <= 1e-8 and s40.gap < s10.gap
    verdict(
        6,
        f"nondecreasing={monotone}, max overshoot {overshoot:.2e} (<= 1e-8), gap N=10 {s10.gap:.2e} -> N=40 {s40.gap:.2e}",
        ok,
    )


def test_criterion_7_function_series(problem_a, pairs_a):
    l10, l40 = boundary_function_series(problem_a, pairs_a, 10).l2_norm, boundary_function_series(problem_a, pairs_a, 40).l2_norm
    parts = [f"sum s_n phi_n L2 {l10:.2e} -> {l40:.2e}"]
    ok = l40 < l10
    for label, g in (("1", lambda x: np.ones_like(x)), ("x", lambda x: x)):
        f = HilbertElement.from_function(g)
        a, b = boundary_coefficient_sum(problem_a, pairs_a, f, 10), boundary_coefficient_sum(problem_a, pairs_a, f, 40)
        ok &= b < a
        parts.append(f"f={label} {a:.2e} -> {b:.2e}")
    verdict(7, "N=10 -> N=40: " + ", ".join(parts), ok)


def test_criterion_8_kernel_symmetry(problem_a, problem_b, problem_variable):
    rng = np.random.default_rng(8)
    worst = 0.0
    for problem in (problem_a, problem_b, problem_variable):
        breaks = np.array([problem.h1, problem.h2])
        for lam in (-2.5, 3.3, 47.1):
            kernel = build_kernel(problem, lam)
            pts = rng.uniform(-1.0, 1.0, size=(400, 2))
            far = np.all(np.abs(pts[:, :, None] - breaks) > 1e-6, axis=(1, 2))
            x, y = pts[far][:100].T
            worst = max(worst, float(np.max(np.abs(kernel.symmetric(x, y) - kernel.symmetric(y, x)))))
    verdict(8, f"max |K(x,y) - K(y,x)| over 100 pairs x 3 lambda x 3 problems = {worst:.2e} (<= 1e-8)", worst <= 1e-8)


def test_criterion_9_reality_probe(problem_a, problem_b):
    re = np.linspace(-5.0, 100.0, 5)
    im = np.array([-2.0, -0.1, 0.1, 1.0, 2.0])
    grid = (re[:, None] + 1j * im[None, :]).ravel()
    mins = {name: reality_probe(p, grid).min_abs for name, p in (("A", problem_a), ("B", problem_b))}
    ok = all(v > 1e-3 for v in mins.values())
    verdict(9, f"min |D| on 5x5 grid: CFG-A {mins['A']:.2e}, CFG-B {mins['B']:.2e} (> 1e-3)", ok)


def test_criterion_10_parser():
    table_ok = all(evaluate(parse(text), x) == expected for text, x, expected in test_expr.PRECEDENCE)
    offsets_ok = 0
    for text, offset in test_expr.MALFORMED:
        try:
            parse(text)
        except ExprSyntaxError as err:
            offsets_ok += isinstance(err, SyntaxError) and err.offset == offset
    try:
        test_expr.test_round_trip_preserves_evaluation()  # 1000 hypothesis examples
        round_trip = True
    except AssertionError:
        round_trip = False
    ok = table_ok and offsets_ok == len(test_expr.MALFORMED) == 20 and round_trip
    verdict(
        10,
        f"precedence table {len(test_expr.PRECEDENCE)} cases ok={table_ok}, malformed offsets {offsets_ok}/20, "
        f"round trip (1000 ASTs) ok={round_trip}",
        ok,
    )


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
