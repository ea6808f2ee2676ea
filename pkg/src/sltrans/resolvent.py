"""Resolvent ``(K - lam I)^{-1}`` at a real non-eigenvalue ``lam``.

With ``kappa_i = p * W(phi, chi)`` (constant on piece ``i``) and the weight
``w(y) = -r(y) / kappa_i``, the first component of ``U = (K - lam)^{-1} T`` is

    U1(x) = chi(x) int_{-1}^x phi w T1 dy + phi(x) int_x^1 chi w T1 dy - T2 phi(x) / D(lam)

and the second is ``(U1)'_1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fundamental import PiecewiseSolution, build_chi, build_phi
from .hilbert import (
    FD_STEP,
    QUAD_NODES,
    QUAD_TOL,
    HilbertElement,
    QuadratureNonConvergence,
    ell,
    gauss_legendre,
    integrate,
)
from .integrate import DEFAULT_ATOL, DEFAULT_RTOL
from .problem import ValidatedProblem, boundary_forms

__all__ = [
    "NearEigenvalue",
    "GreenKernel",
    "ResolventReport",
    "build_kernel",
    "apply_resolvent",
    "resolvent_residual",
    "NEAR_EIGENVALUE_THRESHOLD",
]

NEAR_EIGENVALUE_THRESHOLD = 1e-6


class NearEigenvalue(ArithmeticError):
    pass


@dataclass(frozen=True)
class GreenKernel:
    problem: ValidatedProblem
    lam: float
    phi: PiecewiseSolution
    chi: PiecewiseSolution
    d: float
    kappa: tuple[float, float, float]

    def weight(self, y, piece: int):
        return -self.problem.r(y, piece) / self.kappa[piece]

    def _pieces(self, x):
        return np.asarray(self.problem.locate(x))

    def __call__(self, x, y):
        """Kernel of ``T1 -> U1``: ``U1(x) = int K(x, y) T1(y) dy`` for ``T2 = 0``."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return self.symmetric(x, y) * self._r(y)

    def symmetric(self, x, y):
        """``K(x, y) / r(y)``, the kernel with respect to the measure ``r dy``.

        It is symmetric in ``(x, y)`` whenever the transmission data make
        ``K`` self-adjoint.
        """
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        lo, hi = np.minimum(x, y), np.maximum(x, y)
        ilo, ihi = self._pieces(lo), self._pieces(hi)
        phi_lo = self._eval(self.phi, lo, ilo)
        chi_hi = self._eval(self.chi, hi, ihi)
        kappa = np.asarray(self.kappa)[self._pieces(y)]
        out = -phi_lo * chi_hi / kappa
        return out if out.ndim else float(out)

    def _r(self, y):
        idx = self._pieces(y)
        out = np.empty(np.shape(y))
        for i in range(3):
            m = idx == i
            if np.any(m):
                out[m] = self.problem.r(y[m], i)
        return out

    @staticmethod
    def _eval(sol, x, idx):
        out = np.empty(np.shape(x))
        for i in range(3):
            m = idx == i
            if np.any(m):
                out[m] = sol.u(x[m], i)
        return out


def build_kernel(
    problem: ValidatedProblem,
    lam: float,
    threshold: float = NEAR_EIGENVALUE_THRESHOLD,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> GreenKernel:
    """Fundamental solutions at ``lam`` plus the per-piece Abel constants.

    Raises ``NearEigenvalue`` when ``|D(lam)| < threshold * max(1, |lam|)``.
    """
    lam = float(lam)
    phi = build_phi(problem, lam, rtol, atol)
    chi = build_chi(problem, lam, rtol, atol)
    u1, up1 = float(phi.u(1.0, 2)), float(phi.up(1.0, 2))
    cu, cup = float(chi.u(1.0, 2)), float(chi.up(1.0, 2))
    d = u1 * cup - up1 * cu
    if not abs(d) >= threshold * max(1.0, abs(lam)):
        raise NearEigenvalue(f"|D({lam})| = {abs(d):.3e} is below the eigenvalue threshold")
    kappa = []
    for i, (a, b) in enumerate(problem.bounds):
        xm = 0.5 * (a + b)
        pu, pw = phi.state(xm, i)
        cu_, cw = chi.state(xm, i)
        kappa.append(float(pu * cw - pw * cu_))
    return GreenKernel(problem, lam, phi, chi, d, tuple(kappa))  # type: ignore[arg-type]


class _Cumulative:
    """``F(x) = int_{-1}^x g(y) dy`` across the pieces, on fixed panels.

    Panel totals are cross-checked against adaptive quadrature of each piece;
    the panel count doubles until they agree to ``tol``.
    """

    def __init__(self, problem: ValidatedProblem, g, panels_per_unit: float, tol: float, nodes: int = QUAD_NODES):
        self.g = g
        self.t, self.w = gauss_legendre(nodes)
        self.edges, self.cum = [], []
        start = 0.0
        for i, (a, b) in enumerate(problem.bounds):
            reference = integrate(lambda y, i=i: g(y, i), a, b, tol=tol / 3)
            n = max(4, int(np.ceil(panels_per_unit * (b - a))))
            while True:
                edges = np.linspace(a, b, n + 1)
                parts = self._gl(i, edges[:-1], edges[1:])
                if abs(parts.sum() - reference) <= max(tol, 1e-13 * abs(reference)):
                    break
                n *= 2
                if n > 1 << 14:
                    raise QuadratureNonConvergence(f"panel integrals on piece {i} do not converge")
            self.edges.append(edges)
            self.cum.append(start + np.concatenate([[0.0], np.cumsum(parts)]))
            start = self.cum[-1][-1]
        self.total = start

    def _gl(self, piece, lo, hi):
        mid, rad = 0.5 * (lo + hi), 0.5 * (hi - lo)
        ys = mid[:, None] + rad[:, None] * self.t[None, :]
        vals = np.asarray(self.g(ys.ravel(), piece), dtype=float).reshape(ys.shape)
        return rad * (vals @ self.w)

    def __call__(self, x, piece: int):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        edges, cum = self.edges[piece], self.cum[piece]
        j = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, len(edges) - 2)
        return cum[j] + self._gl(piece, edges[j], x)


def apply_resolvent(
    problem: ValidatedProblem,
    lam: float | GreenKernel,
    T: HilbertElement,
    tol: float = QUAD_TOL,
) -> HilbertElement:
    """``U = (K - lam I)^{-1} T``; ``lam`` may be a prebuilt kernel.

    The returned element carries the exact derivative
    ``U1' = chi' A + phi' B + c phi'`` in ``df``.
    """
    kernel = lam if isinstance(lam, GreenKernel) else build_kernel(problem, lam)
    phi, chi = kernel.phi, kernel.chi

    def g_phi(y, i):
        return phi.u(y, i) * kernel.weight(y, i) * T.f(y, i)

    def g_chi(y, i):
        return chi.u(y, i) * kernel.weight(y, i) * T.f(y, i)

    density = 8.0 * (1.0 + np.sqrt(abs(kernel.lam)))
    A = _Cumulative(problem, g_phi, density, tol)
    C = _Cumulative(problem, g_chi, density, tol)
    c3 = -T.s / kernel.d

    def f(x, i):
        x = np.asarray(x, dtype=float)
        a = A(x, i).reshape(x.shape)
        b = (C.total - C(x, i)).reshape(x.shape)
        return chi.u(x, i) * a + phi.u(x, i) * (b + c3)

    def df(x, i):
        x = np.asarray(x, dtype=float)
        a = A(x, i).reshape(x.shape)
        b = (C.total - C(x, i)).reshape(x.shape)
        return chi.up(x, i) * a + phi.up(x, i) * (b + c3)

    u1 = float(chi.u(1.0, 2)) * A.total + float(phi.u(1.0, 2)) * c3
    up1 = float(chi.up(1.0, 2)) * A.total + float(phi.up(1.0, 2)) * c3
    return HilbertElement(f, boundary_forms(problem, u1, up1).u1p_form, df)


@dataclass(frozen=True)
class ResolventReport:
    ode_defect: float
    bc_left: float
    bc_right: float
    trans_defects: tuple[float, float, float, float]

    @property
    def max(self) -> float:
        return max(self.ode_defect, self.bc_left, self.bc_right, *self.trans_defects)


def _value_and_slope(U: HilbertElement, x: float, piece: int):
    xa = np.array([x])
    if U.df is None:
        raise ValueError("residual meter needs the derivative of U")
    return float(U.f(xa, piece)[0]), float(U.df(xa, piece)[0])


def resolvent_residual(
    problem: ValidatedProblem,
    lam: float,
    T: HilbertElement,
    U: HilbertElement,
    samples_per_piece: int = 200,
    h: float = FD_STEP,
) -> ResolventReport:
    """Defects of ``(K - lam) U = T`` and of the domain conditions on ``U``.

    The differential defect ``|l U1 - lam U1 - T1|`` is sampled on an open
    grid in every piece; the flux derivative uses finite differences.
    """
    lu = ell(problem, U, h)
    ode = 0.0
    for i, (a, b) in enumerate(problem.bounds):
        xs = np.linspace(a, b, samples_per_piece + 2)[1:-1]
        ode = max(ode, float(np.max(np.abs(lu(xs, i) - lam * U.f(xs, i) - T.f(xs, i)))))
    left, _ = _value_and_slope(U, -1.0, 0)
    u1, up1 = _value_and_slope(U, 1.0, 2)
    forms = boundary_forms(problem, u1, up1)
    right = abs(-forms.u1_form - lam * forms.u1p_form - T.s)
    g, d = problem.gamma, problem.delta
    trans = []
    for k, hk in enumerate((problem.h1, problem.h2)):
        vm, dm = _value_and_slope(U, hk, k)
        vp, dp = _value_and_slope(U, hk, k + 1)
        trans += [abs(g[2 * k] * vm - d[2 * k] * vp), abs(g[2 * k + 1] * dm - d[2 * k + 1] * dp)]
    return ResolventReport(ode, abs(left), right, tuple(trans))  # type: ignore[arg-type]
