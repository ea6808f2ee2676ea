"""The space L2[-1, 1] (+) R with the weighted inner product

    <T, G> = sum_i int_{piece i} T1 G1 r dx + (p(1)/rho) T2 G2,

the operator ``K(u, (u)'_1) = (l u, -(u)_1)`` and its symmetry test.

Function components are callables ``f(x, piece)`` so that nothing is ever
evaluated across a breakpoint; quadrature is composite Gauss-Legendre with
panels aligned to the pieces.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import Polynomial

from .expr import Expr, parse
from .problem import ValidatedProblem, boundary_forms

__all__ = [
    "PieceFn",
    "HilbertElement",
    "QuadratureNonConvergence",
    "DomainMismatch",
    "NotInDomain",
    "gauss_legendre",
    "integrate",
    "integrate_pieces",
    "inner_product",
    "h_norm",
    "apply_K",
    "ell",
    "domain_residuals",
    "symmetry_test",
    "polynomial_domain_element",
    "FD_STEP",
    "linear_combination",
    "derivative",
]

PieceFn = Callable[[np.ndarray, int], np.ndarray]

FD_STEP = 1e-4
QUAD_NODES = 32
QUAD_TOL = 1e-10


class QuadratureNonConvergence(RuntimeError):
    pass


class DomainMismatch(ValueError):
    """The scalar slot of an element differs from ``(u)'_1``."""


class NotInDomain(ValueError):
    """An element violates the boundary, transmission or scalar-slot constraints."""


def _broadcast(g: Callable[[np.ndarray], np.ndarray]) -> PieceFn:
    def f(x, piece):
        x = np.asarray(x, dtype=float)
        return np.array(np.broadcast_to(np.asarray(g(x), dtype=float), x.shape))

    return f


def _zero(x, piece):
    return np.zeros(np.shape(x))


@dataclass(frozen=True)
class HilbertElement:
    """Pair ``(f, s)``: function component and scalar component.

    ``df`` is the derivative of ``f`` when it is known exactly; operations
    that need ``f'`` fall back to finite differences otherwise.
    """

    f: PieceFn
    s: float = 0.0
    df: Optional[PieceFn] = None

    @classmethod
    def from_function(cls, g, s: float = 0.0, dg=None) -> "HilbertElement":
        """Wrap a piece-independent vectorized function ``g(x)``."""
        return cls(_broadcast(g), float(s), _broadcast(dg) if dg is not None else None)

    @classmethod
    def from_expr(cls, e: Expr | str, s: float = 0.0) -> "HilbertElement":
        e = parse(e) if isinstance(e, str) else e
        return cls.from_function(e.eval, s)

    @classmethod
    def from_pieces(cls, fs, s: float = 0.0, dfs=None) -> "HilbertElement":
        """One vectorized function per piece."""
        fs = tuple(fs)
        dfs = tuple(dfs) if dfs is not None else None

        def f(x, piece):
            return np.asarray(fs[piece](np.asarray(x, dtype=float)), dtype=float) * np.ones(np.shape(x))

        df = None
        if dfs is not None:
            def df(x, piece):
                return np.asarray(dfs[piece](np.asarray(x, dtype=float)), dtype=float) * np.ones(np.shape(x))

        return cls(f, float(s), df)

    @classmethod
    def zero(cls) -> "HilbertElement":
        return cls(_zero, 0.0, _zero)

    def __call__(self, x, piece: int):
        return self.f(x, piece)

    def _combine(self, other: "HilbertElement", a: float, b: float) -> "HilbertElement":
        f1, f2 = self.f, other.f

        def f(x, piece):
            return a * f1(x, piece) + b * f2(x, piece)

        df = None
        if self.df is not None and other.df is not None:
            d1, d2 = self.df, other.df

            def df(x, piece):
                return a * d1(x, piece) + b * d2(x, piece)

        return HilbertElement(f, a * self.s + b * other.s, df)

    def __add__(self, other):
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other):
        return self._combine(other, 1.0, -1.0)

    def __mul__(self, c: float):
        c = float(c)
        f0, d0 = self.f, self.df

        def f(x, piece):
            return c * f0(x, piece)

        df = None if d0 is None else (lambda x, piece: c * d0(x, piece))
        return HilbertElement(f, c * self.s, df)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def values(self, problem: ValidatedProblem, x, side: str | None = None) -> np.ndarray:
        """Function component at arbitrary points of ``[-1, 1]``."""
        x = np.asarray(x, dtype=float)
        idx = problem.locate(x, side)
        out = np.empty(x.shape)
        for i in range(3):
            m = idx == i
            if np.any(m):
                out[m] = self.f(x[m], i)
        return out


def linear_combination(coefficients, elements) -> HilbertElement:
    """``sum c_n E_n`` evaluated lazily; empty input gives the zero element."""
    coefficients = [float(c) for c in coefficients]
    elements = list(elements)
    if not elements:
        return HilbertElement.zero()
    fs = [e.f for e in elements]
    dfs = [e.df for e in elements]

    def f(x, piece):
        out = np.zeros(np.shape(x))
        for c, fn in zip(coefficients, fs):
            out = out + c * fn(x, piece)
        return out

    df = None
    if all(d is not None for d in dfs):
        def df(x, piece):
            out = np.zeros(np.shape(x))
            for c, fn in zip(coefficients, dfs):
                out = out + c * fn(x, piece)
            return out

    s = float(sum(c * e.s for c, e in zip(coefficients, elements)))
    return HilbertElement(f, s, df)


# ---------------------------------------------------------------------------
# quadrature


@lru_cache(maxsize=None)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on ``[-1, 1]``."""
    return np.polynomial.legendre.leggauss(n)


def integrate(
    fn: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    tol: float = QUAD_TOL,
    nodes: int = QUAD_NODES,
    rtol: float = 1e-13,
    max_panels: int = 4096,
    initial_panels: int = 1,
) -> float:
    """Adaptive composite Gauss-Legendre quadrature of ``fn`` over ``[a, b]``.

    A panel is accepted when its rule and the sum over its two halves agree
    to within its share of ``max(tol, rtol * |integral|)``; the halves are
    kept.  All pending panels are evaluated in one vectorized call.
    """
    if a == b:
        return 0.0
    t, w = gauss_legendre(nodes)
    length = b - a
    edges = np.linspace(a, b, initial_panels + 1)
    lo, hi = edges[:-1], edges[1:]

    def rule(lo, hi):
        mid = 0.5 * (lo + hi)
        rad = 0.5 * (hi - lo)
        xs = mid[:, None] + rad[:, None] * t[None, :]
        vals = np.asarray(fn(xs.ravel()), dtype=float).reshape(xs.shape)
        return rad * (vals @ w)

    whole = rule(lo, hi)
    total = 0.0
    npanels = len(lo)
    while len(lo):
        mid = 0.5 * (lo + hi)
        halves = rule(np.concatenate([lo, mid]), np.concatenate([mid, hi]))
        k = len(lo)
        left, right = halves[:k], halves[k:]
        fine = left + right
        budget = max(tol, rtol * abs(total + np.sum(fine)))
        ok = np.abs(whole - fine) <= budget * (hi - lo) / abs(length)
        total += float(np.sum(fine[ok]))
        bad = ~ok
        npanels += int(np.sum(bad))
        if npanels > max_panels:
            raise QuadratureNonConvergence(f"no convergence on [{a}, {b}] with {max_panels} panels")
        lo, hi = np.concatenate([lo[bad], mid[bad]]), np.concatenate([mid[bad], hi[bad]])
        whole = np.concatenate([left[bad], right[bad]])
    return total


def integrate_pieces(problem: ValidatedProblem, fn: PieceFn, tol: float = QUAD_TOL) -> float:
    """``sum_i int_{piece i} fn(x, i) dx`` with panels aligned to the pieces."""
    total = 0.0
    for i, (a, b) in enumerate(problem.bounds):
        total += integrate(lambda x, i=i: fn(x, i), a, b, tol=tol / 3)
    return total


def inner_product(problem: ValidatedProblem, T: HilbertElement, G: HilbertElement, tol: float = QUAD_TOL) -> float:
    def integrand(x, i):
        return T.f(x, i) * G.f(x, i) * problem.r(x, i)

    return integrate_pieces(problem, integrand, tol) + problem.boundary_weight * T.s * G.s


def h_norm(problem: ValidatedProblem, T: HilbertElement, tol: float = QUAD_TOL) -> float:
    return float(np.sqrt(max(inner_product(problem, T, T, tol), 0.0)))


# ---------------------------------------------------------------------------
# finite differences


def derivative(fn: PieceFn, x, piece: int, a: float, b: float, h: float = FD_STEP) -> np.ndarray:
    """Finite differences of ``fn`` on piece ``[a, b]``.

    Fourth-order central where ``x +- 2h`` stays in the piece, second-order
    central or one-sided closer to an end, so the stencil never crosses a
    breakpoint.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(x.shape)
    wide = (x - 2 * h >= a) & (x + 2 * h <= b)
    central = ~wide & (x - h >= a) & (x + h <= b)
    fwd = ~wide & ~central & (x - h < a)
    bwd = ~wide & ~central & ~fwd
    if np.any(wide):
        xw = x[wide]
        out[wide] = (
            fn(xw - 2 * h, piece) - 8 * fn(xw - h, piece) + 8 * fn(xw + h, piece) - fn(xw + 2 * h, piece)
        ) / (12 * h)
    if np.any(central):
        xc = x[central]
        out[central] = (fn(xc + h, piece) - fn(xc - h, piece)) / (2 * h)
    if np.any(fwd):
        xf = x[fwd]
        out[fwd] = (-3 * fn(xf, piece) + 4 * fn(xf + h, piece) - fn(xf + 2 * h, piece)) / (2 * h)
    if np.any(bwd):
        xb = x[bwd]
        out[bwd] = (3 * fn(xb, piece) - 4 * fn(xb - h, piece) + fn(xb - 2 * h, piece)) / (2 * h)
    return out


def _endpoint_derivative(fn: PieceFn, x: float, piece: int, inward: float, h: float = 1e-3) -> float:
    # fourth-order one-sided stencil pointing into the piece
    xs = x + inward * h * np.arange(5)
    v = fn(xs, piece)
    return float(inward * (-25 * v[0] + 48 * v[1] - 36 * v[2] + 16 * v[3] - 3 * v[4]) / (12 * h))


def _du(problem: ValidatedProblem, u: HilbertElement, piece: int, h: float) -> PieceFn:
    if u.df is not None:
        return u.df
    a, b = problem.bounds[piece]
    return lambda x, i: derivative(u.f, x, i, a, b, h)


def _endpoint_values(problem: ValidatedProblem, u: HilbertElement, x: float, piece: int):
    """``(u, u')`` at an end of ``piece``, one-sided from inside it."""
    a, b = problem.bounds[piece]
    val = float(u.f(np.array([x]), piece)[0])
    if u.df is not None:
        der = float(u.df(np.array([x]), piece)[0])
    else:
        der = _endpoint_derivative(u.f, x, piece, 1.0 if x == a else -1.0)
    return val, der


def ell(problem: ValidatedProblem, u: HilbertElement, h: float = FD_STEP) -> PieceFn:
    """``(l u)(x) = (-(p u')' + q u) / r`` by differences of the flux ``p u'``."""

    def lu(x, piece):
        x = np.asarray(x, dtype=float)
        a, b = problem.bounds[piece]
        du = _du(problem, u, piece, h)

        def flux(y, i):
            return problem.p(y, i) * du(y, i)

        dflux = derivative(flux, x, piece, a, b, h).reshape(x.shape)
        return (-dflux + problem.q(x, piece) * u.f(x, piece)) / problem.r(x, piece)

    return lu


def _scalar_slot_tol(*vals) -> float:
    return 1e-8 * (1.0 + max(abs(v) for v in vals))


def apply_K(problem: ValidatedProblem, u: HilbertElement, h: float = FD_STEP, check: bool = True) -> HilbertElement:
    """``K(u, (u)'_1) = (l u, -(u)_1)``."""
    u1, up1 = _endpoint_values(problem, u, 1.0, 2)
    forms = boundary_forms(problem, u1, up1)
    if check and abs(u.s - forms.u1p_form) > _scalar_slot_tol(u.s, forms.u1p_form):
        raise DomainMismatch(f"scalar slot {u.s!r} != (u)'_1 = {forms.u1p_form!r}")
    return HilbertElement(ell(problem, u, h), -forms.u1_form)


@dataclass(frozen=True)
class DomainResiduals:
    left: float
    transmission: tuple[float, float, float, float]
    scalar_slot: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return max(self.left, *self.transmission, self.scalar_slot) <= self.tolerance


def domain_residuals(problem: ValidatedProblem, u: HilbertElement, tol: float = 1e-8) -> DomainResiduals:
    g, d = problem.gamma, problem.delta
    scale = 1.0
    u_left, _ = _endpoint_values(problem, u, -1.0, 0)
    trans = []
    for k, h in enumerate((problem.h1, problem.h2)):
        vm, dm = _endpoint_values(problem, u, h, k)
        vp, dp = _endpoint_values(problem, u, h, k + 1)
        scale = max(scale, abs(vm), abs(dm), abs(vp), abs(dp))
        trans += [abs(g[2 * k] * vm - d[2 * k] * vp), abs(g[2 * k + 1] * dm - d[2 * k + 1] * dp)]
    u1, up1 = _endpoint_values(problem, u, 1.0, 2)
    slot = boundary_forms(problem, u1, up1).u1p_form
    scale = max(scale, abs(u1), abs(up1))
    return DomainResiduals(abs(u_left), tuple(trans), abs(u.s - slot), tol * scale)  # type: ignore[arg-type]


def symmetry_test(problem: ValidatedProblem, u: HilbertElement, v: HilbertElement, h: float = FD_STEP) -> float:
    """``|<K u, v> - <u, K v>|`` for ``u, v`` in the domain of ``K``."""
    for name, el in (("u", u), ("v", v)):
        res = domain_residuals(problem, el)
        if not res.ok:
            raise NotInDomain(f"{name} violates the domain constraints: {res}")
    Ku = apply_K(problem, u, h, check=False)
    Kv = apply_K(problem, v, h, check=False)
    return abs(inner_product(problem, Ku, v) - inner_product(problem, u, Kv))


def polynomial_domain_element(problem: ValidatedProblem, rng: np.random.Generator, degree: int = 4) -> HilbertElement:
    """A random piecewise polynomial in the domain of ``K``.

    Piece 0 vanishes at -1; pieces 1 and 2 start from the values and slopes
    dictated by the transmission conditions, plus a random quadratic-and-up
    tail.  Derivatives are exact.
    """
    g, d = problem.gamma, problem.delta
    x = Polynomial([0.0, 1.0])
    p0 = (x + 1.0) * Polynomial(rng.normal(size=degree))
    polys = [p0]
    for k, h in enumerate((problem.h1, problem.h2)):
        prev = polys[-1]
        val = g[2 * k] / d[2 * k] * prev(h)
        slope = g[2 * k + 1] / d[2 * k + 1] * prev.deriv()(h)
        tail = Polynomial(rng.normal(size=degree - 1)) if degree > 1 else Polynomial([0.0])
        polys.append(val + slope * (x - h) + (x - h) ** 2 * tail)
    derivs = [pp.deriv() for pp in polys]
    s = boundary_forms(problem, polys[2](1.0), derivs[2](1.0)).u1p_form
    return HilbertElement.from_pieces(polys, s, derivs)
