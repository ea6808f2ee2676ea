"""Problem data: coefficients, boundary and transmission parameters.

The differential equation ``-(p u')' + q u = lam r u`` is posed on the three
pieces ``[-1, h1)``, ``(h1, h2)``, ``(h2, 1]`` with

* ``u(-1) = 0``,
* ``(lam*a1 + b1) u(1) - (lam*a2 + b2) u'(1) = 0``,
* ``g1 u(h1-0) = d1 u(h1+0)``, ``g2 u'(h1-0) = d2 u'(h1+0)`` and the same
  at ``h2`` with ``g3, d3, g4, d4``.

Pieces are indexed 0, 1, 2 from left to right.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .expr import DomainError, Expr, parse

__all__ = [
    "ProblemError",
    "BreakpointOrder",
    "NonPositiveCoefficient",
    "RhoNotPositive",
    "ZeroTransmissionCoefficient",
    "BetaBothZero",
    "CoefficientError",
    "ProblemSpec",
    "ValidatedProblem",
    "BoundaryForms",
    "SymmetryReport",
    "validate_problem",
    "boundary_forms",
    "symmetry_condition_check",
    "cfg_a",
    "cfg_b",
    "from_arrays",
]

SAMPLES_PER_PIECE = 256


class ProblemError(ValueError):
    """Base class for invalid problem data."""


class BreakpointOrder(ProblemError):
    pass


class NonPositiveCoefficient(ProblemError):
    pass


class RhoNotPositive(ProblemError):
    pass


class ZeroTransmissionCoefficient(ProblemError):
    pass


class BetaBothZero(ProblemError):
    pass


class CoefficientError(ProblemError):
    """A coefficient expression failed to evaluate (e.g. division by zero)."""


ExprLike = Union[Expr, str, float, int]


def _as_expr(e: ExprLike) -> Expr:
    if isinstance(e, Expr):
        return e
    return parse(str(e))


def _as_pieces(name: str, values) -> tuple[Expr, Expr, Expr]:
    if isinstance(values, (Expr, str, float, int)):
        values = (values,) * 3
    values = tuple(values)
    if len(values) != 3:
        raise ProblemError(f"{name} needs one expression per piece (3), got {len(values)}")
    return tuple(_as_expr(v) for v in values)  # type: ignore[return-value]


def _as_floats(name: str, values, n: int) -> tuple[float, ...]:
    values = tuple(float(v) for v in values)
    if len(values) != n:
        raise ProblemError(f"{name} needs {n} numbers, got {len(values)}")
    return values


@dataclass(frozen=True)
class ProblemSpec:
    """Raw problem data.  Expressions may be given as strings."""

    h1: float
    h2: float
    r: tuple[Expr, Expr, Expr]
    p: tuple[Expr, Expr, Expr]
    q: tuple[Expr, Expr, Expr]
    alpha: tuple[float, float]
    beta: tuple[float, float]
    gamma: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    delta: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "h1", float(self.h1))
        object.__setattr__(self, "h2", float(self.h2))
        for name in ("r", "p", "q"):
            object.__setattr__(self, name, _as_pieces(name, getattr(self, name)))
        object.__setattr__(self, "alpha", _as_floats("alpha", self.alpha, 2))
        object.__setattr__(self, "beta", _as_floats("beta", self.beta, 2))
        object.__setattr__(self, "gamma", _as_floats("gamma", self.gamma, 4))
        object.__setattr__(self, "delta", _as_floats("delta", self.delta, 4))

    @property
    def rho(self) -> float:
        a1, a2 = self.alpha
        b1, b2 = self.beta
        return a1 * b2 - a2 * b1

    def replace(self, **changes) -> "ProblemSpec":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True)
class ValidatedProblem:
    """A problem that passed :func:`validate_problem`.  Immutable."""

    spec: ProblemSpec
    rho: float
    # one-sided limits at the breakpoints: index 0 -> h1, 1 -> h2
    p_minus: tuple[float, float]
    p_plus: tuple[float, float]
    r_minus: tuple[float, float]
    r_plus: tuple[float, float]
    bounds: tuple[tuple[float, float], tuple[float, float], tuple[float, float]] = field(repr=False)

    # convenience accessors -------------------------------------------------

    @property
    def h1(self) -> float:
        return self.spec.h1

    @property
    def h2(self) -> float:
        return self.spec.h2

    @property
    def alpha(self):
        return self.spec.alpha

    @property
    def beta(self):
        return self.spec.beta

    @property
    def gamma(self):
        return self.spec.gamma

    @property
    def delta(self):
        return self.spec.delta

    @property
    def p1(self) -> float:
        """p(1), taken from the last piece."""
        return float(self.spec.p[2](1.0))

    @property
    def boundary_weight(self) -> float:
        """Weight ``p(1)/rho`` of the scalar slot in the inner product."""
        return self.p1 / self.rho

    def p(self, x, piece: int):
        return self.spec.p[piece](x)

    def q(self, x, piece: int):
        return self.spec.q[piece](x)

    def r(self, x, piece: int):
        return self.spec.r[piece](x)

    def locate(self, x, side: str | None = None) -> np.ndarray:
        """Piece index of each ``x``.

        A point exactly at a breakpoint is ambiguous; ``side='-'`` assigns it
        to the piece on the left, ``side='+'`` to the right.  Without a side
        it raises ``ValueError``.
        """
        x = np.asarray(x, dtype=float)
        h1, h2 = self.h1, self.h2
        at_break = (x == h1) | (x == h2)
        if np.any(at_break) and side not in ("-", "+"):
            raise ValueError("point at a breakpoint needs side='-' or side='+'")
        if np.any((x < -1.0) | (x > 1.0)):
            raise ValueError("point outside [-1, 1]")
        if side == "-":
            idx = (x > h1).astype(int) + (x > h2).astype(int)
        else:
            idx = (x >= h1).astype(int) + (x >= h2).astype(int)
        return idx


def validate_problem(spec: ProblemSpec, samples: int = SAMPLES_PER_PIECE) -> ValidatedProblem:
    """Check every structural assumption and cache one-sided limits."""
    h1, h2 = spec.h1, spec.h2
    if not (-1.0 < h1 < h2 < 1.0):
        raise BreakpointOrder(f"need -1 < h1 < h2 < 1, got h1={h1}, h2={h2}")
    if spec.beta[0] == 0.0 and spec.beta[1] == 0.0:
        raise BetaBothZero("|beta1| + |beta2| must be nonzero")
    rho = spec.rho
    if not rho > 0.0:
        raise RhoNotPositive(f"rho = alpha1*beta2 - alpha2*beta1 must be > 0, got {rho}")
    for j, (g, d) in enumerate(zip(spec.gamma, spec.delta), start=1):
        if g == 0.0 or d == 0.0:
            raise ZeroTransmissionCoefficient(f"gamma{j} and delta{j} must both be nonzero (got {g}, {d})")

    bounds = ((-1.0, h1), (h1, h2), (h2, 1.0))
    for i, (a, b) in enumerate(bounds):
        xs = np.linspace(a, b, samples)
        for name in ("r", "p", "q"):
            try:
                vals = np.asarray(getattr(spec, name)[i](xs), dtype=float)
            except DomainError as err:
                raise CoefficientError(f"{name} on piece {i}: {err}") from None
            if not np.all(np.isfinite(vals)):
                raise CoefficientError(f"{name} on piece {i} is not finite")
            if name != "q" and np.any(vals <= 0.0):
                bad = xs[np.argmax(vals <= 0.0)]
                raise NonPositiveCoefficient(f"{name} must be positive; {name}({bad:.6g}) <= 0 on piece {i}")

    p, r = spec.p, spec.r
    return ValidatedProblem(
        spec=spec,
        rho=rho,
        p_minus=(float(p[0](h1)), float(p[1](h2))),
        p_plus=(float(p[1](h1)), float(p[2](h2))),
        r_minus=(float(r[0](h1)), float(r[1](h2))),
        r_plus=(float(r[1](h1)), float(r[2](h2))),
        bounds=bounds,
    )


@dataclass(frozen=True)
class BoundaryForms:
    u1_form: float
    u1p_form: float


def boundary_forms(problem: ValidatedProblem, u1: float, u1p: float) -> BoundaryForms:
    """``(u)_1 = b1 u(1) - b2 u'(1)`` and ``(u)'_1 = a1 u(1) - a2 u'(1)``."""
    a1, a2 = problem.alpha
    b1, b2 = problem.beta
    return BoundaryForms(b1 * u1 - b2 * u1p, a1 * u1 - a2 * u1p)


@dataclass(frozen=True)
class SymmetryReport:
    holds: bool
    residuals: tuple[float, float]


def symmetry_condition_check(problem: ValidatedProblem, rtol: float = 1e-12) -> SymmetryReport:
    """Test ``d1 d2 p(h1-0) = g1 g2 p(h1+0)`` and the analogue at ``h2``."""
    g, d = problem.gamma, problem.delta
    lhs = (d[0] * d[1] * problem.p_minus[0], d[2] * d[3] * problem.p_minus[1])
    rhs = (g[0] * g[1] * problem.p_plus[0], g[2] * g[3] * problem.p_plus[1])
    res = tuple(abs(a - b) for a, b in zip(lhs, rhs))
    holds = all(e <= rtol * max(abs(a), abs(b)) for e, a, b in zip(res, lhs, rhs))
    return SymmetryReport(holds, res)  # type: ignore[arg-type]


# ---------------------------------------------------------------------------
# reference configurations


def cfg_a() -> ValidatedProblem:
    """Identity transmission, p = r = 1, q = 0, boundary condition u(1) + lam u'(1) = 0."""
    return validate_problem(
        ProblemSpec(h1=-1 / 3, h2=1 / 3, r="1", p="1", q="0", alpha=(0, -1), beta=(1, 0))
    )


def cfg_b() -> ValidatedProblem:
    """p jumps 1 -> 4 at h1, u and u' are halved across h1; symmetric."""
    return validate_problem(
        ProblemSpec(
            h1=-1 / 3,
            h2=1 / 3,
            r="1",
            p=("1", "4", "4"),
            q="0",
            alpha=(0, -1),
            beta=(1, 0),
            gamma=(1, 1, 1, 1),
            delta=(2, 2, 1, 1),
        )
    )


def from_arrays(h: Sequence[float], r, p, q, alpha, beta, gamma=(1, 1, 1, 1), delta=(1, 1, 1, 1)) -> ValidatedProblem:
    """Shorthand for ``validate_problem(ProblemSpec(...))``."""
    return validate_problem(ProblemSpec(h[0], h[1], r, p, q, alpha, beta, gamma, delta))
