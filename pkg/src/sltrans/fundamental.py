"""Left and right fundamental solutions and their Wronskians.

``phi`` starts at ``x = -1`` with ``u = 0, u' = 1`` and is carried to the
right through the transmission jumps; ``chi`` starts at ``x = 1`` with
``u = a2*lam + b2, u' = a1*lam + b1`` and is carried to the left.  Both
therefore satisfy the transmission conditions, ``phi`` the condition at -1
and ``chi`` the lam-dependent condition at 1.  The characteristic function
is ``D(lam) = W(phi, chi)(1)``; its zeros are the eigenvalues.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .integrate import (
    DEFAULT_ATOL,
    DEFAULT_RTOL,
    Trajectory,
    integrate_ivp_w,
    propagate,
    propagate_complex,
)
from .problem import ValidatedProblem

__all__ = [
    "PiecewiseSolution",
    "WronskianValue",
    "BreakpointWithoutSide",
    "build_phi",
    "build_chi",
    "wronskian",
    "characteristic",
    "characteristic_many",
    "characteristic_complex",
    "chi_seed",
]


class BreakpointWithoutSide(ValueError):
    """A breakpoint was passed where a one-sided value is required."""


@dataclass(frozen=True)
class PiecewiseSolution:
    """A solution of the equation stored as one trajectory per piece.

    ``scale`` multiplies every returned value; normalized eigenfunctions are
    stored this way instead of rescaling the trajectories.
    """

    problem: ValidatedProblem
    lam: float
    kind: Literal["phi", "chi"]
    pieces: tuple[Trajectory, Trajectory, Trajectory]
    scale: float = 1.0

    def scaled(self, c: float) -> "PiecewiseSolution":
        return PiecewiseSolution(self.problem, self.lam, self.kind, self.pieces, self.scale * c)

    def state(self, x, piece: int):
        """``(u, w)`` on ``piece`` (``w = p u'``)."""
        u, w = self.pieces[piece].state(x)
        return self.scale * u, self.scale * w

    def u(self, x, piece: int):
        return self.state(x, piece)[0]

    def up(self, x, piece: int):
        u, w = self.state(x, piece)
        return w / self.problem.p(x, piece)

    def w(self, x, piece: int):
        return self.state(x, piece)[1]

    def __call__(self, x, side: str | None = None):
        """``u`` at points anywhere in ``[-1, 1]``; breakpoints need ``side``."""
        x = np.asarray(x, dtype=float)
        try:
            idx = self.problem.locate(x, side)
        except ValueError as err:
            raise BreakpointWithoutSide(str(err)) from None
        out = np.empty(x.shape)
        for i in range(3):
            m = idx == i
            if np.any(m):
                out[m] = self.u(x[m], i)
        return out if out.ndim else float(out)

    def derivative(self, x, side: str | None = None):
        x = np.asarray(x, dtype=float)
        try:
            idx = self.problem.locate(x, side)
        except ValueError as err:
            raise BreakpointWithoutSide(str(err)) from None
        out = np.empty(x.shape)
        for i in range(3):
            m = idx == i
            if np.any(m):
                out[m] = self.up(x[m], i)
        return out if out.ndim else float(out)

    def one_sided(self, k: int) -> tuple[tuple[float, float], tuple[float, float]]:
        """``((u, u') at h_k - 0, (u, u') at h_k + 0)`` for breakpoint ``k`` in {0, 1}."""
        h = (self.problem.h1, self.problem.h2)[k]
        left = (float(self.u(h, k)), float(self.up(h, k)))
        right = (float(self.u(h, k + 1)), float(self.up(h, k + 1)))
        return left, right


def _jump_right(problem: ValidatedProblem, k: int, u, w):
    """Carry ``(u, w)`` from ``h_k - 0`` to ``h_k + 0``."""
    g, d = problem.gamma, problem.delta
    up = w / problem.p_minus[k]
    return g[2 * k] / d[2 * k] * u, problem.p_plus[k] * (g[2 * k + 1] / d[2 * k + 1]) * up


def _jump_left(problem: ValidatedProblem, k: int, u, w):
    """Carry ``(u, w)`` from ``h_k + 0`` to ``h_k - 0``."""
    g, d = problem.gamma, problem.delta
    up = w / problem.p_plus[k]
    return d[2 * k] / g[2 * k] * u, problem.p_minus[k] * (d[2 * k + 1] / g[2 * k + 1]) * up


def chi_seed(problem: ValidatedProblem, lam):
    """``(u(1), u'(1))`` for ``chi``."""
    a1, a2 = problem.alpha
    b1, b2 = problem.beta
    return a2 * lam + b2, a1 * lam + b1


def build_phi(problem: ValidatedProblem, lam: float, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> PiecewiseSolution:
    (a0, b0), (a1, b1), (a2, b2) = problem.bounds
    t0 = integrate_ivp_w(problem, 0, lam, a0, b0, 0.0, float(problem.p(-1.0, 0)), rtol, atol)
    u, w = _jump_right(problem, 0, t0.us[-1], t0.ws[-1])
    t1 = integrate_ivp_w(problem, 1, lam, a1, b1, u, w, rtol, atol)
    u, w = _jump_right(problem, 1, t1.us[-1], t1.ws[-1])
    t2 = integrate_ivp_w(problem, 2, lam, a2, b2, u, w, rtol, atol)
    return PiecewiseSolution(problem, float(lam), "phi", (t0, t1, t2))


def build_chi(problem: ValidatedProblem, lam: float, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> PiecewiseSolution:
    (a0, b0), (a1, b1), (a2, b2) = problem.bounds
    u1, up1 = chi_seed(problem, lam)
    t2 = integrate_ivp_w(problem, 2, lam, b2, a2, u1, problem.p1 * up1, rtol, atol)
    u, w = _jump_left(problem, 1, t2.us[-1], t2.ws[-1])
    t1 = integrate_ivp_w(problem, 1, lam, b1, a1, u, w, rtol, atol)
    u, w = _jump_left(problem, 0, t1.us[-1], t1.ws[-1])
    t0 = integrate_ivp_w(problem, 0, lam, b0, a0, u, w, rtol, atol)
    return PiecewiseSolution(problem, float(lam), "chi", (t0, t1, t2))


@dataclass(frozen=True)
class WronskianValue:
    x: float
    piece: int
    value: float


def wronskian(phi: PiecewiseSolution, chi: PiecewiseSolution, x: float, side: str | None = None) -> WronskianValue:
    """``phi chi' - phi' chi`` at ``x`` on the piece containing it."""
    if phi.lam != chi.lam:
        raise ValueError("phi and chi were built for different lam")
    try:
        piece = int(phi.problem.locate(x, side))
    except ValueError as err:
        raise BreakpointWithoutSide(str(err)) from None
    u1, up1 = phi.u(x, piece), phi.up(x, piece)
    u2, up2 = chi.u(x, piece), chi.up(x, piece)
    return WronskianValue(float(x), piece, float(u1 * up2 - up1 * u2))


def _phi_at_one(problem: ValidatedProblem, lam, rtol, atol):
    (a0, b0), (a1, b1), (a2, b2) = problem.bounds
    lam = np.asarray(lam, dtype=float)
    u, w = propagate(problem, 0, lam, a0, b0, 0.0, float(problem.p(-1.0, 0)), rtol, atol)
    u, w = _jump_right(problem, 0, u, w)
    u, w = propagate(problem, 1, lam, a1, b1, u, w, rtol, atol)
    u, w = _jump_right(problem, 1, u, w)
    u, w = propagate(problem, 2, lam, a2, b2, u, w, rtol, atol)
    return u, w / problem.p1


def characteristic_many(problem: ValidatedProblem, lams, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> np.ndarray:
    """``D(lam)`` for an array of ``lam`` sharing one batched integration."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    u, up = _phi_at_one(problem, lams, rtol, atol)
    cu, cup = chi_seed(problem, lams)
    return u * cup - up * cu


def characteristic(problem: ValidatedProblem, lam: float, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> float:
    """``D(lam) = phi(1) chi'(1) - phi'(1) chi(1)``.

    ``chi`` enters only through its seed at ``x = 1``, so only ``phi`` is
    integrated.
    """
    return float(characteristic_many(problem, [lam], rtol, atol)[0])


def characteristic_complex(problem: ValidatedProblem, lam: complex, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> complex:
    """``D(lam)`` for complex ``lam`` via the doubled real system."""
    (a0, b0), (a1, b1), (a2, b2) = problem.bounds
    u, w = propagate_complex(problem, 0, lam, a0, b0, 0.0, complex(problem.p(-1.0, 0)), rtol, atol)
    u, w = _jump_right(problem, 0, u, w)
    u, w = propagate_complex(problem, 1, lam, a1, b1, u, w, rtol, atol)
    u, w = _jump_right(problem, 1, u, w)
    u, w = propagate_complex(problem, 2, lam, a2, b2, u, w, rtol, atol)
    up = w / problem.p1
    cu, cup = chi_seed(problem, lam)
    return u * cup - up * cu
