"""Initial-value integration on a single piece.

The second-order equation is integrated in quasi-derivative form

    u' = w / p(x),    w' = (q(x) - lam r(x)) u,    w := p u',

with an embedded Dormand-Prince 8(5,3) pair and its 7th-order continuous
extension.  The stepper works on states of shape ``(n,)`` or ``(n, m)``; the
second form carries ``m`` independent copies (one per value of ``lam``) that
share a step size, which is how the eigenvalue scan evaluates the
characteristic function on a whole grid at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

from .expr import DomainError
from .problem import CoefficientError, ValidatedProblem

__all__ = [
    "StepFailure",
    "OutOfSpan",
    "Trajectory",
    "dop853",
    "integrate_ivp",
    "propagate",
    "sample",
    "DEFAULT_RTOL",
    "DEFAULT_ATOL",
]

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12

_NS = _dop.N_STAGES  # 12
_A = _dop.A[:_NS, :_NS]
_B = _dop.B
_C = _dop.C[:_NS]
_E3 = _dop.E3
_E5 = _dop.E5
_D = _dop.D
_A_EXTRA = _dop.A[_NS + 1 :]
_C_EXTRA = _dop.C[_NS + 1 :]

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_ERR_EXP = -1.0 / 8.0


class StepFailure(RuntimeError):
    """Step size underflow or step budget exhausted."""


class OutOfSpan(ValueError):
    """Dense output requested outside the integrated interval."""


@dataclass
class _Steps:
    xs: np.ndarray  # (N+1,) in integration order
    ys: np.ndarray  # (N+1, *state_shape)
    F: np.ndarray | None  # (N, 7, *state_shape) dense coefficients
    nfev: int


def _rms(a: np.ndarray) -> np.ndarray:
    # RMS over the component axis, one value per batch member
    return np.sqrt(np.mean(a * a, axis=0))


def _initial_step(fun, x0, y0, f0, direction, span, rtol, atol):
    scale = atol + rtol * np.abs(y0)
    d0 = np.max(_rms(y0 / scale))
    d1 = np.max(_rms(f0 / scale))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + direction * h0 * f0
    f1 = fun(x0 + direction * h0, y1)
    d2 = np.max(_rms((f1 - f0) / scale)) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    return min(100 * h0, h1, span)


def dop853(
    fun: Callable[[float, np.ndarray], np.ndarray],
    x0: float,
    x1: float,
    y0,
    *,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    dense: bool = False,
    max_steps: int = 500_000,
) -> _Steps:
    """Integrate ``y' = fun(x, y)`` from ``x0`` to ``x1`` (either direction).

    The error test takes the worst batch member, so all columns of a batched
    state meet the tolerance.  The last stored node is exactly ``x1``.
    """
    y = np.array(y0, dtype=float)
    if x1 == x0:
        raise ValueError("empty integration interval")
    direction = 1.0 if x1 > x0 else -1.0
    n = y.shape[0]
    K = np.empty((_NS + 4,) + y.shape)
    f = fun(x0, y)
    nfev = 1
    h = _initial_step(fun, x0, y, f, direction, abs(x1 - x0), rtol, atol)
    nfev += 1

    xs = [x0]
    ys = [y.copy()]
    Fs = []
    x = x0
    for _ in range(max_steps):
        remaining = abs(x1 - x)
        min_step = 10 * np.spacing(abs(x) + abs(x1))
        rejected = False
        while True:
            if h < min_step:
                raise StepFailure(f"step size underflow at x={x:.17g}")
            if h >= remaining or remaining - h < min_step:
                h_s = x1 - x
                x_new = x1
            else:
                h_s = direction * h
                x_new = x + h_s

            K[0] = f
            for s in range(1, _NS):
                dy = np.tensordot(_A[s, :s], K[:s], axes=1) * h_s
                K[s] = fun(x + _C[s] * h_s, y + dy)
            y_new = y + h_s * np.tensordot(_B, K[:_NS], axes=1)
            f_new = fun(x_new, y_new)
            K[_NS] = f_new
            nfev += _NS

            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err5 = np.tensordot(_E5, K[: _NS + 1], axes=1) / scale
            err3 = np.tensordot(_E3, K[: _NS + 1], axes=1) / scale
            e5 = np.sum(err5 * err5, axis=0)
            e3 = np.sum(err3 * err3, axis=0)
            denom = e5 + 0.01 * e3
            with np.errstate(invalid="ignore", divide="ignore"):
                member = np.where(denom > 0, abs(h_s) * e5 / np.sqrt(denom * n), 0.0)
            err = float(np.max(member))
            if not (np.isfinite(err) and np.all(np.isfinite(denom))):
                raise StepFailure(f"non-finite error estimate at x={x:.17g}")

            if err < 1.0:
                factor = _MAX_FACTOR if err == 0 else min(_MAX_FACTOR, _SAFETY * err**_ERR_EXP)
                if rejected:
                    factor = min(1.0, factor)
                break
            h = abs(h_s) * max(_MIN_FACTOR, _SAFETY * err**_ERR_EXP)
            rejected = True

        if dense:
            for s, (a, c) in enumerate(zip(_A_EXTRA, _C_EXTRA), start=_NS + 1):
                dy = np.tensordot(a[:s], K[:s], axes=1) * h_s
                K[s] = fun(x + c * h_s, y + dy)
            nfev += 3
            delta_y = y_new - y
            F = np.empty((7,) + y.shape)
            F[0] = delta_y
            F[1] = h_s * f - delta_y
            F[2] = 2 * delta_y - h_s * (f_new + f)
            F[3:] = h_s * np.tensordot(_D, K, axes=1)
            Fs.append(F)

        x, y, f = x_new, y_new, f_new
        xs.append(x)
        ys.append(y.copy())
        if x == x1:
            break
        h = abs(h_s) * factor
    else:
        raise StepFailure(f"more than {max_steps} steps")

    return _Steps(np.array(xs), np.array(ys), np.array(Fs) if dense else None, nfev)


def _coef(expr) -> Callable:
    if expr.is_constant:
        c = float(expr(0.0))
        return lambda x: c
    return expr


def piece_rhs(problem: ValidatedProblem, piece: int, lam) -> Callable:
    """Right-hand side of the quasi-derivative system on ``piece``.

    ``lam`` may be a scalar or an array of shape ``(m,)``; in the second case
    the state has shape ``(2, m)``.
    """
    p = _coef(problem.spec.p[piece])
    q = _coef(problem.spec.q[piece])
    r = _coef(problem.spec.r[piece])

    def fun(x, y):
        try:
            px, qx, rx = p(x), q(x), r(x)
        except DomainError as err:
            raise CoefficientError(f"piece {piece} at x={x:.17g}: {err}") from None
        return np.array([y[1] / px, (qx - lam * rx) * y[0]])

    return fun


def piece_rhs_complex(problem: ValidatedProblem, piece: int, lam: complex) -> Callable:
    """The same system for complex ``lam`` written as a doubled real system.

    State rows: ``Re u, Im u, Re w, Im w``.
    """
    p = _coef(problem.spec.p[piece])
    q = _coef(problem.spec.q[piece])
    r = _coef(problem.spec.r[piece])
    lr, li = np.real(lam), np.imag(lam)

    def fun(x, y):
        try:
            px, qx, rx = p(x), q(x), r(x)
        except DomainError as err:
            raise CoefficientError(f"piece {piece} at x={x:.17g}: {err}") from None
        a = qx - lr * rx
        b = li * rx
        return np.array([y[2] / px, y[3] / px, a * y[0] + b * y[1], a * y[1] - b * y[0]])

    return fun


def _solve(fun, x0, x1, y0, **kw) -> _Steps:
    try:
        return dop853(fun, x0, x1, y0, **kw)
    except DomainError as err:
        raise CoefficientError(f"coefficient evaluation failed: {err}") from None


def _check_span(problem: ValidatedProblem, piece: int, x_start: float, x_end: float):
    a, b = problem.bounds[piece]
    for v in (x_start, x_end):
        if not a <= v <= b:
            raise ValueError(f"x={v} outside piece {piece} = [{a}, {b}]")
    if x_start == x_end:
        raise ValueError("x_start == x_end")


def propagate(
    problem: ValidatedProblem,
    piece: int,
    lam,
    x_start: float,
    x_end: float,
    u0,
    w0,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
):
    """End state ``(u, w)`` only; ``lam``, ``u0``, ``w0`` may be arrays."""
    _check_span(problem, piece, x_start, x_end)
    lam = np.asarray(lam, dtype=float)
    y0 = np.array(np.broadcast_arrays(u0, w0, lam)[:2], dtype=float)
    steps = _solve(piece_rhs(problem, piece, lam), x_start, x_end, y0, rtol=rtol, atol=atol)
    return steps.ys[-1, 0], steps.ys[-1, 1]


def propagate_complex(problem, piece, lam: complex, x_start, x_end, u0: complex, w0: complex,
                      rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL):
    _check_span(problem, piece, x_start, x_end)
    y0 = np.array([np.real(u0), np.imag(u0), np.real(w0), np.imag(w0)], dtype=float)
    steps = _solve(piece_rhs_complex(problem, piece, lam), x_start, x_end, y0, rtol=rtol, atol=atol)
    yr = steps.ys[-1]
    return complex(yr[0], yr[1]), complex(yr[2], yr[3])


class Trajectory:
    """Dense solution of the quasi-derivative system on one piece.

    Attributes
    ----------
    piece : int
    lam : float
    xs : ndarray
        Step nodes in integration order; ``xs[0] == x_start``, ``xs[-1] == x_end``.
    us, ws : ndarray
        ``u`` and ``w = p u'`` at the nodes.
    """

    def __init__(self, problem: ValidatedProblem, piece: int, lam: float, steps: _Steps):
        self.problem = problem
        self.piece = piece
        self.lam = lam
        self.xs = steps.xs
        self.us = steps.ys[:, 0]
        self.ws = steps.ys[:, 1]
        self._F = steps.F
        self.nfev = steps.nfev
        self.direction = 1.0 if self.xs[-1] > self.xs[0] else -1.0
        self.span = (min(self.xs[0], self.xs[-1]), max(self.xs[0], self.xs[-1]))

    @property
    def x_start(self) -> float:
        return float(self.xs[0])

    @property
    def x_end(self) -> float:
        return float(self.xs[-1])

    def state(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Dense output ``(u, w)`` at ``x`` (scalar or array)."""
        scalar = np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo, hi = self.span
        tol = 1e-13 * max(1.0, abs(lo), abs(hi))
        if np.any((x < lo - tol) | (x > hi + tol)):
            raise OutOfSpan(f"x outside [{lo}, {hi}]")
        x = np.clip(x, lo, hi)
        d = self.direction
        nsteps = len(self.xs) - 1
        idx = np.searchsorted(d * self.xs, d * x, side="right") - 1
        at_end = idx >= nsteps
        idx = np.clip(idx, 0, nsteps - 1)
        h = self.xs[idx + 1] - self.xs[idx]
        theta = (x - self.xs[idx]) / h
        Fj = self._F[idx]  # (m, 7, 2)
        y = np.zeros((len(x), 2))
        th = theta[:, None]
        for i in range(7):
            y += Fj[:, 6 - i]
            y *= th if i % 2 == 0 else (1 - th)
        y[:, 0] += self.us[idx]
        y[:, 1] += self.ws[idx]
        y[at_end, 0] = self.us[-1]
        y[at_end, 1] = self.ws[-1]
        u, w = y[:, 0], y[:, 1]
        if scalar:
            return u[0], w[0]
        return u, w

    def __call__(self, x):
        """``(u, u')`` at ``x``."""
        u, w = self.state(x)
        return u, w / self.problem.p(x, self.piece)


def integrate_ivp(
    problem: ValidatedProblem,
    piece: int,
    lam: float,
    x_start: float,
    x_end: float,
    u0: float,
    up0: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> Trajectory:
    """Solve on one piece from ``x_start`` with ``u = u0``, ``u' = up0``."""
    _check_span(problem, piece, x_start, x_end)
    try:
        w0 = float(problem.p(x_start, piece)) * up0
    except DomainError as err:
        raise CoefficientError(str(err)) from None
    return integrate_ivp_w(problem, piece, lam, x_start, x_end, u0, w0, rtol, atol)


def integrate_ivp_w(problem, piece, lam, x_start, x_end, u0, w0, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> Trajectory:
    """As :func:`integrate_ivp` but seeded with the flux ``w0 = p u'``."""
    _check_span(problem, piece, x_start, x_end)
    steps = _solve(
        piece_rhs(problem, piece, float(lam)), x_start, x_end, np.array([u0, w0], dtype=float),
        rtol=rtol, atol=atol, dense=True,
    )
    return Trajectory(problem, piece, float(lam), steps)


def sample(traj: Trajectory, x):
    """``(u, u')`` from the dense output of ``traj``."""
    return traj(x)
