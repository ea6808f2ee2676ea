"""Finite-volume discretization of the whole problem as a matrix pencil.

Each piece carries ``M`` uniform cells.  The unknowns are the nodal values
(``u(-1) = 0`` removed, each breakpoint represented by its left limit, the
right limit being ``gamma/delta`` times it) plus the scalar ``z = (u)'_1``:
``3M + 1`` in all.  Every row is the flux balance over the control volume of
a node; at a breakpoint the two half cells are glued by the flux jump, at
``x = 1`` the boundary flux is eliminated through ``z``, and the last row is
``-(u)_1 = lam z`` scaled by ``p(1)/rho``.  With that scaling ``B`` is
diagonal and, when the transmission data make the operator self-adjoint,
``A`` is symmetric.  The scheme is second order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .problem import ValidatedProblem, symmetry_condition_check

__all__ = [
    "DiscreteOperator",
    "EigSolveFailure",
    "LengthMismatch",
    "SpectrumComparison",
    "discretize",
    "oracle_eigenvalues",
    "oracle_eigenpairs",
    "compare_spectra",
    "quadratic_profile",
]


class EigSolveFailure(RuntimeError):
    pass


class LengthMismatch(ValueError):
    pass


@dataclass(frozen=True)
class DiscreteOperator:
    M: int
    nodes: tuple[np.ndarray, np.ndarray, np.ndarray]
    A: np.ndarray
    B: np.ndarray  # diagonal weights, stored as a full matrix
    symmetric: bool
    mesh_width: float

    @property
    def dimension(self) -> int:
        return self.A.shape[0]

    def symmetry_residual(self) -> float:
        return float(np.max(np.abs(self.A - self.A.T)))


def discretize(problem: ValidatedProblem, M: int) -> DiscreteOperator:
    """Assemble ``A v = lam B v`` with ``M`` cells per piece (``M >= 8``)."""
    if M < 8:
        raise ValueError("M must be at least 8")
    a1, a2 = problem.alpha
    b1, b2 = problem.beta
    rho, p1 = problem.rho, problem.p1
    g, d = problem.gamma, problem.delta
    nodes = tuple(np.linspace(a, b, M + 1) for a, b in problem.bounds)
    widths = [(b - a) / M for a, b in problem.bounds]

    # Unknown index of node j of a piece.  Node 0 of piece 0 is u(-1) = 0;
    # node 0 of pieces 1, 2 is the right limit at a breakpoint, i.e. a
    # multiple of the left limit stored as node M of the previous piece.
    def slot(piece, j):
        if j == 0:
            if piece == 0:
                return None
            k = piece - 1
            return slot(k, M)[0], g[2 * k] / d[2 * k]
        return piece * M + j - 1, 1.0

    n = 3 * M + (1 if a2 != 0 else 0)
    A = np.zeros((n, n))
    Bd = np.zeros(n)

    def conductance(piece, j):
        """``p(mid) / h`` between nodes j and j+1 of ``piece``."""
        xm = 0.5 * (nodes[piece][j] + nodes[piece][j + 1])
        return float(problem.p(xm, piece)) / widths[piece]

    def half_cell(row, piece, j, toward, scale, value_factor):
        """Add the half cell of node j reaching toward node j+toward."""
        h = widths[piece]
        x = nodes[piece][j]
        c = conductance(piece, min(j, j + toward))
        A[row, row] += scale * value_factor * (c + float(problem.q(x, piece)) * h / 2)
        nb = slot(piece, j + toward)
        if nb is not None:
            A[row, nb[0]] -= scale * c * nb[1]
        Bd[row] += scale * value_factor * float(problem.r(x, piece)) * h / 2

    for piece in range(3):
        for j in range(1, M):
            row = slot(piece, j)[0]
            half_cell(row, piece, j, -1, 1.0, 1.0)
            half_cell(row, piece, j, +1, 1.0, 1.0)

    for k in range(2):
        # left half cell plus right half cell divided by the flux jump
        row = slot(k, M)[0]
        c = g[2 * k] / d[2 * k]
        flux_ratio = problem.p_plus[k] / problem.p_minus[k] * g[2 * k + 1] / d[2 * k + 1]
        half_cell(row, k, M, -1, 1.0, 1.0)
        half_cell(row, k + 1, 0, +1, 1.0 / flux_ratio, c)

    # boundary node x = 1, flux p(1) u'(1) eliminated through z
    last = slot(2, M)[0]
    if a2 != 0:
        z = n - 1
        half_cell(last, 2, M, -1, 1.0, 1.0)
        A[last, last] -= p1 * a1 / a2
        A[last, z] += p1 / a2
        A[z, last] += p1 / a2
        A[z, z] -= p1 * b2 / (rho * a2)
        Bd[z] += p1 / rho
    else:
        # u(1) = z / a1: the unknown at x = 1 is z itself, row scaled by 1/a1
        prev = slot(2, M - 1)[0]
        A[prev, last] /= a1
        half_cell(last, 2, M, -1, 1.0 / a1**2, 1.0)
        A[last, prev] *= a1
        A[last, last] -= p1 * b1 / (a1**2 * b2)
        Bd[last] += p1 / rho

    sym = symmetry_condition_check(problem).holds
    return DiscreteOperator(M, nodes, A, np.diag(Bd), sym, max(widths))


def _solve(op: DiscreteOperator, vectors: bool):
    try:
        if op.symmetric:
            if vectors:
                return scipy.linalg.eigh(op.A, op.B)
            return scipy.linalg.eigh(op.A, op.B, eigvals_only=True), None
        w, v = scipy.linalg.eig(op.A, op.B)
    except (np.linalg.LinAlgError, ValueError) as err:
        raise EigSolveFailure(str(err)) from None
    order = np.argsort(w.real)
    w, v = w[order], v[:, order]
    if np.max(np.abs(w.imag), initial=0.0) > 1e-8 * np.max(np.abs(w.real), initial=1.0):
        raise EigSolveFailure("nonsymmetric pencil has complex eigenvalues")
    return w.real, v.real


def oracle_eigenvalues(problem: ValidatedProblem, M: int, k: int) -> np.ndarray:
    """The ``k`` smallest eigenvalues of the discrete pencil, ascending."""
    op = discretize(problem, M)
    w, _ = _solve(op, vectors=False)
    if len(w) < k:
        raise EigSolveFailure(f"pencil has only {len(w)} eigenvalues")
    return np.sort(w)[:k]


def oracle_eigenpairs(problem: ValidatedProblem, M: int) -> tuple[np.ndarray, np.ndarray, DiscreteOperator]:
    op = discretize(problem, M)
    w, v = _solve(op, vectors=True)
    return w, v, op


def quadratic_profile(mesh_width: float, c: float = 5.0, floor: float = 1e-6) -> Callable[[int, float], float]:
    """Tolerance on ``|diff| / (1 + |lam|)`` growing like ``c h^2 |lam|``."""
    return lambda n, lam: c * mesh_width**2 * abs(lam) + floor


@dataclass(frozen=True)
class SpectrumComparison:
    differences: np.ndarray  # |a - b| / (1 + |a|)
    tolerances: np.ndarray

    @property
    def passed(self) -> bool:
        return bool(np.all(self.differences <= self.tolerances))

    @property
    def first_failure(self) -> int | None:
        bad = np.flatnonzero(self.differences > self.tolerances)
        return int(bad[0]) if len(bad) else None


def compare_spectra(
    shooting: Sequence[float],
    oracle: Sequence[float],
    tol_profile: Callable[[int, float], float] | None = None,
    k: int | None = None,
) -> SpectrumComparison:
    """Relative differences of the first ``k`` entries against a tolerance profile."""
    shooting = np.asarray(shooting, dtype=float)
    oracle = np.asarray(oracle, dtype=float)
    k = len(shooting) if k is None else k
    if len(oracle) < k or len(shooting) < k:
        raise LengthMismatch(f"need {k} values, got {len(shooting)} shooting and {len(oracle)} oracle")
    if tol_profile is None:
        tol_profile = lambda n, lam: 1e-6  # noqa: E731
    a, b = shooting[:k], oracle[:k]
    diff = np.abs(a - b) / (1.0 + np.abs(a))
    tols = np.array([tol_profile(n, lam) for n, lam in enumerate(a)])
    return SpectrumComparison(diff, tols)
