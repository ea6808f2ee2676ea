"""Expansions in the normalized eigenelements and the identities they imply.

For ``T = (f, s)`` the coefficients are ``c_n = <T, Phi_n>`` and the partial
sums ``S_N = sum_{n<=N} c_n Phi_n``.  Expanding ``(0, 1)`` gives

* ``sum [(phi_n)'_1]^2 = rho / p(1)`` (scalar slot),
* ``sum (phi_n)'_1 phi_n(x) = 0`` in the mean-square sense (function slot),

and expanding ``(f, 0)`` gives ``sum (int f phi_n r) (phi_n)'_1 = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .hilbert import HilbertElement, h_norm, inner_product, integrate_pieces, linear_combination
from .problem import ValidatedProblem
from .spectrum import Eigenpair

__all__ = [
    "ExpansionResult",
    "ScalarSeries",
    "MeanSquare",
    "FunctionExpansion",
    "fourier_coefficients",
    "partial_sum",
    "expand",
    "weighted_l2",
    "boundary_scalar_series",
    "boundary_function_series",
    "expand_function_part",
    "boundary_coefficient_sum",
]


def _as_element(T) -> HilbertElement:
    if isinstance(T, HilbertElement):
        return T
    return HilbertElement.from_function(T, 0.0)


def fourier_coefficients(problem: ValidatedProblem, eigenpairs: Sequence[Eigenpair], T: HilbertElement) -> np.ndarray:
    """``c_n = <T, Phi_n>`` for every eigenpair."""
    return np.array([inner_product(problem, T, ep.element) for ep in eigenpairs])


def partial_sum(eigenpairs: Sequence[Eigenpair], coefficients: Sequence[float], N: int) -> HilbertElement:
    if N > len(eigenpairs) or N > len(coefficients):
        raise ValueError(f"N={N} exceeds the {min(len(eigenpairs), len(coefficients))} available terms")
    return linear_combination(coefficients[:N], [ep.element for ep in eigenpairs[:N]])


@dataclass(frozen=True)
class ExpansionResult:
    coefficients: np.ndarray
    partial: HilbertElement
    residual_norm: float

    @property
    def bessel_sum(self) -> float:
        return float(np.sum(self.coefficients**2))


def expand(problem: ValidatedProblem, eigenpairs: Sequence[Eigenpair], T: HilbertElement, N: int | None = None) -> ExpansionResult:
    """Coefficients, the ``N``-term partial sum and ``||T - S_N||``."""
    N = len(eigenpairs) if N is None else N
    c = fourier_coefficients(problem, eigenpairs[:N], T)
    S = partial_sum(eigenpairs, c, N)
    return ExpansionResult(c, S, h_norm(problem, T - S))


def weighted_l2(problem: ValidatedProblem, f: Callable[[np.ndarray, int], np.ndarray]) -> float:
    """``(int f^2 r dx)^(1/2)`` over the three pieces."""
    return float(np.sqrt(integrate_pieces(problem, lambda x, i: f(x, i) ** 2 * problem.r(x, i))))


@dataclass(frozen=True)
class ScalarSeries:
    partial: float
    target: float
    partial_sums: np.ndarray  # running sums for N = 1, 2, ...

    @property
    def gap(self) -> float:
        return self.target - self.partial


def boundary_scalar_series(problem: ValidatedProblem, eigenpairs: Sequence[Eigenpair], N: int | None = None) -> ScalarSeries:
    """Running sums of ``[(phi_n)'_1]^2`` against ``rho / p(1)``."""
    N = len(eigenpairs) if N is None else N
    if N > len(eigenpairs):
        raise ValueError(f"N={N} exceeds the {len(eigenpairs)} eigenpairs")
    squares = np.array([ep.boundary_scalar**2 for ep in eigenpairs[:N]])
    sums = np.cumsum(squares)
    return ScalarSeries(float(sums[-1]) if N else 0.0, problem.rho / problem.p1, sums)


@dataclass(frozen=True)
class MeanSquare:
    sup_abs: float
    l2_norm: float


def boundary_function_series(
    problem: ValidatedProblem,
    eigenpairs: Sequence[Eigenpair],
    N: int,
    x_grid: np.ndarray | None = None,
) -> MeanSquare:
    """Size of ``sum_{n<=N} (phi_n)'_1 phi_n``: grid sup and r-weighted L2 norm.

    ``x_grid`` must avoid the breakpoints; by default it is 1001 points
    that do.
    """
    if N > len(eigenpairs):
        raise ValueError(f"N={N} exceeds the {len(eigenpairs)} eigenpairs")
    if N == 0:
        return MeanSquare(0.0, 0.0)
    terms = eigenpairs[:N]
    series = linear_combination([ep.boundary_scalar for ep in terms], [ep.element for ep in terms])
    if x_grid is None:
        x_grid = np.linspace(-1.0, 1.0, 1001)
        x_grid = x_grid[(x_grid != problem.h1) & (x_grid != problem.h2)]
    sup = float(np.max(np.abs(series.values(problem, x_grid))))
    return MeanSquare(sup, weighted_l2(problem, series.f))


@dataclass(frozen=True)
class FunctionExpansion:
    coefficients: np.ndarray
    x: np.ndarray
    samples: np.ndarray
    l2_error: float


def expand_function_part(
    problem: ValidatedProblem,
    eigenpairs: Sequence[Eigenpair],
    f,
    N: int,
    x: np.ndarray | None = None,
) -> FunctionExpansion:
    """Expand ``T = (f, 0)`` and measure the function part against ``f``.

    The coefficients are ``int f phi_n r dy``; ``l2_error`` is the
    r-weighted L2 distance between ``f`` and the ``N``-term function sum.
    """
    T = _as_element(f)
    terms = eigenpairs[:N]
    c = fourier_coefficients(problem, terms, T)
    S = partial_sum(eigenpairs, c, N)
    if x is None:
        x = np.linspace(-1.0, 1.0, 201)
        x = x[(x != problem.h1) & (x != problem.h2)]
    err = weighted_l2(problem, lambda y, i: T.f(y, i) - S.f(y, i))
    return FunctionExpansion(c, x, S.values(problem, x), err)


def boundary_coefficient_sum(problem: ValidatedProblem, eigenpairs: Sequence[Eigenpair], f, N: int) -> float:
    """``|sum_{n<=N} (int f phi_n r dy) (phi_n)'_1|``, which tends to 0."""
    T = _as_element(f)
    terms = eigenpairs[:N]
    c = fourier_coefficients(problem, terms, T)
    return float(abs(np.dot(c, [ep.boundary_scalar for ep in terms])))
