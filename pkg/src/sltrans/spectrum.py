"""Eigenvalues as sign changes of the characteristic function, refined by a
bracketing iteration, and eigenfunctions normalized in the weighted space."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .fundamental import (
    PiecewiseSolution,
    build_phi,
    characteristic,
    characteristic_complex,
    characteristic_many,
)
from .hilbert import HilbertElement, h_norm, inner_product
from .integrate import DEFAULT_ATOL, DEFAULT_RTOL, StepFailure
from .problem import CoefficientError, ValidatedProblem, boundary_forms

__all__ = [
    "BracketInvalid",
    "ZeroNorm",
    "ProbeRejected",
    "ScanResult",
    "Eigenpair",
    "ProbeReport",
    "scan_eigenvalues",
    "refine_eigenvalue",
    "refine_brackets",
    "normalize_eigenpair",
    "compute_eigenpairs",
    "reality_probe",
    "default_grid_points",
]

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
_CHUNK = 256


class BracketInvalid(ValueError):
    pass


class ZeroNorm(ArithmeticError):
    pass


class ProbeRejected(ValueError):
    pass


def default_grid_points(lambda_min: float, lambda_max: float) -> int:
    """2000 nodes per 100 units of lam, at least 2."""
    return max(2, int(np.ceil(20.0 * (lambda_max - lambda_min))) + 1)


@dataclass
class ScanResult:
    brackets: list[tuple[float, float]]
    nodes: np.ndarray
    values: np.ndarray  # D at the nodes, nan where skipped
    skipped: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.brackets)

    def __iter__(self):
        return iter(self.brackets)

    def __getitem__(self, i):
        return self.brackets[i]


def _eval_chunk(problem, lams, rtol, atol):
    try:
        return characteristic_many(problem, lams, rtol, atol)
    except (StepFailure, CoefficientError, FloatingPointError):
        if len(lams) == 1:
            return np.array([np.nan])
        out = np.empty(len(lams))
        for k, lam in enumerate(lams):
            try:
                out[k] = characteristic(problem, lam, rtol, atol)
            except (StepFailure, CoefficientError, FloatingPointError):
                out[k] = np.nan
        return out


def scan_eigenvalues(
    problem: ValidatedProblem,
    lambda_min: float,
    lambda_max: float,
    grid_points: int | None = None,
    jobs: int = 1,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> ScanResult:
    """Brackets ``[a, b]`` of consecutive grid nodes with ``D(a) D(b) < 0``.

    Nodes where ``D`` cannot be evaluated are skipped and listed in
    ``ScanResult.skipped``; the sign comparison then bridges over them.  A
    node where ``D`` is exactly zero yields the degenerate bracket ``[x, x]``.
    Two roots inside one cell cancel and are missed.
    """
    if not lambda_min < lambda_max:
        raise ValueError("need lambda_min < lambda_max")
    if grid_points is None:
        grid_points = default_grid_points(lambda_min, lambda_max)
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    nodes = np.linspace(lambda_min, lambda_max, grid_points)
    chunks = [nodes[i : i + _CHUNK] for i in range(0, len(nodes), _CHUNK)]
    if jobs > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(lambda c: _eval_chunk(problem, c, rtol, atol), chunks))
    else:
        parts = [_eval_chunk(problem, c, rtol, atol) for c in chunks]
    values = np.concatenate(parts)

    ok = np.isfinite(values)
    skipped = [float(v) for v in nodes[~ok]]
    if skipped:
        log.warning("D(lam) failed at %d grid nodes; skipped", len(skipped))
    xs, ds = nodes[ok], values[ok]
    brackets: list[tuple[float, float]] = []
    for k in range(len(xs)):
        if ds[k] == 0.0:
            brackets.append((float(xs[k]), float(xs[k])))
        elif k + 1 < len(xs) and ds[k] * ds[k + 1] < 0:
            brackets.append((float(xs[k]), float(xs[k + 1])))
    return ScanResult(brackets, nodes, values, skipped)


def refine_brackets(
    problem: ValidatedProblem,
    brackets: Sequence[tuple[float, float]],
    tol: float = DEFAULT_TOL,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    max_iter: int = 200,
) -> np.ndarray:
    """Refine many brackets at once (one batched ``D`` evaluation per sweep).

    Illinois-modified false position; a bracket that failed to halve over
    two sweeps takes a bisection step instead, so the width always goes to
    zero.  Iteration stops once the width is below
    ``max(tol, 4 eps |lam|)``; the result is the false-position point of the
    final bracket.
    """
    if len(brackets) == 0:
        return np.empty(0)
    br = np.array(brackets, dtype=float).reshape(-1, 2)
    a, b = br.min(axis=1), br.max(axis=1)
    degenerate = a == b
    fa = np.zeros_like(a)
    fb = np.zeros_like(b)
    nd = ~degenerate
    if np.any(nd):
        vals = characteristic_many(problem, np.concatenate([a[nd], b[nd]]), rtol, atol)
        k = int(np.sum(nd))
        fa[nd], fb[nd] = vals[:k], vals[k:]
        if np.any(fa[nd] * fb[nd] > 0):
            raise BracketInvalid("D has the same sign at both ends of a bracket")
    fa_m, fb_m = fa.copy(), fb.copy()
    side = np.zeros(len(a), dtype=int)  # -1: a replaced last, +1: b replaced last
    widths = [b - a, b - a]
    exact = degenerate | (fa == 0) | (fb == 0)
    root = np.where(fa == 0, a, np.where(fb == 0, b, 0.5 * (a + b)))

    def tol_eff():
        return np.maximum(tol, 4 * np.finfo(float).eps * np.maximum(abs(a), abs(b)))

    for _ in range(max_iter):
        active = ~exact & ((b - a) > tol_eff())
        if not np.any(active):
            break
        bisect = (b - a) > 0.5 * widths[-2]
        with np.errstate(invalid="ignore", divide="ignore"):
            c = (a * fb_m - b * fa_m) / (fb_m - fa_m)
        bad = ~np.isfinite(c) | (c <= a) | (c >= b) | bisect
        c = np.where(bad, 0.5 * (a + b), c)
        idx = np.flatnonzero(active)
        fc = characteristic_many(problem, c[idx], rtol, atol)
        for j, i in enumerate(idx):
            v = fc[j]
            if v == 0.0:
                exact[i] = True
                root[i] = c[i]
                continue
            if np.sign(v) == np.sign(fa[i]):
                a[i], fa[i], fa_m[i] = c[i], v, v
                if side[i] == -1:
                    fb_m[i] *= 0.5
                side[i] = -1
            else:
                b[i], fb[i], fb_m[i] = c[i], v, v
                if side[i] == 1:
                    fa_m[i] *= 0.5
                side[i] = 1
        widths = [widths[-1], b - a]
    else:
        log.warning("refinement hit max_iter=%d", max_iter)

    with np.errstate(invalid="ignore", divide="ignore"):
        fp = (a * fb - b * fa) / (fb - fa)
    fp = np.where(np.isfinite(fp) & (fp >= a) & (fp <= b), fp, 0.5 * (a + b))
    return np.where(exact, root, fp)


def refine_eigenvalue(
    problem: ValidatedProblem,
    bracket: tuple[float, float],
    tol: float = DEFAULT_TOL,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> float:
    """Refine a single bracket; a bracket already narrower than ``tol``
    returns its midpoint without evaluating ``D``."""
    a, b = sorted(map(float, bracket))
    if b - a <= tol:
        return 0.5 * (a + b)
    return float(refine_brackets(problem, [(a, b)], tol, rtol, atol)[0])


@dataclass(frozen=True)
class Eigenpair:
    """Eigenvalue with its normalized eigenelement ``(phi_n, (phi_n)'_1)``."""

    lambda_n: float
    phi: PiecewiseSolution
    boundary_scalar: float
    norm_check: float
    d_residual: float = float("nan")

    @property
    def element(self) -> HilbertElement:
        phi = self.phi
        return HilbertElement(phi.u, self.boundary_scalar, phi.up)

    def __call__(self, x, side: str | None = None):
        return self.phi(x, side)


def _sign_reference(phi: PiecewiseSolution, threshold: float = 1e-6) -> float:
    xs = np.linspace(-1.0, 1.0, 1001)
    vals = phi(xs[(xs != phi.problem.h1) & (xs != phi.problem.h2)])
    big = np.flatnonzero(np.abs(vals) > threshold)
    return float(np.sign(vals[big[0]])) if len(big) else 1.0


def normalize_eigenpair(
    problem: ValidatedProblem,
    lambda_n: float,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> Eigenpair:
    """Build ``phi`` at ``lambda_n`` and scale it to unit norm.

    The sign is fixed so that the eigenfunction is positive at the first
    point of a uniform 1001-point grid where it exceeds ``1e-6`` in size.
    """
    phi = build_phi(problem, lambda_n, rtol, atol)
    el = HilbertElement(phi.u, boundary_forms(problem, float(phi.u(1.0, 2)), float(phi.up(1.0, 2))).u1p_form, phi.up)
    c = h_norm(problem, el)
    if not np.isfinite(c) or c <= 1e-300:
        raise ZeroNorm(f"eigenfunction at lam={lambda_n} has zero norm")
    phi_n = phi.scaled(1.0 / c)
    phi_n = phi_n.scaled(_sign_reference(phi_n))
    scalar = boundary_forms(problem, float(phi_n.u(1.0, 2)), float(phi_n.up(1.0, 2))).u1p_form
    pair = Eigenpair(float(lambda_n), phi_n, scalar, 0.0)
    norm = h_norm(problem, pair.element)
    d = characteristic(problem, lambda_n, rtol, atol)
    return Eigenpair(float(lambda_n), phi_n, scalar, norm, d)


def compute_eigenpairs(
    problem: ValidatedProblem,
    lambda_min: float,
    lambda_max: float,
    grid_points: int | None = None,
    tol: float = DEFAULT_TOL,
    k: int | None = None,
    jobs: int = 1,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> list[Eigenpair]:
    """Scan, refine and normalize; the first ``k`` eigenpairs if ``k`` is given."""
    scan = scan_eigenvalues(problem, lambda_min, lambda_max, grid_points, jobs, rtol, atol)
    brackets = scan.brackets[:k] if k is not None else scan.brackets
    lams = np.sort(refine_brackets(problem, brackets, tol, rtol, atol))
    return [normalize_eigenpair(problem, lam, rtol, atol) for lam in lams]


@dataclass(frozen=True)
class ProbeReport:
    samples: tuple[complex, ...]
    values: tuple[complex, ...]

    @property
    def min_abs(self) -> float:
        return min((abs(v) for v in self.values), default=float("inf"))

    def __len__(self):
        return len(self.samples)


def reality_probe(problem: ValidatedProblem, samples: Sequence[complex], min_imag: float = 0.1) -> ProbeReport:
    """``D`` at complex ``lam`` away from the real axis; all values should be nonzero."""
    samples = tuple(complex(s) for s in samples)
    for s in samples:
        if abs(s.imag) < min_imag:
            raise ProbeRejected(f"sample {s} has |Im lam| < {min_imag}")
    return ProbeReport(samples, tuple(characteristic_complex(problem, s) for s in samples))
