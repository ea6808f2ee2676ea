"""Closed-form CFG-A quantities evaluated with plain numpy/scipy."""

import numpy as np
from scipy.optimize import brentq


def cfg_a_secular(s):
    return np.sin(2 * s) / s + s**2 * np.cos(2 * s)


def cfg_a_negative_secular(t):
    return np.tanh(2 * t) - t**3


def cfg_a_eigenvalues(lam_max: float, points: int = 200_000) -> list[float]:
    """Eigenvalues of CFG-A below ``lam_max`` by sign scan plus Brent."""
    roots = [-brentq(cfg_a_negative_secular, 0.5, 1.5, xtol=1e-15) ** 2]
    s = np.linspace(1e-3, np.sqrt(lam_max), points)
    v = cfg_a_secular(s)
    for i in np.flatnonzero(v[:-1] * v[1:] < 0):
        roots.append(brentq(cfg_a_secular, s[i], s[i + 1], xtol=1e-15) ** 2)
    return roots
