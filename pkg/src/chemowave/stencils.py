"""Finite-difference stencils for tabulated fields on uniform grids.

Interior points use 4th-order central stencils so that derivative noise does
not mask the decay signal in second-derivative norms; boundary rows fall back
to one-sided 3rd-order formulas.
"""

from __future__ import annotations

import numpy as np

__all__ = ["deriv1", "deriv2"]


def deriv1(f: np.ndarray, dx: float) -> np.ndarray:
    """First derivative, 4th order interior / 3rd order one-sided edges."""
    f = np.asarray(f, dtype=float)
    n = f.size
    if n < 5:
        return np.gradient(f, dx)
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * dx)
    d[0] = (-11.0 * f[0] + 18.0 * f[1] - 9.0 * f[2] + 2.0 * f[3]) / (6.0 * dx)
    d[1] = (-2.0 * f[0] - 3.0 * f[1] + 6.0 * f[2] - f[3]) / (6.0 * dx)
    d[-2] = (2.0 * f[-1] + 3.0 * f[-2] - 6.0 * f[-3] + f[-4]) / (6.0 * dx)
    d[-1] = (11.0 * f[-1] - 18.0 * f[-2] + 9.0 * f[-3] - 2.0 * f[-4]) / (6.0 * dx)
    return d


def deriv2(f: np.ndarray, dx: float) -> np.ndarray:
    """Second derivative, 4th order interior / 3rd order one-sided edges."""
    f = np.asarray(f, dtype=float)
    n = f.size
    if n < 6:
        return np.gradient(np.gradient(f, dx), dx)
    d = np.empty_like(f)
    d[2:-2] = (
        -f[:-4] + 16.0 * f[1:-3] - 30.0 * f[2:-2] + 16.0 * f[3:-1] - f[4:]
    ) / (12.0 * dx * dx)
    d[0] = (
        35.0 * f[0] - 104.0 * f[1] + 114.0 * f[2] - 56.0 * f[3] + 11.0 * f[4]
    ) / (12.0 * dx * dx)
    d[1] = (
        11.0 * f[0] - 20.0 * f[1] + 6.0 * f[2] + 4.0 * f[3] - f[4]
    ) / (12.0 * dx * dx)
    d[-2] = (
        11.0 * f[-1] - 20.0 * f[-2] + 6.0 * f[-3] + 4.0 * f[-4] - f[-5]
    ) / (12.0 * dx * dx)
    d[-1] = (
        35.0 * f[-1] - 104.0 * f[-2] + 114.0 * f[-3] - 56.0 * f[-4] + 11.0 * f[-5]
    ) / (12.0 * dx * dx)
    return d
