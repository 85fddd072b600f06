"""Brute-force reference computations used to check the closed forms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    """Per-coordinate search grid: ``points`` samples over ``[-|z_i| - pad, |z_i| + pad]``."""

    points: int = 2001
    pad: float = 1.0

    def __post_init__(self):
        if self.points < 2:
            raise ValueError("grid needs at least two points")
        if not self.pad > 0:
            raise ValueError("pad must be positive")

    def candidates(self, zi: float) -> np.ndarray:
        r = abs(zi) + self.pad
        return np.concatenate(([0.0, zi], np.linspace(-r, r, self.points)))


def _scalar_reg_value(regularizer, y: np.ndarray) -> np.ndarray:
    """Regularizer evaluated separately at each scalar in ``y``."""
    fast = getattr(regularizer, "value_elementwise", None)
    if fast is not None:
        return np.asarray(fast(y), dtype=float)
    return np.array([regularizer.value(np.array([t])) for t in y])


def prox_oracle(z, regularizer, lam: float, grid: GridSpec = GridSpec(),
                tie_rtol: float = 1e-12) -> np.ndarray:
    """Coordinatewise exhaustive minimization of ``g(y) + (y - z)^2 / (2 lam)``.

    Candidates are the grid plus ``{0, z_i}``. Zero wins whenever its
    objective is within ``tie_rtol`` (relative) of the best one, so ties that
    only differ by rounding go to zero.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.empty_like(z)
    for i, zi in enumerate(z):
        y = grid.candidates(zi)
        obj = _scalar_reg_value(regularizer, y) + (y - zi) ** 2 / (2.0 * lam)
        best = obj.min()
        if obj[0] <= best + tie_rtol * max(1.0, abs(best)):
            out[i] = 0.0
        else:
            out[i] = y[np.argmin(obj)]
    return out


def fd_gradient(fn: Callable[[np.ndarray], float], x, step: float = 1e-6) -> np.ndarray:
    """Central differences with per-coordinate step ``step * (1 + |x_i|)``."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    e = x.copy()
    for i in range(x.size):
        h = step * (1.0 + abs(x[i]))
        e[i] = x[i] + h
        fp = fn(e)
        e[i] = x[i] - h
        fm = fn(e)
        e[i] = x[i]
        g[i] = (fp - fm) / (2.0 * h)
    return g


def fd_hess_action(grad: Callable[[np.ndarray], np.ndarray], x, w, step: float = 1e-6) -> np.ndarray:
    """Central difference of ``grad`` along ``w``: ``(grad(x + h w) - grad(x - h w)) / 2h``."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    h = step * (1.0 + np.linalg.norm(x)) / max(np.linalg.norm(w), 1e-300)
    return (grad(x + h * w) - grad(x - h * w)) / (2.0 * h)


@dataclass(frozen=True)
class StationaryCheck:
    on_line: bool
    coordinate_point: bool

    def __bool__(self):
        return self.on_line


def stationary_set_check_2d(x, tol: float = 1e-6) -> StationaryCheck:
    """Membership test for the stationary line ``x1 + x2 = 1`` of the 2-D
    Student's-t example with ``A = [1, 1]``, ``b = 1``.

    Truthiness follows the line test; points on a coordinate axis are flagged
    separately since the l0 term admits further stationary configurations there.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (2,):
        raise ValueError("expected a point in R^2")
    on_line = abs(x[0] + x[1] - 1.0) <= tol
    axis = bool((x[0] == 0.0) != (x[1] == 0.0))
    return StationaryCheck(bool(on_line), axis)
