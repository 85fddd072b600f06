"""Shipped regularizers: the scaled l0-norm and the zero function."""

from __future__ import annotations

import math

import numpy as np

TIE_ZERO = "zero"
TIE_KEEP = "keep"


def l0_value(x, mu0: float) -> float:
    """``mu0`` times the number of stored entries that are not exactly zero."""
    return float(mu0) * float(np.count_nonzero(np.asarray(x)))


def hard_threshold(lam: float, mu0: float) -> float:
    return math.sqrt(2.0 * lam * mu0)


def l0_prox(z, lam: float, mu0: float, tie_policy: str = TIE_ZERO) -> np.ndarray:
    """Hard thresholding at ``sqrt(2 lam mu0)``.

    Entries with ``|z_i|`` equal to the threshold are set to zero under
    ``tie_policy="zero"`` and kept under ``"keep"``; both are minimizers.
    """
    z = np.asarray(z, dtype=float)
    return np.where(l0_prox_jacobian(z, lam, mu0, tie_policy) > 0, z, 0.0)


def l0_prox_jacobian(z, lam: float, mu0: float, tie_policy: str = TIE_ZERO) -> np.ndarray:
    """Diagonal of a Bouligand-Jacobian element of the l0 prox at ``z``.

    Returned as a 0/1 float vector; the full element is ``np.diag`` of it.
    """
    z = np.asarray(z, dtype=float)
    t = hard_threshold(lam, mu0)
    a = np.abs(z)
    if tie_policy == TIE_ZERO:
        keep = a > t
    elif tie_policy == TIE_KEEP:
        keep = a >= t
    else:
        raise ValueError(f"unknown tie policy {tie_policy!r}")
    return keep.astype(float)


def l0_subdiff_member(x, v) -> bool:
    """Whether ``v`` lies in the limiting subdifferential of ``mu0 ||.||_0`` at ``x``.

    Off the support ``v_i`` is free; on it ``v_i`` must vanish. ``mu0`` plays
    no role.
    """
    x = np.asarray(x)
    v = np.asarray(v)
    return bool(np.all(v[x != 0] == 0))


class L0Norm:
    """``g(x) = mu0 * ||x||_0``.

    ``prox_bound`` is infinite: ``g >= 0`` so it is prox-bounded for every
    step size.
    """

    prox_bound = math.inf

    def __init__(self, mu0: float, tie_policy: str = TIE_ZERO):
        if not mu0 > 0:
            raise ValueError("mu0 must be positive")
        if tie_policy not in (TIE_ZERO, TIE_KEEP):
            raise ValueError(f"unknown tie policy {tie_policy!r}")
        self.mu0 = float(mu0)
        self.tie_policy = tie_policy

    def __repr__(self):
        return f"L0Norm(mu0={self.mu0!r}, tie_policy={self.tie_policy!r})"

    def value(self, x) -> float:
        return l0_value(x, self.mu0)

    def value_elementwise(self, x) -> np.ndarray:
        return self.mu0 * (np.asarray(x) != 0)

    def prox(self, z, lam: float) -> np.ndarray:
        return l0_prox(z, lam, self.mu0, self.tie_policy)

    def prox_jacobian(self, z, lam: float) -> np.ndarray:
        return l0_prox_jacobian(z, lam, self.mu0, self.tie_policy)

    def near_tie(self, z, lam: float, rtol: float = 1e-12) -> bool:
        t = hard_threshold(lam, self.mu0)
        return bool(np.any(np.abs(np.abs(np.asarray(z, dtype=float)) - t) <= rtol * (1.0 + t)))

    def subdiff_member(self, x, v) -> bool:
        return l0_subdiff_member(x, v)

    def support(self, x) -> np.ndarray:
        return np.flatnonzero(np.asarray(x))

    def newton_direction(self, x_hat, v_hat, problem, lam, linsolve_tol):
        from .directions import l0_newton_direction
        return l0_newton_direction(x_hat, v_hat, problem.f, linsolve_tol)


class ZeroReg:
    """``g = 0``; composite solvers then run on ``f`` alone."""

    prox_bound = math.inf

    def __repr__(self):
        return "ZeroReg()"

    def value(self, x) -> float:
        return 0.0

    def value_elementwise(self, x) -> np.ndarray:
        return np.zeros(np.shape(x))

    def prox(self, z, lam: float) -> np.ndarray:
        return np.array(z, dtype=float)

    def prox_jacobian(self, z, lam: float) -> np.ndarray:
        return np.ones(np.shape(z))

    def near_tie(self, z, lam: float, rtol: float = 1e-12) -> bool:
        return False

    def subdiff_member(self, x, v) -> bool:
        return bool(np.all(np.asarray(v) == 0))

    def support(self, x) -> np.ndarray:
        return np.arange(np.size(x))

    def newton_direction(self, x_hat, v_hat, problem, lam, linsolve_tol):
        from .directions import reduced_newton_direction
        return reduced_newton_direction(x_hat, v_hat, problem.f,
                                        np.arange(np.size(x_hat)), linsolve_tol)
