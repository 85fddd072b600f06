"""Generalized Newton directions.

Two routes to the same system:

* :func:`l0_newton_direction` restricts the Hessian to the support ``J`` of
  ``x_hat`` and solves ``H_JJ d_J = -v_hat_J`` with ``d = 0`` off ``J``.
* :func:`generic_newton_direction` solves
  ``(I - A + lam A H) d = -lam A v_hat`` for a Bouligand-Jacobian element
  ``A`` of the prox supplied by the regularizer.

A singular (numerically rank-deficient) system yields ``d = 0`` with status
``fallback_zero``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import LinearOperator as _SciOp, cg, gmres

SOLVED = "solved"
FALLBACK_ZERO = "fallback_zero"

DENSE_MAX = 512


class UnsupportedDirection(TypeError):
    pass


@dataclass
class NewtonDirectionOutcome:
    d: np.ndarray
    status: str
    residual: float
    support: np.ndarray

    @property
    def solved(self) -> bool:
        return self.status == SOLVED


def rank_revealing_solve(M: np.ndarray, rhs: np.ndarray, rcond: float = 1e-12):
    """Solve ``M y = rhs`` by QR with column pivoting.

    Returns ``(y, rank)``; ``y`` is only meaningful when ``rank`` equals the
    number of columns. Pivots below ``rcond * k * |R_00|`` count as zero.
    """
    k = M.shape[1]
    if k == 0:
        return np.zeros(0), 0
    Q, R, P = scipy.linalg.qr(M, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag[0] == 0.0 or not np.isfinite(diag[0]):
        return np.zeros(k), 0
    rank = int(np.count_nonzero(diag > rcond * k * diag[0]))
    if rank < k:
        return np.zeros(k), rank
    y = np.empty(k)
    y[P] = scipy.linalg.solve_triangular(R, Q.T @ rhs)
    return y, rank


def _fallback(n, J, residual=np.inf):
    return NewtonDirectionOutcome(np.zeros(n), FALLBACK_ZERO, float(residual), J)


def reduced_newton_direction(x_hat, v_hat, model, J, linsolve_tol: float = 1e-10,
                             dense_max: int = DENSE_MAX) -> NewtonDirectionOutcome:
    """Solve ``H_JJ d_J = -v_hat_J`` with ``H`` the Hessian of ``model`` at ``x_hat``."""
    x_hat = np.asarray(x_hat, dtype=float)
    v_hat = np.asarray(v_hat, dtype=float)
    if x_hat.shape != v_hat.shape:
        raise ValueError("x_hat and v_hat differ in shape")
    n = x_hat.size
    J = np.asarray(J, dtype=int)
    d = np.zeros(n)
    rhs = -v_hat[J]
    if J.size == 0 or not np.any(rhs):
        return NewtonDirectionOutcome(d, SOLVED, 0.0, J)
    bound = linsolve_tol * (1.0 + np.linalg.norm(v_hat))

    if J.size <= dense_max:
        H = model.hess_submatrix(x_hat, J)
        if not np.all(np.isfinite(H)):
            return _fallback(n, J)
        dJ, rank = rank_revealing_solve(H, rhs)
        if rank < J.size:
            return _fallback(n, J)
        residual = float(np.linalg.norm(H @ dJ - rhs))
    else:
        def masked(w):
            full = np.zeros(n)
            full[J] = w
            return model.hess_action(x_hat, full)[J]

        op = _SciOp((J.size, J.size), matvec=masked, dtype=float)
        dJ, info = cg(op, rhs, rtol=linsolve_tol, atol=0.0, maxiter=10 * J.size)
        residual = float(np.linalg.norm(masked(dJ) - rhs))

    if not np.all(np.isfinite(dJ)) or residual > bound:
        return _fallback(n, J, residual)
    d[J] = dJ
    return NewtonDirectionOutcome(d, SOLVED, residual, J)


def l0_newton_direction(x_hat, v_hat, model, linsolve_tol: float = 1e-10,
                        dense_max: int = DENSE_MAX) -> NewtonDirectionOutcome:
    """Support-reduced Newton direction for an l0-regularized problem.

    ``J`` is the set of exactly nonzero entries of ``x_hat``. Off ``J`` the
    direction is zero, which also settles the degenerate case
    ``x_hat_i = 0`` with a zero subgradient component.
    """
    J = np.flatnonzero(np.asarray(x_hat))
    return reduced_newton_direction(x_hat, v_hat, model, J, linsolve_tol, dense_max)


def generic_newton_direction(x_hat, v_hat, problem, lam: float,
                             linsolve_tol: float = 1e-10,
                             dense_max: int = DENSE_MAX) -> NewtonDirectionOutcome:
    """Newton direction from a prox Jacobian element at ``x_hat + lam (v_hat - grad f(x_hat))``."""
    jac = getattr(problem.g, "prox_jacobian", None)
    if jac is None:
        raise UnsupportedDirection("direction strategy unsupported: regularizer has no prox Jacobian")
    x_hat = np.asarray(x_hat, dtype=float)
    v_hat = np.asarray(v_hat, dtype=float)
    if x_hat.shape != v_hat.shape:
        raise ValueError("x_hat and v_hat differ in shape")
    n = x_hat.size
    f = problem.f
    z = x_hat + lam * (v_hat - f.grad(x_hat))
    a = np.asarray(jac(z, lam), dtype=float)
    rhs = -lam * a * v_hat
    support = np.flatnonzero(a)
    if not np.any(rhs):
        return NewtonDirectionOutcome(np.zeros(n), SOLVED, 0.0, support)
    bound = linsolve_tol * (1.0 + np.linalg.norm(v_hat))

    def apply(w):
        return w - a * w + lam * a * f.hess_action(x_hat, w)

    if n <= dense_max:
        H = f.hess_submatrix(x_hat, np.arange(n))
        M = np.eye(n) - np.diag(a) + lam * a[:, None] * H
        d, rank = rank_revealing_solve(M, rhs)
        if rank < n:
            return _fallback(n, support)
        residual = float(np.linalg.norm(M @ d - rhs))
    else:
        op = _SciOp((n, n), matvec=apply, dtype=float)
        d, info = gmres(op, rhs, rtol=linsolve_tol, atol=0.0, restart=min(n, 200),
                        maxiter=10 * n)
        residual = float(np.linalg.norm(apply(d) - rhs))
    if not np.all(np.isfinite(d)) or residual > bound:
        return _fallback(n, support, residual)
    return NewtonDirectionOutcome(d, SOLVED, residual, support)
