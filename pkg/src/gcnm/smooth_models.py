"""Smooth losses: ridge least squares, Student's t log-loss, Gaussian deblurring."""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .core import LinearOperator


def _as_operator(A) -> LinearOperator:
    return A if isinstance(A, LinearOperator) else LinearOperator.from_dense(A)


def power_iteration(op: LinearOperator, tol: float = 1e-8, max_iter: int = 5000,
                    seed: int = 0):
    """Largest eigenvalue of ``A^T A`` by power iteration.

    Returns ``(estimate, converged)``. Convergence means the eigen-residual
    ``||A^T A v - rho v||`` dropped below ``tol * rho``.
    """
    n = op.shape[1]
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    rho = 0.0
    for _ in range(max_iter):
        w = op.apply_adjoint(op.apply(v))
        rho = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0, True
        if np.linalg.norm(w - rho * v) <= tol * max(rho, 1e-300):
            return rho, True
        v = w / nw
    return rho, False


class LeastSquaresRidge:
    """``f(x) = 0.5 ||Ax - b||^2 + mu2 ||x||^2``."""

    def __init__(self, A, b, mu2: float = 0.0, lipschitz: float | None = None):
        self.A = _as_operator(A)
        self.b = np.asarray(b, dtype=float)
        if self.b.shape != (self.A.shape[0],):
            raise ValueError("b must have one entry per row of A")
        if mu2 < 0:
            raise ValueError("mu2 must be nonnegative")
        self.mu2 = float(mu2)
        self.n = self.A.shape[1]
        self.lipschitz = ls_lipschitz(self) if lipschitz is None else float(lipschitz)

    def residual(self, x):
        return self.A.apply(x) - self.b

    def value(self, x) -> float:
        r = self.residual(x)
        return 0.5 * float(r @ r) + self.mu2 * float(x @ x)

    def grad(self, x):
        return self.A.apply_adjoint(self.residual(x)) + 2.0 * self.mu2 * x

    def grad_hess(self, x):
        return self.grad(x), lambda w: self.hess_action(x, w)

    def hess_action(self, x, w):
        return self.A.apply_adjoint(self.A.apply(w)) + 2.0 * self.mu2 * w

    def hess_submatrix(self, x, J):
        AJ = self.A.columns(J)
        return AJ.T @ AJ + 2.0 * self.mu2 * np.eye(len(J))


def ls_grad_hess(x, model: LeastSquaresRidge):
    return model.grad_hess(np.asarray(x, dtype=float))


def ls_lipschitz(model: LeastSquaresRidge) -> float:
    """``lambda_max(A^T A) + 2 mu2``, inflated by ``1e-6`` relative.

    Falls back to ``||A||_1 ||A||_inf + 2 mu2`` if power iteration stalls.
    """
    rho, ok = power_iteration(model.A)
    if not ok:
        return model.A.norm1() * model.A.norm_inf() + 2.0 * model.mu2
    return rho * (1.0 + 1e-6) + 2.0 * model.mu2


class StudentT:
    """``f(x) = sum_i log(1 + (Ax - b)_i^2 / nu)``."""

    def __init__(self, A, b, nu: float = 1.0):
        self.A = _as_operator(A)
        self.b = np.asarray(b, dtype=float)
        if self.b.shape != (self.A.shape[0],):
            raise ValueError("b must have one entry per row of A")
        if not nu > 0:
            raise ValueError("nu must be positive")
        self.nu = float(nu)
        self.n = self.A.shape[1]
        self.lipschitz = studentt_lipschitz(self)

    def residual(self, x):
        return self.A.apply(x) - self.b

    def value(self, x) -> float:
        r = self.residual(x)
        return float(np.sum(np.log1p(r * r / self.nu)))

    def _weights(self, x):
        r = self.residual(x)
        q = self.nu + r * r
        return r / q, (self.nu - r * r) / (q * q)

    def grad(self, x):
        u, _ = self._weights(x)
        return 2.0 * self.A.apply_adjoint(u)

    def hess_action(self, x, w):
        _, D = self._weights(x)
        return 2.0 * self.A.apply_adjoint(D * self.A.apply(w))

    def hess_submatrix(self, x, J):
        _, D = self._weights(x)
        AJ = self.A.columns(J)
        return 2.0 * AJ.T @ (D[:, None] * AJ)


def studentt_grad(x, model: StudentT):
    return model.grad(np.asarray(x, dtype=float))


def studentt_hess_action(x, w, model: StudentT):
    return model.hess_action(np.asarray(x, dtype=float), np.asarray(w, dtype=float))


def studentt_lipschitz(model: StudentT) -> float:
    # sup of |d/dr (r/(nu+r^2))| is 1/nu, attained at r = 0
    return 2.0 * model.A.norm1() * model.A.norm_inf() / model.nu


def gaussian_kernel(size: int, std: float) -> np.ndarray:
    """Normalized ``size x size`` Gaussian with standard deviation ``std``."""
    if size < 1 or size % 2 == 0:
        raise ValueError("kernel size must be a positive odd integer")
    if not std > 0:
        raise ValueError("std must be positive")
    h = size // 2
    t = np.arange(-h, h + 1, dtype=float)
    k = np.exp(-(t[:, None] ** 2 + t[None, :] ** 2) / (2.0 * std * std))
    return k / k.sum()


def blur_operator(kernel: np.ndarray, shape, padding: str = "zero") -> LinearOperator:
    """Same-size 2-D correlation with ``kernel`` on row-major vectorized images.

    Only zero padding is supported; the adjoint is correlation with the
    flipped kernel under the same padding.
    """
    kernel = np.asarray(kernel, dtype=float)
    if kernel.ndim != 2 or kernel.shape[0] % 2 == 0 or kernel.shape[1] % 2 == 0:
        raise ValueError("kernel must be 2-D with odd side lengths")
    if padding != "zero":
        raise ValueError(f"unsupported padding {padding!r}")
    h, w = int(shape[0]), int(shape[1])
    n = h * w
    flipped = kernel[::-1, ::-1].copy()

    def fwd(u):
        return ndimage.correlate(u.reshape(h, w), kernel, mode="constant").ravel()

    def adj(v):
        return ndimage.correlate(v.reshape(h, w), flipped, mode="constant").ravel()

    return LinearOperator((n, n), fwd, adj)


class BlurModel(LeastSquaresRidge):
    """Ridge least squares with a Gaussian blur as the forward operator.

    The Lipschitz bound ``1 + 2 mu2`` uses that a normalized nonnegative
    kernel under zero padding has row and column sums at most one.
    """

    def __init__(self, kernel, image_shape, b, mu2: float = 0.0):
        self.kernel = np.asarray(kernel, dtype=float)
        self.image_shape = (int(image_shape[0]), int(image_shape[1]))
        op = blur_operator(self.kernel, self.image_shape)
        super().__init__(op, b, mu2, lipschitz=1.0 + 2.0 * mu2)

