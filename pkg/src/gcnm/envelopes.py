"""Moreau envelope, prox-gradient step and forward-backward envelope (FBE)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import CompositeProblem, check_finite


class TiePointWarning(RuntimeWarning):
    """The prox input sits on a set-valued point; the FBE may not be differentiable."""


@dataclass
class ProxGradResult:
    """Everything one forward-backward evaluation at ``x`` produces.

    Attributes
    ----------
    x_hat : ndarray
        ``Prox_{lam g}(x - lam grad f(x))``.
    v_hat : ndarray
        ``grad f(x_hat) - grad f(x) + (x - x_hat) / lam``.
    eta : float
        ``||x - x_hat||``.
    fbe : float
        Forward-backward envelope value at ``x``.
    """

    x: np.ndarray
    x_hat: np.ndarray
    v_hat: np.ndarray
    eta: float
    fbe: float
    z: np.ndarray
    grad_x: np.ndarray
    grad_x_hat: np.ndarray

    @property
    def v_norm(self) -> float:
        return float(np.linalg.norm(self.v_hat))


def moreau_envelope(z, regularizer, lam: float) -> float:
    """``g(p) + ||p - z||^2 / (2 lam)`` at ``p = Prox_{lam g}(z)``."""
    z = np.asarray(z, dtype=float)
    p = regularizer.prox(z, lam)
    diff = p - z
    return regularizer.value(p) + float(diff @ diff) / (2.0 * lam)


def fbe_value(x, x_hat, problem: CompositeProblem, lam: float, grad_x=None) -> float:
    """FBE at ``x`` from an already computed prox-gradient point ``x_hat``."""
    x = np.asarray(x, dtype=float)
    if grad_x is None:
        grad_x = problem.f.grad(x)
    diff = x_hat - x
    return (problem.f.value(x) + float(grad_x @ diff) + problem.g.value(x_hat)
            + float(diff @ diff) / (2.0 * lam))


def fbe_value_moreau(x, problem: CompositeProblem, lam: float) -> float:
    """FBE as ``f(x) - lam/2 ||grad f(x)||^2 + e_{lam g}(x - lam grad f(x))``.

    Independent of :func:`fbe_value`; kept as a cross-check.
    """
    x = np.asarray(x, dtype=float)
    gx = problem.f.grad(x)
    return (problem.f.value(x) - 0.5 * lam * float(gx @ gx)
            + moreau_envelope(x - lam * gx, problem.g, lam))


def prox_grad_step(x, problem: CompositeProblem, lam: float) -> ProxGradResult:
    x = check_finite(np.asarray(x, dtype=float))
    gx = problem.f.grad(x)
    z = x - lam * gx
    x_hat = problem.g.prox(z, lam)
    g_hat = problem.f.grad(x_hat)
    v_hat = g_hat - gx + (x - x_hat) / lam
    check_finite(v_hat, "v_hat")
    diff = x_hat - x
    fbe = (problem.f.value(x) + float(gx @ diff) + problem.g.value(x_hat)
           + float(diff @ diff) / (2.0 * lam))
    return ProxGradResult(x, x_hat, v_hat, float(np.linalg.norm(diff)), fbe,
                          z, gx, g_hat)


def prox_grad_map(x, problem: CompositeProblem, lam: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return problem.g.prox(x - lam * problem.f.grad(x), lam)


def normal_map(z, problem: CompositeProblem, lam: float) -> np.ndarray:
    """``grad f(p) + (z - p) / lam`` with ``p = Prox_{lam g}(z)``."""
    z = np.asarray(z, dtype=float)
    p = problem.g.prox(z, lam)
    return problem.f.grad(p) + (z - p) / lam


def is_tie_point(x, problem: CompositeProblem, lam: float, rtol: float = 1e-12) -> bool:
    x = np.asarray(x, dtype=float)
    return problem.g.near_tie(x - lam * problem.f.grad(x), lam, rtol)


def fbe_gradient(x, problem: CompositeProblem, lam: float) -> np.ndarray:
    """``(I - lam Hess f(x)) (x - x_hat) / lam``.

    Emits :class:`TiePointWarning` when the prox input is within ``1e-12``
    (relative) of a hard-threshold tie, where the formula is unreliable.
    """
    x = np.asarray(x, dtype=float)
    if is_tie_point(x, problem, lam):
        warnings.warn("prox input at a tie point; FBE gradient unreliable",
                      TiePointWarning, stacklevel=2)
    r = x - prox_grad_map(x, problem, lam)
    return (r - lam * problem.f.hess_action(x, r)) / lam


def sandwich_bounds(res: ProxGradResult, lam: float, L: float):
    """``((1/lam - L) eta, (1/lam + L) eta)``, which must bracket ``||v_hat||``."""
    return (1.0 / lam - L) * res.eta, (1.0 / lam + L) * res.eta
