"""Problem contract, linear operators and solver configuration."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol, runtime_checkable

import numpy as np


class ConfigError(ValueError):
    """Raised when a solver parameter lies outside its admissible range."""


class NonFiniteError(FloatingPointError):
    """Raised when NaN or Inf reaches solver state."""


def check_finite(x: np.ndarray, name: str = "x") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NonFiniteError(f"non-finite entries in {name}")
    return x


class LinearOperator:
    """Matrix-free linear map ``R^n -> R^m`` with an adjoint.

    Parameters
    ----------
    shape : (int, int)
        ``(m, n)``.
    matvec, rmatvec : callable
        Forward and adjoint application on 1-D arrays.
    dense : ndarray, optional
        Explicit matrix, when one is cheap to keep around.
    """

    def __init__(self, shape, matvec: Callable, rmatvec: Callable,
                 dense: Optional[np.ndarray] = None):
        self.shape = (int(shape[0]), int(shape[1]))
        self._matvec = matvec
        self._rmatvec = rmatvec
        self._dense = dense

    @classmethod
    def from_dense(cls, A) -> "LinearOperator":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        return cls(A.shape, A.dot, A.T.dot, dense=A)

    @classmethod
    def identity(cls, n: int) -> "LinearOperator":
        return cls((n, n), lambda u: np.array(u, dtype=float),
                   lambda w: np.array(w, dtype=float))

    def apply(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.shape[1],):
            raise ValueError(f"operator expects length {self.shape[1]}, got {u.shape}")
        return self._matvec(u)

    def apply_adjoint(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.shape[0],):
            raise ValueError(f"adjoint expects length {self.shape[0]}, got {w.shape}")
        return self._rmatvec(w)

    __matmul__ = apply

    @property
    def T(self) -> "LinearOperator":
        dense = None if self._dense is None else self._dense.T
        return LinearOperator(self.shape[::-1], self._rmatvec, self._matvec, dense)

    @property
    def has_dense(self) -> bool:
        return self._dense is not None

    def to_dense(self) -> np.ndarray:
        """Explicit matrix; materialized column by column if not stored."""
        if self._dense is not None:
            return self._dense
        m, n = self.shape
        out = np.empty((m, n))
        e = np.zeros(n)
        for j in range(n):
            e[j] = 1.0
            out[:, j] = self._matvec(e)
            e[j] = 0.0
        return out

    def columns(self, J: np.ndarray) -> np.ndarray:
        """The ``m x |J|`` submatrix of the columns listed in ``J``."""
        if self._dense is not None:
            return self._dense[:, J]
        out = np.empty((self.shape[0], len(J)))
        e = np.zeros(self.shape[1])
        for c, j in enumerate(J):
            e[j] = 1.0
            out[:, c] = self._matvec(e)
            e[j] = 0.0
        return out

    def norm1(self) -> float:
        """Maximum absolute column sum."""
        M = self.to_dense()
        return float(np.abs(M).sum(axis=0).max()) if M.size else 0.0

    def norm_inf(self) -> float:
        """Maximum absolute row sum."""
        M = self.to_dense()
        return float(np.abs(M).sum(axis=1).max()) if M.size else 0.0


@dataclass
class AdjointReport:
    passed: bool
    max_defect: float
    probes: int
    tol: float


def validate_operator_adjoint(op: LinearOperator, probes: int = 10, seed=0,
                              tol: float = 1e-10) -> AdjointReport:
    """Check ``<Au, w> == <u, A^T w>`` on random unit probes.

    The defect is measured relative to ``max(1, |<Au, w>|)``.
    """
    if probes < 1:
        raise ValueError("probes must be >= 1")
    rng = np.random.default_rng(seed)
    m, n = op.shape
    worst = 0.0
    for _ in range(probes):
        u = rng.standard_normal(n)
        w = rng.standard_normal(m)
        u /= max(np.linalg.norm(u), 1e-300)
        w /= max(np.linalg.norm(w), 1e-300)
        lhs = float(np.dot(op.apply(u), w))
        rhs = float(np.dot(u, op.apply_adjoint(w)))
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    return AdjointReport(worst <= tol, worst, probes, tol)


@runtime_checkable
class SmoothModel(Protocol):
    """The smooth part ``f``; ``lipschitz`` bounds the modulus of its gradient."""

    lipschitz: float

    def value(self, x: np.ndarray) -> float: ...

    def grad(self, x: np.ndarray) -> np.ndarray: ...

    def hess_action(self, x: np.ndarray, w: np.ndarray) -> np.ndarray: ...

    def hess_submatrix(self, x: np.ndarray, J: np.ndarray) -> np.ndarray: ...

    def residual(self, x: np.ndarray) -> np.ndarray: ...


@runtime_checkable
class Regularizer(Protocol):
    """The nonsmooth part ``g``.

    ``near_tie`` reports whether the prox input is within ``rtol`` of a point
    where the prox is set-valued.
    """

    prox_bound: float

    def value(self, x: np.ndarray) -> float: ...

    def prox(self, z: np.ndarray, lam: float) -> np.ndarray: ...

    def subdiff_member(self, x: np.ndarray, v: np.ndarray) -> bool: ...

    def prox_jacobian(self, z: np.ndarray, lam: float) -> np.ndarray: ...

    def near_tie(self, z: np.ndarray, lam: float, rtol: float = 1e-12) -> bool: ...


@dataclass(frozen=True)
class CompositeProblem:
    """``minimize f(x) + g(x)``."""

    f: SmoothModel
    g: Regularizer
    name: str = ""

    @property
    def lipschitz(self) -> float:
        return float(self.f.lipschitz)

    @property
    def n(self) -> int:
        return int(self.f.n)

    def value(self, x: np.ndarray) -> float:
        return self.f.value(x) + self.g.value(x)


@dataclass(frozen=True)
class SolverConfig:
    lam: float
    sigma: float
    beta: float = 0.5
    tol: float = 1e-6
    max_iter: int = 1000
    max_backtracks: int = 50
    linsolve_tol: float = 1e-10
    lipschitz: float = field(default=math.nan, compare=False)

    def sigma_bound(self) -> float:
        return sigma_upper_bound(self.lam, self.lipschitz)


def sigma_upper_bound(lam: float, L: float) -> float:
    """Supremum of admissible line-search constants for step ``lam``."""
    t = lam * L
    return lam * (1.0 - t) / (2.0 * (1.0 + t) ** 2)


def make_config(problem: CompositeProblem, **overrides) -> SolverConfig:
    """Build a validated configuration for ``problem``.

    Defaults are ``lam = 0.99 / L_f`` (capped below the prox-boundedness
    threshold of ``g``), ``sigma`` at half its admissible supremum and
    ``beta = 0.5``. Unknown keys raise ``TypeError``.
    """
    L = problem.lipschitz
    if not (math.isfinite(L) and L > 0):
        raise ConfigError(f"problem needs a finite Lipschitz bound L_f > 0, got {L}")
    known = {f.name for f in dataclasses.fields(SolverConfig)} - {"lipschitz"}
    unknown = set(overrides) - known
    if unknown:
        raise TypeError(f"unknown config keys: {sorted(unknown)}")
    overrides = {k: v for k, v in overrides.items() if v is not None}

    lam_g = float(getattr(problem.g, "prox_bound", math.inf))
    lam_cap = min(1.0 / L, lam_g)
    lam = float(overrides.pop("lam", 0.99 * lam_cap))
    if not lam > 0:
        raise ConfigError(f"λ must be positive, got {lam}")
    if lam >= 1.0 / L:
        raise ConfigError(f"λ ≥ 1/L_f: λ={lam}, 1/L_f={1.0 / L}")
    if lam >= lam_g:
        raise ConfigError(f"λ ≥ λ_g: λ={lam}, λ_g={lam_g}")

    s_max = sigma_upper_bound(lam, L)
    sigma = float(overrides.pop("sigma", 0.5 * s_max))
    if not 0 < sigma < s_max:
        raise ConfigError(
            f"σ outside (0, λ(1−λL_f)/(2(1+λL_f)²)) = (0, {s_max:.6g}): σ={sigma}")

    beta = float(overrides.pop("beta", 0.5))
    if not 0 < beta < 1:
        raise ConfigError(f"β must lie in (0, 1), got {beta}")
    cfg = SolverConfig(lam=lam, sigma=sigma, beta=beta, lipschitz=L, **overrides)
    if not cfg.tol >= 0:
        raise ConfigError(f"tol must be nonnegative, got {cfg.tol}")
    if int(cfg.max_iter) < 1 or int(cfg.max_backtracks) < 1:
        raise ConfigError("max_iter and max_backtracks must be positive integers")
    if not cfg.linsolve_tol > 0:
        raise ConfigError("linsolve_tol must be positive")
    return cfg


@dataclass
class IterationRecord:
    """State of one outer iteration; ``d`` and ``tau`` are ``None`` on the final record."""

    k: int
    x: Optional[np.ndarray]
    x_hat: Optional[np.ndarray]
    v_hat: Optional[np.ndarray]
    d: Optional[np.ndarray]
    tau: Optional[float]
    fbe: float
    eta: float
    v_norm: float
    backtracks: int
    elapsed: float
    direction_status: Optional[str] = None
