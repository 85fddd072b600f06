"""Proximal gradient, generalized line-search proximal gradient (GLPG),
pure coderivative Newton and globalized coderivative Newton (GCNM) solvers.

All four share one loop: a forward-backward step produces ``(x_hat, v_hat)``,
a direction ``d`` is chosen, and the next iterate is ``x_hat + tau d``. They
differ in how ``d`` and ``tau`` are picked.
"""

from __future__ import annotations

import enum
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Union

import numpy as np

from .core import CompositeProblem, IterationRecord, NonFiniteError, SolverConfig
from .directions import (FALLBACK_ZERO, SOLVED, NewtonDirectionOutcome,
                         generic_newton_direction, l0_newton_direction)
from .envelopes import ProxGradResult, prox_grad_step

log = logging.getLogger(__name__)

CONVERGED = "converged"
MAX_ITER = "max_iter"
ERROR = "error"


class DirectionStrategy(enum.Enum):
    ZERO = "zero"
    L0_NEWTON = "l0_newton"
    GENERIC_NEWTON = "generic_newton"
    NEWTON = "newton"  # whatever the regularizer's own hook provides


DirectionHook = Callable[[ProxGradResult, CompositeProblem, SolverConfig], NewtonDirectionOutcome]


@dataclass
class SolveTrace:
    records: List[IterationRecord]
    termination: str
    final_x: np.ndarray
    message: str = ""
    time: float = 0.0
    prox_evals: int = 0
    grad_evals: int = 0
    hess_actions: int = 0
    fallbacks: int = 0
    solver: str = ""

    @property
    def iterations(self) -> int:
        return len(self.records) - 1

    @property
    def final(self) -> IterationRecord:
        return self.records[-1]

    @property
    def converged(self) -> bool:
        return self.termination == CONVERGED


class _Counted:
    """Wraps a smooth model to count oracle calls for the trace totals."""

    def __init__(self, f):
        self._f = f
        self.grads = 0
        self.hess = 0

    def __getattr__(self, name):
        return getattr(self._f, name)

    def grad(self, x):
        self.grads += 1
        return self._f.grad(x)

    def hess_action(self, x, w):
        self.hess += 1
        return self._f.hess_action(x, w)

    def hess_submatrix(self, x, J):
        self.hess += 1
        return self._f.hess_submatrix(x, J)


def _direction(strategy, res: ProxGradResult, problem, config) -> NewtonDirectionOutcome:
    n = res.x.size
    if strategy is DirectionStrategy.ZERO:
        return NewtonDirectionOutcome(np.zeros(n), SOLVED, 0.0, np.flatnonzero(res.x_hat))
    if strategy is DirectionStrategy.L0_NEWTON:
        return l0_newton_direction(res.x_hat, res.v_hat, problem.f, config.linsolve_tol)
    if strategy is DirectionStrategy.GENERIC_NEWTON:
        return generic_newton_direction(res.x_hat, res.v_hat, problem, config.lam,
                                        config.linsolve_tol)
    if strategy is DirectionStrategy.NEWTON:
        hook = getattr(problem.g, "newton_direction", None)
        if hook is None:
            return generic_newton_direction(res.x_hat, res.v_hat, problem, config.lam,
                                            config.linsolve_tol)
        return hook(res.x_hat, res.v_hat, problem, config.lam, config.linsolve_tol)
    if callable(strategy):
        return strategy(res, problem, config)
    raise ValueError(f"unknown direction strategy {strategy!r}")


def _record(k, res: ProxGradResult, d, tau, backtracks, t0, status, keep):
    return IterationRecord(
        k=k,
        x=res.x.copy() if keep else None,
        x_hat=res.x_hat.copy() if keep else None,
        v_hat=res.v_hat.copy() if keep else None,
        d=None if d is None else (d.copy() if keep else None),
        tau=tau,
        fbe=res.fbe,
        eta=res.eta,
        v_norm=res.v_norm,
        backtracks=backtracks,
        elapsed=time.perf_counter() - t0,
        direction_status=status,
    )


def _run(problem: CompositeProblem, config: SolverConfig, x0, strategy,
         line_search: bool, name: str, keep_iterates: bool = True) -> SolveTrace:
    counted = _Counted(problem.f)
    prob = CompositeProblem(counted, problem.g, problem.name)
    lam, sigma, beta = config.lam, config.sigma, config.beta
    t0 = time.perf_counter()
    records: List[IterationRecord] = []
    prox_evals = 0
    fallbacks = 0
    x = np.array(x0, dtype=float)
    termination, message = MAX_ITER, ""
    res = None

    try:
        res = prox_grad_step(x, prob, lam)
        prox_evals += 1
        for k in range(config.max_iter + 1):
            if res.eta <= config.tol:
                records.append(_record(k, res, None, None, 0, t0, None, keep_iterates))
                termination = CONVERGED
                break
            if k == config.max_iter:
                records.append(_record(k, res, None, None, 0, t0, None, keep_iterates))
                break

            out = _direction(strategy, res, prob, config)
            d = out.d
            if out.status == FALLBACK_ZERO:
                fallbacks += 1
                if not line_search and np.any(res.v_hat):
                    records.append(_record(k, res, d, None, 0, t0, out.status, keep_iterates))
                    termination, message = ERROR, "Newton step unavailable"
                    break

            if not line_search:
                nxt = prox_grad_step(res.x_hat + d, prob, lam)
                prox_evals += 1
                records.append(_record(k, res, d, 1.0, 0, t0, out.status, keep_iterates))
                res = nxt
                continue

            target = res.fbe - sigma * res.v_norm ** 2
            tau, backtracks = 1.0, 0
            nxt = None
            if np.any(d):
                while True:
                    trial = prox_grad_step(res.x_hat + tau * d, prob, lam)
                    prox_evals += 1
                    if trial.fbe <= target:
                        nxt = trial
                        break
                    if backtracks >= config.max_backtracks:
                        break
                    tau *= beta
                    backtracks += 1
            if nxt is None:
                # x_hat itself satisfies the descent test strictly
                nxt = prox_grad_step(res.x_hat, prob, lam)
                prox_evals += 1
                tau = 0.0 if np.any(d) else 1.0
            records.append(_record(k, res, d, tau, backtracks, t0, out.status, keep_iterates))
            res = nxt
    except NonFiniteError as exc:
        termination, message = ERROR, str(exc)
        if not records:
            records.append(IterationRecord(0, x, None, None, None, None, np.nan, np.nan,
                                           np.nan, 0, time.perf_counter() - t0))

    final_x = x if res is None else res.x
    trace = SolveTrace(records, termination, np.array(final_x), message,
                       time.perf_counter() - t0, prox_evals, counted.grads,
                       counted.hess, fallbacks, name)
    log.debug("%s: %s after %d iterations", name, termination, trace.iterations)
    return trace


def solve_glpg(problem: CompositeProblem, config: SolverConfig, x0,
               strategy: Union[DirectionStrategy, DirectionHook] = DirectionStrategy.ZERO,
               keep_iterates: bool = True) -> SolveTrace:
    """Generalized line-search proximal gradient method.

    Each step backtracks ``tau = 1, beta, beta^2, ...`` on the forward-backward
    envelope until ``fbe(x_hat + tau d) <= fbe(x) - sigma ||v_hat||^2``. After
    ``max_backtracks`` reductions it takes ``x_hat`` itself (recorded as
    ``tau = 0``), which always passes the test.
    """
    return _run(problem, config, x0, strategy, True, "glpg", keep_iterates)


def solve_gcnm(problem: CompositeProblem, config: SolverConfig, x0,
               keep_iterates: bool = True) -> SolveTrace:
    """Globalized coderivative-based Newton method: GLPG with Newton directions."""
    return _run(problem, config, x0, DirectionStrategy.NEWTON, True, "gcnm", keep_iterates)


def solve_pgm(problem: CompositeProblem, config: SolverConfig, x0,
              keep_iterates: bool = True) -> SolveTrace:
    """Plain proximal gradient ``x <- Prox_{lam g}(x - lam grad f(x))``.

    Coded without the line-search machinery so it can serve as a reference.
    """
    counted = _Counted(problem.f)
    prob = CompositeProblem(counted, problem.g, problem.name)
    lam = config.lam
    t0 = time.perf_counter()
    records = []
    termination, message = MAX_ITER, ""
    res = None
    try:
        res = prox_grad_step(np.array(x0, dtype=float), prob, lam)
        for k in range(config.max_iter + 1):
            done = res.eta <= config.tol
            last = done or k == config.max_iter
            records.append(_record(k, res, None if last else np.zeros_like(res.x),
                                   None if last else 1.0, 0, t0,
                                   None if last else SOLVED, keep_iterates))
            if done:
                termination = CONVERGED
                break
            if last:
                break
            res = prox_grad_step(res.x_hat, prob, lam)
    except NonFiniteError as exc:
        termination, message = ERROR, str(exc)
    final_x = np.array(x0, dtype=float) if res is None else res.x
    if not records:
        records.append(IterationRecord(0, final_x, None, None, None, None, np.nan, np.nan,
                                       np.nan, 0, time.perf_counter() - t0))
    return SolveTrace(records, termination, np.array(final_x), message,
                      time.perf_counter() - t0, len(records), counted.grads, 0, 0, "pgm")


def solve_pure_newton(problem: CompositeProblem, config: SolverConfig, x0,
                      keep_iterates: bool = True) -> SolveTrace:
    """Local coderivative Newton iteration ``x <- x_hat + d`` without line search.

    Only meaningful from a starting point close to a solution. A missing
    Newton direction ends the run with ``termination = "error"``.
    """
    return _run(problem, config, x0, DirectionStrategy.NEWTON, False, "newton", keep_iterates)


@dataclass
class CriticalityReport:
    eta: float
    v_norm: float
    normal_map_norm: float
    bound_ok: bool


def criticality_report(x, problem: CompositeProblem, lam: float) -> CriticalityReport:
    """Distance to the prox-gradient point and the normal-map residual at ``x``.

    ``v_hat`` is the normal map evaluated at ``x - lam grad f(x)``, so the two
    norms coincide; ``bound_ok`` checks ``||v_hat|| <= (1/lam + L_f) eta``.
    """
    from .envelopes import normal_map

    res = prox_grad_step(x, problem, lam)
    nm = normal_map(res.z, problem, lam)
    L = problem.lipschitz
    ok = res.v_norm <= (1.0 / lam + L) * res.eta * (1 + 1e-12) + 1e-15
    return CriticalityReport(res.eta, res.v_norm, float(np.linalg.norm(nm)), bool(ok))


SOLVERS = {
    "pgm": solve_pgm,
    "glpg": solve_glpg,
    "gcnm": solve_gcnm,
    "newton": solve_pure_newton,
}
