"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` (lines are printed even under
output capture) or directly with ``python tests/test_acceptance.py``.
"""

import sys
import time

import numpy as np
import pytest

from gcnm import CompositeProblem, L0Norm, LeastSquaresRidge, StudentT, make_config
from gcnm.directions import generic_newton_direction, l0_newton_direction
from gcnm.envelopes import fbe_gradient, prox_grad_step
from gcnm.instances import InstanceSpec, gen_deblur, gen_l0l2, synthetic_image
from gcnm.oracles import fd_gradient, fd_hess_action, prox_oracle
from gcnm.regularizers import hard_threshold, l0_prox
from gcnm.solvers import solve_gcnm, solve_glpg, solve_pgm

DESK = [(100, 20), (200, 40)]
DESK_MU0 = [1e-2, 1e-3]
SEED = 7

_RUNS = []  # (label, trace, config, L_f, checks_descent) from every acceptance solve


def _log_run(label, trace, cfg, problem, descent):
    _RUNS.append((label, trace, cfg, problem.lipschitz, descent))
    return trace


def report(capsys, number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)
    assert ok, line


def rel_err(a, b):
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def student2d():
    return CompositeProblem(StudentT(np.array([[1.0, 1.0]]), np.array([1.0]), 1.0), L0Norm(0.1))


def desk_instance(n, m, mu0):
    return gen_l0l2(InstanceSpec("l0l2", n=n, m=m, mu0=mu0, mu2=1e-2, seed=SEED))


# ------------------------------------------------------------------ solver runs

_CACHE = {}


def runs_student2d():
    if "s2d" not in _CACHE:
        P = student2d()
        cfg = make_config(P, tol=1e-4, max_iter=500)
        out = {}
        for x0 in [(5.0, 5.0), (-5.0, 5.0)]:
            t0 = time.perf_counter()
            tr = solve_gcnm(P, cfg, np.array(x0))
            out[x0] = (_log_run(f"gcnm student2d {x0}", tr, cfg, P, True),
                       time.perf_counter() - t0)
        _CACHE["s2d"] = out
    return _CACHE["s2d"]


def runs_desk():
    if "desk" not in _CACHE:
        out = {}
        for n, m in DESK:
            for mu0 in DESK_MU0:
                P, x0 = desk_instance(n, m, mu0)
                cfg = make_config(P, tol=1e-6, max_iter=100_000)
                g = _log_run(f"gcnm l0l2 {n}x{m} mu0={mu0}", solve_gcnm(P, cfg, x0), cfg, P, True)
                p = _log_run(f"pgm l0l2 {n}x{m} mu0={mu0}", solve_pgm(P, cfg, x0), cfg, P, False)
                out[(n, m, mu0)] = (g, p)
        _CACHE["desk"] = out
    return _CACHE["desk"]


def runs_deblur():
    if "deblur" not in _CACHE:
        img = synthetic_image(64)
        t0 = time.perf_counter()
        P, x0 = gen_deblur(img, 9, 4.0, 1e-3, 1e-4, 5e-3, seed=SEED)
        cfg = make_config(P, tol=1e-2, max_iter=10_000)
        g = _log_run("gcnm deblur", solve_gcnm(P, cfg, x0), cfg, P, True)
        p = _log_run("pgm deblur", solve_pgm(P, cfg, x0), cfg, P, False)
        _CACHE["deblur"] = (g, p, x0, img.vector(), time.perf_counter() - t0)
    return _CACHE["deblur"]


def runs_pgm_reduction():
    if "pgm" not in _CACHE:
        P, x0 = desk_instance(100, 20, 1e-2)
        cfg = make_config(P, tol=0.0, max_iter=200)
        g = _log_run("glpg-zero l0l2 200 steps", solve_glpg(P, cfg, x0), cfg, P, True)
        p = _log_run("pgm l0l2 200 steps", solve_pgm(P, cfg, x0), cfg, P, False)
        _CACHE["pgm"] = (g, p)
    return _CACHE["pgm"]


def all_runs():
    runs_pgm_reduction()
    runs_student2d()
    runs_desk()
    runs_deblur()
    return _RUNS


# ------------------------------------------------------------------- criteria

def test_criterion_01_prox_matches_oracle(capsys):
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    mismatches = 0
    for i in range(1000):
        n = int(rng.integers(1, 6))
        lam, mu0 = rng.uniform(0.01, 2.0), rng.uniform(0.01, 2.0)
        z = rng.normal(scale=2.0, size=n)
        if i % 50 == 0:  # exercise the tie branch too
            z[0] = hard_threshold(lam, mu0)
        if not np.array_equal(l0_prox(z, lam, mu0), prox_oracle(z, L0Norm(mu0), lam)):
            mismatches += 1
    dt = time.perf_counter() - t0
    report(capsys, 1, mismatches == 0 and dt < 5.0,
           f"l0_prox vs grid oracle, 1000 draws: {mismatches} mismatches, {dt:.2f}s (< 5s)")


def _non_tie_point(rng, P, lam, scale, margin=1e-3):
    while True:
        x = scale * rng.standard_normal(P.n)
        z = x - lam * P.f.grad(x)
        t = hard_threshold(lam, P.g.mu0)
        if np.min(np.abs(np.abs(z) - t)) > margin * (1 + t):
            return x


def test_criterion_02_gradient_fidelity(capsys):
    rng = np.random.default_rng(SEED)
    P, _ = desk_instance(25, 5, 1e-2)
    lam = 0.99 / P.lipschitz
    A = rng.standard_normal((12, 30))
    ls = LeastSquaresRidge(A, rng.random(12), 1e-2)
    st = StudentT(A, rng.standard_normal(12), 1.0)
    worst = {"fbe_gradient": 0.0, "ls gradient": 0.0, "studentt gradient": 0.0,
             "ls hessian action": 0.0, "studentt hessian action": 0.0}
    for _ in range(100):
        x = _non_tie_point(rng, P, lam, 0.5)
        fd = fd_gradient(lambda y: prox_grad_step(y, P, lam).fbe, x)
        worst["fbe_gradient"] = max(worst["fbe_gradient"], rel_err(fbe_gradient(x, P, lam), fd))
        y, w = rng.standard_normal((2, 30))
        for name, model in (("ls", ls), ("studentt", st)):
            worst[f"{name} gradient"] = max(worst[f"{name} gradient"],
                                            rel_err(model.grad(y), fd_gradient(model.value, y)))
            worst[f"{name} hessian action"] = max(
                worst[f"{name} hessian action"],
                rel_err(model.hess_action(y, w), fd_hess_action(model.grad, y, w)))
    ok = all(v <= (1e-5 if "hessian" in k else 1e-6) for k, v in worst.items())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report(capsys, 2, ok, f"max rel. errors over 100 points: {detail}")


def test_criterion_03_sandwich_bound(capsys):
    bad, total = [], 0
    for label, tr, cfg, L, _ in all_runs():
        for r in tr.records:
            total += 1
            lo = (1 / cfg.lam - L) * r.eta
            hi = (1 / cfg.lam + L) * r.eta
            if not (lo - 1e-9 <= r.v_norm <= hi + 1e-9):
                bad.append((label, r.k))
    report(capsys, 3, not bad,
           f"(1/λ−L)η ≤ ‖v̂‖ ≤ (1/λ+L)η on {total} records of {len(_RUNS)} runs; "
           f"violations: {bad[:3] if bad else 0}")


def test_criterion_04_descent_invariant(capsys):
    bad, steps = [], 0
    for label, tr, cfg, _, descent in all_runs():
        if not descent:
            continue
        for a, b in zip(tr.records, tr.records[1:]):
            steps += 1
            if not b.fbe <= a.fbe - cfg.sigma * a.v_norm ** 2:
                bad.append((label, a.k))
    report(capsys, 4, not bad and steps > 0,
           f"φ(x+) ≤ φ(x) − σ‖v̂‖² on {steps} GLPG/GCNM steps; violations: {bad[:3] if bad else 0}")


def test_criterion_05_pgm_reduction(capsys):
    g, p = runs_pgm_reduction()
    diff = max(float(np.max(np.abs(a.x - b.x))) for a, b in zip(g.records, p.records))
    ok = g.iterations == p.iterations == 200 and diff <= 1e-14
    report(capsys, 5, ok, f"GLPG(d=0) vs PGM over {g.iterations} iterations: max |Δx_i| = {diff:.1e}")


def test_criterion_06_student2d(capsys):
    runs = runs_student2d()
    (a, ta), (b, tb) = runs[(5.0, 5.0)], runs[(-5.0, 5.0)]
    xa, xb = a.final_x, b.final_x
    ok_a = (a.converged and a.iterations <= 500 and abs(xa.sum() - 1) <= 1e-4
            and np.linalg.norm(xa - [0.0, 1.0]) <= 0.05 and ta < 1.0)
    ok_b = (b.converged and b.iterations <= 500 and np.linalg.norm(xb - [-4.5, 5.5]) <= 0.1
            and tb < 1.0)
    report(capsys, 6, ok_a and ok_b,
           f"from (5,5): {a.termination} in {a.iterations} it to ({xa[0]:.6f}, {xa[1]:.6f}), "
           f"|x1+x2−1|={abs(xa.sum() - 1):.1e}, dist to (0,1)={np.linalg.norm(xa - [0, 1]):.3f} "
           f"[{'ok' if ok_a else 'miss'}]; from (−5,5): {b.termination} in {b.iterations} it to "
           f"({xb[0]:.6f}, {xb[1]:.6f}), dist to (−4.5,5.5)={np.linalg.norm(xb - [-4.5, 5.5]):.1e} "
           f"[{'ok' if ok_b else 'miss'}]")


def test_criterion_07_desk_l0l2(capsys):
    parts, ok = [], True
    for (n, m, mu0), (g, p) in runs_desk().items():
        good = (g.converged and g.final.eta <= 1e-6 and g.iterations <= 30
                and p.converged and p.iterations >= 3 * g.iterations)
        ok &= good
        parts.append(f"{n}x{m} μ0={mu0:g}: GCNM {g.iterations} / PGM {p.iterations}")
    report(capsys, 7, ok, "; ".join(parts))


def _tail_ok(tr):
    K = tr.iterations
    if K < 4 or not tr.converged:
        return False, f"{K} iterations"
    recs = tr.records
    taus = [recs[k].tau for k in range(K - 4, K)]
    ratios = [recs[k + 1].eta / recs[k].eta for k in range(K - 4, K)]
    ok = all(t == 1.0 for t in taus) and all(a > b for a, b in zip(ratios, ratios[1:]))
    return ok, f"{K} it, τ={taus}, ratios={[f'{r:.1e}' for r in ratios]}"


def test_criterion_08_superlinear_tail(capsys):
    parts, any_ok = [], False
    for (n, m, mu0), (g, _) in runs_desk().items():
        good, why = _tail_ok(g)
        any_ok |= good
        parts.append(f"{n}x{m} μ0={mu0:g}: {why}")
    report(capsys, 8, any_ok,
           "last 4 GCNM steps with τ=1 and strictly decreasing η ratios; " + "; ".join(parts))


def test_criterion_09_deblur(capsys):
    g, p, b, x_true, dt = runs_deblur()
    err_g = float(np.linalg.norm(g.final_x - x_true))
    err_b = float(np.linalg.norm(b - x_true))
    ok = (g.converged and p.converged and g.iterations < p.iterations and err_g < err_b
          and dt < 60.0)
    report(capsys, 9, ok,
           f"GCNM {g.iterations} it vs PGM {p.iterations} it to η ≤ 1e-2; "
           f"‖x−x_true‖ {err_g:.3f} vs blurred {err_b:.3f}; {dt:.1f}s (< 60s)")


def test_criterion_10_direction_agreement(capsys):
    rng = np.random.default_rng(SEED)
    worst, fallbacks, solved = 0.0, 0, 0
    for _ in range(100):
        n = 5 * int(rng.integers(2, 9))
        A = rng.standard_normal((n // 5, n))
        f = LeastSquaresRidge(A, rng.random(n // 5), 10 ** rng.uniform(-3, -1))
        P = CompositeProblem(f, L0Norm(10 ** rng.uniform(-3, -1)))
        lam = 0.99 / f.lipschitz
        res = prox_grad_step(rng.standard_normal(n), P, lam)
        a = l0_newton_direction(res.x_hat, res.v_hat, f)
        b = generic_newton_direction(res.x_hat, res.v_hat, P, lam)
        fallbacks += (a.status != "solved") + (b.status != "solved")
        solved += a.status == b.status == "solved"
        worst = max(worst, float(np.max(np.abs(a.d - b.d))))
    run_fallbacks = sum(g.fallbacks for g, _ in runs_desk().values())
    ok = worst <= 1e-8 and fallbacks == 0 and run_fallbacks == 0 and solved == 100
    report(capsys, 10, ok,
           f"max |Δd| = {worst:.1e} over 100 instances; fallbacks: {fallbacks} in direction "
           f"solves, {run_fallbacks} in μ2>0 GCNM runs")


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn(None)
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
