import numpy as np
import pytest

from gcnm import CompositeProblem, L0Norm, LeastSquaresRidge, StudentT, ZeroReg
from gcnm.directions import (FALLBACK_ZERO, SOLVED, UnsupportedDirection,
                             generic_newton_direction, l0_newton_direction,
                             reduced_newton_direction)
from gcnm.envelopes import prox_grad_step


class DiagModel:
    def __init__(self, diag):
        self.H = np.diag(diag)
        self.n = len(diag)

    def hess_submatrix(self, x, J):
        return self.H[np.ix_(J, J)]

    def hess_action(self, x, w):
        return self.H @ w


def test_one_by_one_reduced_solve():
    out = l0_newton_direction(np.array([1.0, 0.0]), np.array([0.5, 0.2]), DiagModel([2.0, 3.0]))
    assert out.status == SOLVED and out.residual == 0.0
    np.testing.assert_array_equal(out.d, [-0.25, 0.0])
    np.testing.assert_array_equal(out.support, [0])


def test_zero_rhs_and_empty_support():
    m = DiagModel([2.0, 3.0])
    out = l0_newton_direction(np.array([1.0, 2.0]), np.zeros(2), m)
    assert out.status == SOLVED and not out.d.any()
    out = l0_newton_direction(np.zeros(2), np.array([1.0, 1.0]), m)
    assert out.status == SOLVED and not out.d.any()


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        l0_newton_direction(np.ones(2), np.ones(3), DiagModel([1.0, 1.0]))


def test_singular_system_falls_back_to_zero():
    # rank-one Hessian on a two-element support, mu2 = 0
    f = LeastSquaresRidge(np.array([[1.0, 1.0]]), np.array([1.0]))
    out = l0_newton_direction(np.array([1.0, 2.0]), np.array([0.3, -0.1]), f)
    assert out.status == FALLBACK_ZERO and not out.d.any()
    P = CompositeProblem(f, L0Norm(0.01))
    out = generic_newton_direction(np.array([1.0, 2.0]), np.array([0.3, -0.1]), P, 0.4)
    assert out.status == FALLBACK_ZERO and not out.d.any()


def test_zero_regularizer_gives_classical_newton():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((8, 5))
    f = LeastSquaresRidge(A, rng.standard_normal(8), 0.1)
    P = CompositeProblem(f, ZeroReg())
    x = rng.standard_normal(5)
    lam = 0.5 / f.lipschitz
    res = prox_grad_step(x, P, lam)
    out = generic_newton_direction(res.x_hat, res.v_hat, P, lam)
    H = A.T @ A + 0.2 * np.eye(5)
    np.testing.assert_allclose(lam * H @ out.d, -lam * res.v_hat, atol=1e-12)
    hook = P.g.newton_direction(res.x_hat, res.v_hat, P, lam, 1e-10)
    np.testing.assert_allclose(hook.d, out.d, rtol=1e-10)


def test_missing_jacobian_hook():
    class NoJac:
        prox_bound = np.inf

    P = CompositeProblem(LeastSquaresRidge(np.eye(2), np.zeros(2)), NoJac())
    with pytest.raises(UnsupportedDirection, match="direction strategy unsupported"):
        generic_newton_direction(np.ones(2), np.ones(2), P, 0.5)


def _random_state(rng, n=40, m=12, mu2=1e-2):
    A = rng.standard_normal((m, n))
    f = LeastSquaresRidge(A, rng.random(m), mu2)
    P = CompositeProblem(f, L0Norm(10 ** rng.uniform(-3, -1)))
    lam = 0.99 / f.lipschitz
    return P, lam, prox_grad_step(rng.standard_normal(n), P, lam)


def test_two_routes_agree_and_never_fall_back_with_ridge():
    rng = np.random.default_rng(123)
    for _ in range(100):
        P, lam, res = _random_state(rng)
        a = l0_newton_direction(res.x_hat, res.v_hat, P.f)
        b = generic_newton_direction(res.x_hat, res.v_hat, P, lam)
        assert a.status == b.status == SOLVED
        assert np.max(np.abs(a.d - b.d)) <= 1e-8
        assert not a.d[res.x_hat == 0].any()
        assert a.residual <= 1e-10 * (1 + res.v_norm)
        if res.v_norm > 0:
            assert -res.v_hat @ a.d > 0


def test_iterative_path_matches_dense():
    rng = np.random.default_rng(7)
    P, lam, res = _random_state(rng, n=60, m=30)
    J = np.flatnonzero(res.x_hat)
    dense = reduced_newton_direction(res.x_hat, res.v_hat, P.f, J)
    it = reduced_newton_direction(res.x_hat, res.v_hat, P.f, J, dense_max=0)
    assert it.status == SOLVED
    np.testing.assert_allclose(it.d, dense.d, rtol=1e-7, atol=1e-9)
    gd = generic_newton_direction(res.x_hat, res.v_hat, P, lam)
    gi = generic_newton_direction(res.x_hat, res.v_hat, P, lam, dense_max=0)
    np.testing.assert_allclose(gi.d, gd.d, rtol=1e-7, atol=1e-9)


def test_indefinite_studentt_system_still_solved():
    f = StudentT(np.array([[1.0]]), np.array([0.0]), 1.0)
    out = l0_newton_direction(np.array([2.0]), np.array([0.3]), f)
    assert out.status == SOLVED and out.d[0] == pytest.approx(0.3 / 0.24)
