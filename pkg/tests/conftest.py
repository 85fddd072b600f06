import numpy as np
import pytest

from gcnm import CompositeProblem, L0Norm, LeastSquaresRidge, StudentT, ZeroReg
from gcnm.instances import InstanceSpec, gen_l0l2


class Quadratic:
    """``f(x) = 0.5 ||x||^2`` with ``L_f = 1``."""

    lipschitz = 1.0

    def __init__(self, n=1):
        self.n = n

    def value(self, x):
        return 0.5 * float(np.dot(x, x))

    def grad(self, x):
        return np.array(x, dtype=float)

    def hess_action(self, x, w):
        return np.array(w, dtype=float)

    def hess_submatrix(self, x, J):
        return np.eye(len(J))

    def residual(self, x):
        return np.array(x, dtype=float)


@pytest.fixture
def quad_l0():
    return CompositeProblem(Quadratic(1), L0Norm(1.0))


@pytest.fixture
def quad_zero():
    return CompositeProblem(Quadratic(1), ZeroReg())


@pytest.fixture
def student2d():
    return CompositeProblem(StudentT(np.array([[1.0, 1.0]]), np.array([1.0]), 1.0), L0Norm(0.1))


@pytest.fixture
def desk_l0l2():
    return gen_l0l2(InstanceSpec("l0l2", m=20, mu0=1e-2, mu2=1e-2, seed=7))
