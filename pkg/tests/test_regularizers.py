import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from gcnm.regularizers import (TIE_KEEP, L0Norm, ZeroReg, hard_threshold, l0_prox,
                               l0_prox_jacobian, l0_subdiff_member, l0_value)

finite = st.floats(-1e3, 1e3, allow_nan=False)
vecs = arrays(float, st.integers(1, 12), elements=finite)


@pytest.mark.parametrize("x, mu0, expected", [
    ([0.0, 0.0, 0.0], 1.0, 0.0),
    ([0.5, 0.0, -2.0], 0.1, 0.2),
    ([1e-300, 0.0], 1.0, 1.0),
])
def test_l0_value(x, mu0, expected):
    assert l0_value(np.array(x), mu0) == pytest.approx(expected)


def test_l0_prox_hard_threshold_example():
    np.testing.assert_array_equal(l0_prox(np.array([0.5, 2.0, -1.5]), 0.5, 1.0), [0.0, 2.0, -1.5])


def test_l0_prox_fixes_zero():
    np.testing.assert_array_equal(l0_prox(np.zeros(3), 0.3, 7.0), np.zeros(3))


def test_l0_prox_tie_goes_to_zero_and_both_candidates_tie():
    assert hard_threshold(0.5, 1.0) == 1.0
    assert l0_prox(np.array([1.0]), 0.5, 1.0)[0] == 0.0
    assert l0_prox(np.array([1.0]), 0.5, 1.0, TIE_KEEP)[0] == 1.0
    obj = lambda y: 1.0 * (y != 0) + (y - 1.0) ** 2 / (2 * 0.5)
    assert obj(0.0) == obj(1.0) == 1.0


def test_unknown_tie_policy():
    with pytest.raises(ValueError):
        L0Norm(1.0, tie_policy="random")
    with pytest.raises(ValueError):
        L0Norm(0.0)


@pytest.mark.parametrize("x, v, expected", [
    ([1.0, 0.0], [0.0, 7.0], True),
    ([1.0, 0.0], [0.1, 0.0], False),
    ([0.0, 0.0], [3.0, -2.0], True),
])
def test_subdiff_membership(x, v, expected):
    assert l0_subdiff_member(np.array(x), np.array(v)) is expected


def test_prox_jacobian_examples():
    np.testing.assert_array_equal(l0_prox_jacobian(np.array([2.0, 0.5]), 0.5, 1.0), [1.0, 0.0])
    np.testing.assert_array_equal(l0_prox_jacobian(np.zeros(3), 0.5, 1.0), np.zeros(3))
    assert l0_prox_jacobian(np.array([-1.0]), 0.5, 1.0)[0] == 0.0
    assert l0_prox_jacobian(np.array([-1.0]), 0.5, 1.0, TIE_KEEP)[0] == 1.0


def test_prox_jacobian_matches_finite_difference_away_from_tie():
    z = np.array([2.0, 0.5, -3.0, -0.2])
    h = 1e-7
    fd = [(l0_prox(z + h * e, 0.5, 1.0) - l0_prox(z - h * e, 0.5, 1.0))[i] / (2 * h)
          for i, e in enumerate(np.eye(4))]
    np.testing.assert_allclose(fd, l0_prox_jacobian(z, 0.5, 1.0), atol=1e-6)


def test_zero_regularizer():
    g = ZeroReg()
    z = np.array([1.0, -2.0])
    np.testing.assert_array_equal(g.prox(z, 0.3), z)
    assert g.value(z) == 0.0 and not g.near_tie(z, 0.3)
    assert g.subdiff_member(z, np.zeros(2)) and not g.subdiff_member(z, np.ones(2))


def test_near_tie_flag():
    g = L0Norm(1.0)
    assert g.near_tie(np.array([0.3, 1.0 + 1e-14]), 0.5)
    assert not g.near_tie(np.array([0.3, 1.0 + 1e-6]), 0.5)


@settings(max_examples=200, deadline=None)
@given(vecs, vecs, st.floats(1e-3, 10.0), st.floats(1e-3, 10.0))
def test_separability(a, b, lam, mu0):
    whole = l0_prox(np.concatenate([a, b]), lam, mu0)
    np.testing.assert_array_equal(whole, np.concatenate([l0_prox(a, lam, mu0), l0_prox(b, lam, mu0)]))


@settings(max_examples=200, deadline=None)
@given(vecs, st.floats(1e-3, 10.0), st.floats(1e-3, 10.0), st.floats(1.0, 100.0))
def test_threshold_monotonicity(z, lam, mu0, grow):
    small = np.flatnonzero(l0_prox(z, lam, mu0))
    large = np.flatnonzero(l0_prox(z, lam * grow, mu0))
    assert set(large) <= set(small)


@settings(max_examples=200, deadline=None)
@given(vecs, st.floats(1e-3, 10.0), st.floats(1e-3, 10.0))
def test_prox_output_is_kept_or_zeroed(z, lam, mu0):
    p = l0_prox(z, lam, mu0)
    assert np.all((p == 0) | (p == z))
    assert L0Norm(mu0).subdiff_member(p, (z - p) / lam) or np.all(p == z)


@settings(max_examples=200, deadline=None)
@given(vecs, st.floats(0.1, 10.0), st.integers(0, 11))
def test_subdiff_scaling_and_breaking(x, scale, i):
    v = np.where(x == 0, 1.0, 0.0)
    assert l0_subdiff_member(x, scale * v)
    i = i % x.size
    if x[i] != 0:
        w = v.copy()
        w[i] = 1e-9
        assert not l0_subdiff_member(x, w)
