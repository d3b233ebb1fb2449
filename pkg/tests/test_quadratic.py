import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from cyclicot import (QuadraticForm, det_sum, grid_sup, grid_sup_error_bound,
                      legendre_quadratic, nested_grid_sup)
from cyclicot.quadratic import NotPositiveDefinite, grid_points, is_positive_definite


def random_pd(rng, n):
    L = rng.normal(size=(n, n))
    return L @ L.T + 0.5 * np.eye(n)


def random_form(rng, n=2):
    return QuadraticForm(random_pd(rng, n), rng.normal(size=n), rng.normal())


def test_transform_of_half_square_is_itself():
    g = legendre_quadratic(QuadraticForm(np.eye(2), np.zeros(2)))
    assert_allclose(g.A, np.eye(2))
    assert_allclose(g.b, 0)
    assert g.c0 == 0


def test_transform_by_hand():
    # f(x) = x^2 + x  ->  f*(y) = (y - 1)^2 / 4
    g = legendre_quadratic(QuadraticForm([[2.0]], [1.0]))
    for y in (-2.0, 0.0, 3.0):
        assert_allclose(g(np.array([y])), (y - 1) ** 2 / 4)


def test_indefinite_rejected():
    with pytest.raises(NotPositiveDefinite):
        legendre_quadratic(QuadraticForm(np.diag([1.0, -1.0]), np.zeros(2)))
    with pytest.raises(NotPositiveDefinite):
        legendre_quadratic(QuadraticForm(np.diag([1.0, 0.0]), np.zeros(2)))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_biconjugate(seed, n):
    rng = np.random.default_rng(seed)
    f = random_form(rng, n)
    g = legendre_quadratic(legendre_quadratic(f))
    assert_allclose(g.A, f.A, rtol=1e-9, atol=1e-9)
    assert_allclose(g.b, f.b, rtol=1e-9, atol=1e-9)
    assert_allclose(g.c0, f.c0, rtol=1e-9, atol=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fenchel_young(seed):
    rng = np.random.default_rng(seed)
    f = random_form(rng, 2)
    g = legendre_quadratic(f)
    x, y = rng.normal(size=(2, 2))
    scale = 1 + abs(f(x)) + abs(g(y)) + abs(x @ y)
    assert f(x) + g(y) >= x @ y - 1e-9 * scale
    grad = f.A @ x + f.b
    assert abs(f(x) + g(grad) - x @ grad) <= 1e-9 * (1 + abs(x @ grad))


def test_det_sum_identity(rng):
    for _ in range(200):
        A, B = rng.normal(size=(2, 2, 2))
        lhs, rhs = det_sum(A, B)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_det_sum_needs_2x2():
    with pytest.raises(ValueError):
        det_sum(np.eye(3), np.eye(3))


def test_grid_sup_finds_lattice_maximizer():
    val, arg = grid_sup(lambda X: -np.sum((X - 0.5) ** 2, axis=1), [0, 0], [1, 1], 0.25)
    assert val == 0.0
    assert_allclose(arg, [0.5, 0.5])


def test_grid_sup_ties_go_to_first_point():
    _, arg = grid_sup(lambda X: np.zeros(len(X)), [0], [1], 0.5)
    assert arg[0] == 0.0


def test_empty_grid_raises():
    with pytest.raises(ValueError):
        grid_points([1.0], [0.0], 0.1)


def test_error_bound_holds_for_concave_quadratics(rng):
    for _ in range(20):
        H = random_pd(rng, 2)
        c = rng.uniform(-0.5, 0.5, 2)
        f = lambda X: -0.5 * np.einsum("ij,jk,ik->i", X - c, H, X - c)
        val, _ = grid_sup(f, [-1, -1], [1, 1], 0.1)
        assert 0 - val <= grid_sup_error_bound(H, 0.1) + 1e-15


def test_nested_sup_matches_enumeration(rng):
    grids = [rng.normal(size=(4, 2)) for _ in range(3)]
    vals = [rng.normal(size=4) for _ in range(3)]
    a, e = rng.normal(size=(2, 2))
    best = -np.inf
    for i, j, k in itertools.product(range(4), repeat=3):
        z = grids[0][i], grids[1][j], grids[2][k]
        v = a @ z[0] + z[0] @ z[1] + z[1] @ z[2] + z[2] @ e - vals[0][i] - vals[1][j] - vals[2][k]
        best = max(best, v)
    got, idx = nested_grid_sup(grids, vals, a, e, return_argmax=True)
    assert_allclose(got, best, rtol=1e-13)
    z = [g[i] for g, i in zip(grids, idx)]
    direct = a @ z[0] + z[0] @ z[1] + z[1] @ z[2] + z[2] @ e - sum(v[i] for v, i in zip(vals, idx))
    assert_allclose(direct, best, rtol=1e-13)


def test_is_positive_definite():
    assert is_positive_definite(np.eye(2))
    assert not is_positive_definite(np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert not is_positive_definite(np.array([[1.0, 1.0], [0.0, 1.0]]))
