import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rte_accel.quadrature import InvalidQuadratureError, chebyshev_legendre, gauss_legendre_1d, legendre_nodes


# oracle: numpy's Golub-Welsch nodes
@pytest.mark.parametrize("n", [1, 2, 5, 6, 17, 40])
def test_nodes_match_numpy(n):
    x, w = legendre_nodes(n)
    xr, wr = np.polynomial.legendre.leggauss(n)
    np.testing.assert_allclose(x, xr, atol=1e-14)
    np.testing.assert_allclose(w, wr, atol=1e-14)


@given(st.integers(1, 30), st.data())
@settings(max_examples=40, deadline=None)
def test_polynomial_exactness(n, data):
    # [DERIVED] int_{-1}^{1} x^k = 2/(k+1) for even k, 0 for odd k, exact up to 2n-1
    k = data.draw(st.integers(0, 2 * n - 1))
    x, w = legendre_nodes(n)
    exact = 2.0 / (k + 1) if k % 2 == 0 else 0.0
    assert abs(w @ x**k - exact) < 1e-13


def test_gl6_moments():
    q = gauss_legendre_1d(6)
    assert q.count == 6 and q.dim == 1
    assert abs(q.weights.sum() - 1.0) < 1e-15
    assert abs(q.moment(q.directions[:, 0] ** 2) - 1.0 / 3.0) < 1e-12
    assert abs(q.moment(q.directions[:, 0])) < 1e-15


@pytest.mark.parametrize("n_phi,n_z", [(4, 2), (8, 4), (40, 6), (12, 3)])
def test_cl_moments(n_phi, n_z):
    q = chebyshev_legendre(n_phi, n_z)
    assert q.count == n_phi * n_z
    assert abs(q.weights.sum() - 1.0) < 1e-15
    np.testing.assert_allclose(np.linalg.norm(q.directions, axis=1), 1.0, atol=1e-15)
    # [DERIVED] isotropic second moments: <v_a v_b> = delta_ab / 3
    second = np.einsum("j,ja,jb->ab", q.weights, q.directions, q.directions)
    np.testing.assert_allclose(second, np.eye(3) / 3.0, atol=1e-12)
    np.testing.assert_allclose(q.weights @ q.directions, 0.0, atol=1e-15)


def test_cl_azimuth_fastest():
    q = chebyshev_legendre(8, 4)
    z = q.directions[:, 2].reshape(4, 8)
    assert np.all(z == z[:, :1])
    assert np.all(np.diff(z[:, 0]) > 0)


def test_weights_immutable():
    q = gauss_legendre_1d(4)
    with pytest.raises(ValueError):
        q.weights[0] = 1.0


@pytest.mark.parametrize("n", [0, 1, 3, 7])
def test_bad_slab_orders(n):
    with pytest.raises(InvalidQuadratureError):
        gauss_legendre_1d(n)


@pytest.mark.parametrize("args", [(2, 2), (4, 1), (6, 4), (10, 2)])
def test_bad_cl_orders(args):
    with pytest.raises(InvalidQuadratureError):
        chebyshev_legendre(*args)


def test_two_point_rule():
    q = gauss_legendre_1d(2)
    np.testing.assert_allclose(q.directions[:, 0], [-1 / np.sqrt(3), 1 / np.sqrt(3)], atol=1e-15)
    np.testing.assert_allclose(q.weights, [0.5, 0.5], atol=1e-15)


def test_rules_are_deterministic():
    a, b = chebyshev_legendre(40, 6), chebyshev_legendre(40, 6)
    assert a.directions.tobytes() == b.directions.tobytes() and a.weights.tobytes() == b.weights.tobytes()
    assert gauss_legendre_1d(6).weights.tobytes() == gauss_legendre_1d(6).weights.tobytes()
