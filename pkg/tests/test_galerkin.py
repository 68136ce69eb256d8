import numpy as np
import pytest
from numpy.testing import assert_allclose

from galint.errors import UnsupportedOrder
from galint.galerkin import MAX_ORDER, lobatto, parse_scheme, simpson, trapezoidal


@pytest.mark.parametrize("s", range(1, MAX_ORDER + 1))
def test_lobatto_scheme_identities(s):
    scheme = lobatto(s)
    b, c, w = scheme.diff_matrix, scheme.nodes, scheme.weights
    assert scheme.num_nodes == s + 1
    assert scheme.order == 2 * s
    assert c[0] == 0.0 and c[-1] == 1.0
    assert np.all(np.diff(c) > 0)
    assert_allclose(b.sum(axis=1), 0.0, atol=1e-9)
    assert_allclose(b @ c, 1.0, atol=1e-9)
    assert w.sum() == pytest.approx(1.0, abs=1e-12)
    assert w[0] == pytest.approx(w[-1], abs=1e-14)
    for j in range(2 * s - 2):
        assert (w * c ** j).sum() == pytest.approx(1.0 / (j + 1), abs=1e-10)


def test_trapezoidal_coefficients():
    scheme = trapezoidal()
    q = np.array([[0.3], [1.1]])
    assert_allclose(scheme.diff_matrix @ q, [[0.8], [0.8]])
    assert_allclose(scheme.weights, [0.5, 0.5])
    assert_allclose(scheme.a_matrix, (scheme.weights[:, None] * scheme.diff_matrix).T)


def test_simpson_coefficients():
    scheme = simpson()
    q0, q1, q2 = 0.2, -0.4, 1.5
    qdot = scheme.diff_matrix @ np.array([q0, q1, q2])
    assert qdot[0] == pytest.approx(4 * q1 - 3 * q0 - q2)
    assert qdot[2] == pytest.approx(q0 + 3 * q2 - 4 * q1)
    assert_allclose(scheme.weights, np.array([1.0, 4.0, 1.0]) / 6.0)


def test_low_order_lobatto_matches_closed_forms():
    for generic, closed in ((lobatto(1), trapezoidal()), (lobatto(2), simpson())):
        assert_allclose(generic.nodes, closed.nodes, atol=1e-14)
        assert_allclose(generic.weights, closed.weights, atol=1e-14)
        assert_allclose(generic.diff_matrix, closed.diff_matrix, atol=1e-12)


def test_lobatto3_nodes_are_legendre_roots():
    # P₃′(x) ∝ 5x² − 1 的根映射到 [0,1]
    roots = np.sort(np.polynomial.legendre.Legendre.basis(3).deriv().roots())
    expected = np.concatenate([[0.0], 0.5 * (roots + 1.0), [1.0]])
    assert_allclose(lobatto(3).nodes, expected, atol=1e-14)
    assert_allclose(lobatto(3).nodes[1:3], [(5 - np.sqrt(5)) / 10, (5 + np.sqrt(5)) / 10], atol=1e-14)


@pytest.mark.parametrize("s", [0, 13, -1, 2.5, True])
def test_lobatto_rejects_unsupported_orders(s):
    with pytest.raises(UnsupportedOrder):
        lobatto(s)


def test_parse_scheme():
    assert parse_scheme("trapezoidal").s == 1
    assert parse_scheme(" Simpson ").s == 2
    assert parse_scheme("lobatto:4").name == "lobatto:4"
    with pytest.raises(UnsupportedOrder):
        parse_scheme("lobatto:x")
    with pytest.raises(ValueError):
        parse_scheme("euler")


def test_interpolation_reproduces_polynomials():
    scheme = lobatto(3)
    qbar = np.stack([scheme.nodes ** 3, 1.0 - scheme.nodes], axis=1)
    tau = np.linspace(0.0, 1.0, 7)
    assert_allclose(scheme.interpolate(qbar, tau), np.stack([tau ** 3, 1.0 - tau], axis=1), atol=1e-12)
