import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import expm

from galint.se3 import (
    SpatialTransform,
    ad,
    ad_apply,
    ad_dual,
    adjoint,
    adjoint_batch,
    adjoint_inv,
    adjoint_inv_transpose,
    coad_apply,
    exp_se3,
    exp_twist,
    hat,
    hat6,
    left_perturb,
    vee,
)


def random_transform(rng):
    return exp_se3(rng.normal(size=6))


def test_hat_zero_and_roundtrip():
    assert_allclose(hat(np.zeros(3)), np.zeros((3, 3)))
    assert_allclose(vee(hat([1.0, 2.0, 3.0])), [1.0, 2.0, 3.0])


def test_hat_is_cross_product():
    assert_allclose(hat([0.0, 0.0, 1.0]) @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0])


def test_vee_rejects_symmetric_part():
    m = hat([1.0, 2.0, 3.0])
    m[0, 1] += 1e-6
    with pytest.raises(ValueError):
        vee(m)


def test_exp_twist_zero_is_identity(rng):
    g = exp_twist(rng.normal(size=6), 0.0)
    assert_allclose(g.as_matrix(), np.eye(4), atol=1e-15)


def test_exp_twist_quarter_turn_about_z():
    g = exp_twist(np.array([0, 0, 1, 0, 0, 0], dtype=float), np.pi / 2)
    expected = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    assert_allclose(g.R, expected, atol=1e-15)
    assert_allclose(g.p, np.zeros(3), atol=1e-15)


def test_exp_twist_prismatic():
    g = exp_twist(np.array([0, 0, 0, 1, 0, 0], dtype=float), 2.5)
    assert_allclose(g.R, np.eye(3))
    assert_allclose(g.p, [2.5, 0.0, 0.0])


@pytest.mark.parametrize("scale", [1.0, 1e-5, 1e-11])
def test_exp_twist_matches_matrix_exponential(rng, scale):
    for _ in range(20):
        S = rng.normal(size=6)
        q = scale * rng.uniform(-3.0, 3.0)
        g = exp_twist(S, q)
        assert_allclose(g.as_matrix(), expm(hat6(S) * q), atol=1e-12)
        assert g.is_valid()


def test_adjoint_identity():
    assert_allclose(adjoint(SpatialTransform.identity()), np.eye(6))


def test_adjoint_is_homomorphism(rng):
    for _ in range(1000):
        g1, g2 = random_transform(rng), random_transform(rng)
        assert_allclose(adjoint(g1 @ g2), adjoint(g1) @ adjoint(g2), atol=1e-12)
        assert_allclose(adjoint_inv(g1) @ adjoint(g1), np.eye(6), atol=1e-12)
        assert_allclose(adjoint_inv(g1), adjoint(g1.inverse()), atol=1e-12)


def test_adjoint_inv_transpose_and_batch(rng):
    g = random_transform(rng)
    assert_allclose(adjoint_inv_transpose(g), adjoint_inv(g).T, atol=1e-12)
    assert_allclose(adjoint_batch(g.R[None], g.p[None])[0], adjoint(g))


def test_adjoint_acts_by_conjugation(rng):
    g = random_transform(rng)
    v = rng.normal(size=6)
    G = g.as_matrix()
    assert_allclose(hat6(adjoint(g) @ v), G @ hat6(v) @ np.linalg.inv(G), atol=1e-12)


def test_ad_is_lie_bracket(rng):
    assert_allclose(ad(np.zeros(6)), np.zeros((6, 6)))
    for _ in range(50):
        v1, v2 = rng.normal(size=6), rng.normal(size=6)
        A, B = hat6(v1), hat6(v2)
        bracket = A @ B - B @ A
        assert_allclose(hat6(ad(v1) @ v2), bracket, atol=1e-12)
        assert_allclose(ad(v1) @ v1, np.zeros(6), atol=1e-12)
        assert_allclose(ad_apply(v1, v2), ad(v1) @ v2, atol=1e-12)


def test_ad_dual_pairing(rng):
    for _ in range(100):
        F, v1, v2 = rng.normal(size=6), rng.normal(size=6), rng.normal(size=6)
        lhs = F @ ad(v1) @ v2
        assert lhs == pytest.approx(v2 @ ad_dual(F) @ v1, abs=1e-12)
        assert lhs == pytest.approx(-(v1 @ ad_dual(F) @ v2), abs=1e-12)
        assert_allclose(coad_apply(v1, F), ad(v1).T @ F, atol=1e-12)
        assert_allclose(coad_apply(v1, F), ad_dual(F) @ v1, atol=1e-12)


def test_exp_twist_derivative_matches_ad(rng):
    h = 1e-6
    for _ in range(10):
        S = rng.normal(size=6)
        q = rng.uniform(-2.0, 2.0)
        fd = (adjoint(exp_twist(S, q + h)) - adjoint(exp_twist(S, q - h))) / (2 * h)
        Ad = adjoint(exp_twist(S, q))
        assert_allclose(fd, ad(Ad @ S) @ Ad, atol=1e-6)


def test_left_perturbation(rng):
    g = random_transform(rng)
    eta = 1e-3 * rng.normal(size=6)
    R, p = left_perturb(g.R, g.p, eta)
    expected = exp_se3(eta) @ g
    assert_allclose(R, expected.R, atol=1e-14)
    assert_allclose(p, expected.p, atol=1e-14)
