import numpy as np
import pytest
from numpy.testing import assert_allclose

from galint.forces import (
    ForceModel,
    ForceSum,
    JointDamping,
    JointTorques,
    QuadraticDrag,
    ZeroForce,
    validate_force_jacobians,
)
from galint.model import chain_model, kinematics, random_tree


class AnchorSpring(ForceModel):
    """把每个刚体原点拉向世界原点的线性弹簧，只有数值 Jacobian。"""

    has_body_wrench = True

    def __init__(self, stiffness):
        self.stiffness = stiffness

    def body_wrench(self, i, g, vbar, u, t):
        f = -self.stiffness * g.p
        return np.concatenate([np.cross(g.p, f), f])


def test_zero_force_reports_zero_error(rng):
    report = validate_force_jacobians(ZeroForce(), random_tree(rng, 3), samples=3)
    assert report.analytic
    assert all(err == 0.0 for err in report.max_rel_error.values())
    assert report.passed()


def test_joint_damping_derivative_is_exact():
    model = chain_model(3)
    damping = JointDamping([0.1, 0.2, 0.3])
    for i in range(3):
        assert damping.joint_force_jacobians(i, 0.4, 1.7, None, 0.0) == (0.0, -damping._c(i))
        assert damping.joint_force(i, 0.4, 2.0, None, 0.0) == pytest.approx(-2.0 * damping._c(i))
    assert validate_force_jacobians(damping, model).passed(1e-8)


def test_quadratic_drag_matches_central_differences(rng):
    report = validate_force_jacobians(QuadraticDrag(0.7), random_tree(rng, 4), samples=5, step=1e-6)
    assert report.max_rel_error["D2F"] <= 1e-5
    assert report.passed(1e-5)


def test_joint_torques_follow_controls():
    torques = JointTorques()
    assert torques.joint_force(1, 0.0, 0.0, np.array([0.5, -2.0]), 0.0) == -2.0
    assert torques.joint_force(1, 0.0, 0.0, None, 0.0) == 0.0
    report = validate_force_jacobians(torques, chain_model(2), controls=lambda t: np.array([np.sin(t), 1.0]))
    assert report.passed()


def test_force_sum_adds_models_and_jacobians(rng):
    model = random_tree(rng, 3)
    total = ForceSum(JointDamping(0.4), QuadraticDrag(0.2), AnchorSpring(3.0))
    assert not total.analytic_jacobians
    cache = kinematics(model, rng.normal(size=(1, 3)), rng.normal(size=(1, 3)))
    g, v = cache.transform(2, 0), cache.vbar[2, 0]
    expected = QuadraticDrag(0.2).body_wrench(2, g, v, None, 0.0) + AnchorSpring(3.0).body_wrench(2, g, v, None, 0.0)
    assert_allclose(total.body_wrench(2, g, v, None, 0.0), expected)
    assert total.joint_force(2, 0.1, 0.5, None, 0.0) == pytest.approx(-0.2)
    assert validate_force_jacobians(total, model, samples=3).passed(1e-5)


def test_numerical_fallback_matches_spring_derivative(rng):
    model = random_tree(rng, 2)
    spring = AnchorSpring(2.0)
    cache = kinematics(model, rng.normal(size=(1, 2)), np.zeros((1, 2)))
    g = cache.transform(1, 0)
    D1, D2 = spring.body_wrench_jacobians(1, g, cache.vbar[1, 0], None, 0.0)
    # 左扰动下 δp = ω × p + v
    k, p = 2.0, g.p
    expected = np.zeros((6, 6))
    for j in range(6):
        eta = np.zeros(6)
        eta[j] = 1.0
        dp = np.cross(eta[:3], p) + eta[3:]
        df = -k * dp
        expected[:, j] = np.concatenate([np.cross(dp, -k * p) + np.cross(p, df), df])
    assert_allclose(D1, expected, atol=1e-6)
    assert_allclose(D2, 0.0)
