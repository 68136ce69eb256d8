import numpy as np
import pytest
from numpy.testing import assert_allclose

from galint.commands.check import relative_error
from galint.del_equations import initial_state
from galint.errors import SingularJacobian
from galint.forces import JointDamping
from galint.galerkin import simpson, trapezoidal
from galint.linearize import mass_matrix
from galint.model import Body, Joint, MechanismModel, chain_model
from galint.newton import SolverConfig
from galint.oracle import (
    FdConfig,
    dense_newton_direction,
    dense_step,
    discrete_lagrangian,
    discrete_lagrangian_gradient,
    fd_del,
    fd_discrete_lagrangian_gradient,
    fd_jacobian,
    generalized_forces,
)
from galint.se3 import SpatialTransform


def _slider(mass):
    return MechanismModel([Body(mass, np.eye(3), Joint.prismatic((1, 0, 0)))], gravity=(0.0, 0.0, 0.0))


def test_discrete_lagrangian_at_rest_without_gravity():
    model = chain_model(3).with_gravity((0.0, 0.0, 0.0))
    assert discrete_lagrangian(model, simpson(), np.full((3, 3), 0.4), 0.1) == 0.0


def test_sliding_mass():
    assert discrete_lagrangian(_slider(3.0), trapezoidal(), np.array([[0.0], [1.0]]), 1.0) == pytest.approx(1.5)


def test_potential_offset_only_shifts_the_value(control_points):
    base = chain_model(2)
    offset = np.array([0.0, 2.0, 0.0])
    bodies = list(base.bodies)
    root = bodies[0]
    moved_joint = Joint(root.joint.twist, root.joint.parent,
                        SpatialTransform(np.eye(3), root.joint.rest_transform.p + offset))
    shifted = MechanismModel([Body(root.mass, root.inertia, moved_joint)] + bodies[1:], base.gravity)
    scheme = simpson()
    dt = 0.02
    qbar, _ = control_points(scheme, 2, dt)
    delta = -dt * float(np.sum(base.masses) * (base.gravity @ offset))
    assert discrete_lagrangian(shifted, scheme, qbar, dt) - discrete_lagrangian(base, scheme, qbar, dt) \
        == pytest.approx(-delta, rel=1e-10)
    r_base, p_base = fd_del(base, scheme, qbar, np.zeros(2), dt=dt)
    r_shift, p_shift = fd_del(shifted, scheme, qbar, np.zeros(2), dt=dt)
    assert relative_error(r_shift, r_base) <= 1e-6
    assert relative_error(p_shift, p_base) <= 1e-6


def test_chain_rule_gradient_matches_differences(chain4, control_points):
    scheme = simpson()
    qbar, _ = control_points(scheme, 4, 0.02)
    assert relative_error(discrete_lagrangian_gradient(chain4, scheme, qbar, 0.02),
                          fd_discrete_lagrangian_gradient(chain4, scheme, qbar, 0.02)) <= 1e-6


def test_single_link_jacobian_is_inertia_over_dt():
    model = chain_model(1)
    dt = 0.01
    inertia = mass_matrix(model, [0.0])[0, 0]
    J = fd_jacobian(model, trapezoidal(), np.array([[0.01], [0.012]]), np.zeros(1), dt=dt)
    assert J.shape == (1, 1)
    assert relative_error(J, [[-inertia / dt]]) <= 1e-6


def test_jacobian_is_deterministic(chain4, control_points, rng):
    scheme = simpson()
    qbar, _ = control_points(scheme, 4, 0.01)
    p = rng.normal(size=4)
    a = fd_jacobian(chain4, scheme, qbar, p, dt=0.01)
    b = fd_jacobian(chain4, scheme, qbar, p, dt=0.01)
    assert np.array_equal(a, b)
    assert a.shape == (8, 8)


def test_generalized_forces_of_joint_damping(double_pendulum, control_points):
    scheme = simpson()
    dt = 0.02
    qbar, _ = control_points(scheme, 2, dt)
    assert_allclose(generalized_forces(double_pendulum, scheme, qbar, dt=dt), 0.0)
    forces = generalized_forces(double_pendulum, scheme, qbar, JointDamping(0.5), dt=dt)
    expected = -0.5 * scheme.weights[:, None] * dt * scheme.velocities(qbar, dt)
    assert_allclose(forces, expected, atol=1e-14)


def test_dense_solve_rejects_singular_matrix():
    with pytest.raises(SingularJacobian) as exc:
        dense_newton_direction(np.zeros((2, 2)), np.ones((1, 2)))
    assert exc.value.body is None


@pytest.mark.parametrize("kwargs", [dict(step=0.0), dict(hessian_step=-1.0), dict(mode="forward")])
def test_fd_config_validation(kwargs):
    with pytest.raises(ValueError):
        FdConfig(**kwargs)


def test_halving_the_difference_step_quarters_the_error(chain4, control_points):
    scheme, dt = simpson(), 0.05
    qbar, _ = control_points(scheme, 4, dt, spread=0.5)
    exact = discrete_lagrangian_gradient(chain4, scheme, qbar, dt)
    errors = [np.abs(fd_discrete_lagrangian_gradient(chain4, scheme, qbar, dt, step) - exact).max()
              for step in (2e-3, 1e-3)]
    assert errors[1] > 0.0
    assert 3.5 <= errors[0] / errors[1] <= 4.5


def test_difference_del_vanishes_at_dense_root(double_pendulum):
    scheme, dt = trapezoidal(), 0.01
    config = SolverConfig(tol=1e-10)
    state = initial_state(double_pendulum, [0.6, -0.4], [0.5, 1.0])
    nxt, _ = dense_step(double_pendulum, scheme, state, dt=dt, config=config)
    residuals, p_next = fd_del(double_pendulum, scheme, np.vstack([state.q, nxt.q]), state.p, dt=dt)
    assert np.abs(residuals).max() <= 10 * config.tol
    assert_allclose(p_next, nxt.p, atol=1e-7)
