import numpy as np
import pytest
from numpy.testing import assert_allclose

from galint.commands.check import relative_error
from galint.constraints import ConstraintSet, JointLock
from galint.del_equations import (
    DiscreteState,
    constrained_residual,
    discrete_momentum,
    evaluate_del,
    initial_state,
    momentum_from_velocity,
    sample_controls,
)
from galint.errors import DimensionMismatch
from galint.forces import ForceSum, JointDamping, JointTorques, QuadraticDrag
from galint.galerkin import lobatto, simpson, trapezoidal
from galint.linearize import mass_matrix
from galint.model import chain_model, random_tree
from galint.oracle import fd_del

SCHEMES = [trapezoidal(), simpson(), lobatto(3)]


@pytest.mark.parametrize("scheme", SCHEMES, ids=lambda s: s.name)
def test_equilibrium_is_a_fixed_point(scheme, pendulum):
    qbar = np.zeros((scheme.num_nodes, 1))
    out = evaluate_del(pendulum, scheme, qbar, np.zeros(1), dt=0.01)
    assert_allclose(out.residuals, 0.0, atol=1e-12)
    assert_allclose(out.next_momentum, 0.0, atol=1e-12)


@pytest.mark.parametrize("scheme", SCHEMES, ids=lambda s: s.name)
def test_matches_finite_difference_oracle(scheme, chain4, control_points, rng):
    dt = 0.02
    qbar, _ = control_points(scheme, 4, dt)
    p = rng.normal(size=4)
    out = evaluate_del(chain4, scheme, qbar, p, dt=dt)
    residuals, p_next = fd_del(chain4, scheme, qbar, p, dt=dt)
    assert relative_error(out.residuals, residuals) <= 1e-6
    assert relative_error(out.next_momentum, p_next) <= 1e-6
    assert out.residuals.shape == (scheme.s, 4)
    assert_allclose(discrete_momentum(chain4, scheme, qbar, dt=dt), out.next_momentum)


def test_random_tree_with_forces_matches_oracle(tree, control_points, rng):
    scheme = simpson()
    dt = 0.01
    forces = ForceSum(JointDamping(0.3), QuadraticDrag(0.5), JointTorques())

    def controls(t):
        return np.cos(3.0 * t) * np.arange(1, tree.n + 1)

    qbar, _ = control_points(scheme, tree.n, dt)
    p = rng.normal(size=tree.n)
    out = evaluate_del(tree, scheme, qbar, p, forces, controls, dt=dt, t0=0.4)
    residuals, p_next = fd_del(tree, scheme, qbar, p, forces, controls, dt=dt, t0=0.4)
    assert relative_error(out.residuals, residuals) <= 1e-6
    assert relative_error(out.next_momentum, p_next) <= 1e-6
    assert_allclose(out.times, 0.4 + scheme.nodes * dt)


def test_uniform_rotation_conserves_momentum():
    model = chain_model(1).with_gravity((0.0, 0.0, 0.0))
    scheme = lobatto(4)
    dt, omega = 0.05, 1.7
    qbar = 0.3 + omega * dt * scheme.nodes[:, None]
    p = momentum_from_velocity(model, [0.3], [omega])
    out = evaluate_del(model, scheme, qbar, p, dt=dt)
    assert_allclose(out.next_momentum, p, rtol=1e-11)
    assert_allclose(out.residuals, 0.0, atol=1e-11)


def test_each_body_is_visited_a_constant_number_of_times(rng):
    model = random_tree(rng, 9)
    scheme = simpson()
    out = evaluate_del(model, scheme, rng.normal(size=(3, 9)), np.zeros(9), dt=0.01)
    assert np.all(out.visits == 2)


def test_shape_errors(chain4):
    scheme = trapezoidal()
    with pytest.raises(DimensionMismatch):
        evaluate_del(chain4, scheme, np.zeros((3, 4)), np.zeros(4), dt=0.01)
    with pytest.raises(DimensionMismatch):
        evaluate_del(chain4, scheme, np.zeros((2, 4)), np.zeros(3), dt=0.01)
    with pytest.raises(DimensionMismatch):
        DiscreteState(q=np.zeros(2), p=np.zeros(3))


def test_constrained_residual_reduces_without_multipliers(double_pendulum, control_points, rng):
    scheme = simpson()
    dt = 0.01
    qbar, _ = control_points(scheme, 2, dt)
    p = rng.normal(size=2)
    lock = ConstraintSet(JointLock(1, 0.0))
    res = constrained_residual(double_pendulum, scheme, qbar, p, None, lock, np.zeros((2, 1)), dt=dt)
    assert_allclose(res.dynamics, evaluate_del(double_pendulum, scheme, qbar, p, dt=dt).residuals)
    assert res.constraint.shape == (2, 1)

    lam = np.array([[0.5], [-1.0]])
    shifted = constrained_residual(double_pendulum, scheme, qbar, p, None, lock, lam, dt=dt)
    A = lock.force_matrix(double_pendulum, qbar[1])
    assert_allclose(shifted.dynamics[1] - res.dynamics[1], A @ lam[1])
    with pytest.raises(DimensionMismatch):
        constrained_residual(double_pendulum, scheme, qbar, p, None, lock, np.zeros((1, 1)), dt=dt)


def test_violated_constraint_residual(double_pendulum):
    scheme = trapezoidal()
    qbar = np.array([[0.5, 0.0], [0.5, 0.0]])
    res = constrained_residual(double_pendulum, scheme, qbar, np.zeros(2), None, JointLock(0, 0.3),
                               np.zeros(1), dt=0.01)
    assert res.constraint[0, 0] == pytest.approx(0.2)


def test_initial_state_uses_mass_matrix(tree, rng):
    q, qdot = rng.normal(size=tree.n), rng.normal(size=tree.n)
    state = initial_state(tree, q, qdot)
    assert state.k == 0
    assert_allclose(state.p, mass_matrix(tree, q) @ qdot, atol=1e-12)


def test_sample_controls():
    times = np.array([0.0, 0.5])
    assert sample_controls(None, times) == [None, None]
    const = sample_controls(np.array([1.0, 2.0]), times)
    assert_allclose(const[1], [1.0, 2.0])
    varying = sample_controls(lambda t: np.array([t]), times)
    assert_allclose(varying[1], [0.5])
