from __future__ import annotations

import math

import numpy as np
import pytest

from fxflight.domain.dynamics.schemas import GRAVITY, QuadrotorParams, QuadrotorState, WrenchBody
from fxflight.domain.dynamics.services import (
    allocate_thrusts,
    hover_command,
    mixing_matrix,
    motor_mix,
    rodrigues,
    skew,
    step,
)
from fxflight.domain.network.schemas import MotorCommand
from fxflight.lib.exceptions import (
    DimensionMismatchError,
    InfeasibleHoverError,
    InvalidParameterError,
    NonFiniteStateError,
)


def _brute_force_wrench(f_hat: list[float], params: QuadrotorParams) -> tuple[float, np.ndarray]:
    d = params.arm_length / math.sqrt(2.0)
    thrust, torque = 0.0, np.zeros(3)
    for value, motor in zip(f_hat, params.motor_layout, strict=True):
        t = value * params.max_motor_thrust
        lever = np.array([d * motor.x_sign, d * motor.y_sign, 0.0])
        torque += np.cross(lever, [0.0, 0.0, t]) + np.array([0.0, 0.0, params.torque_coefficient * motor.spin * t])
        thrust += t
    return thrust, torque


def test_params_validation() -> None:
    with pytest.raises(InvalidParameterError):
        QuadrotorParams(mass=0.0)
    with pytest.raises(InvalidParameterError):
        QuadrotorParams(inertia=np.array([1.0, -1.0, 1.0]))
    with pytest.raises(DimensionMismatchError):
        QuadrotorParams(inertia=np.ones((3, 3)))
    with pytest.raises(InvalidParameterError):
        QuadrotorParams(max_motor_thrust=0.0)
    assert QuadrotorParams(inertia=np.array([1.0, 2.0, 3.0])).inertia_diag.tolist() == [1.0, 2.0, 3.0]


def test_wrench_rejects_negative_thrust() -> None:
    with pytest.raises(InvalidParameterError):
        WrenchBody(-0.1, np.zeros(3))
    assert WrenchBody(0.2, np.zeros(3)).force.tolist() == [0.0, 0.0, 0.2]


def test_symmetric_command_has_no_torque(params: QuadrotorParams) -> None:
    w = motor_mix(MotorCommand(np.full(4, 0.3)), params)
    assert w.torque.tolist() == [0.0, 0.0, 0.0]
    assert w.thrust == pytest.approx(4 * 0.3 * params.max_motor_thrust, rel=1e-15)


def test_zero_command_has_zero_wrench(params: QuadrotorParams) -> None:
    w = motor_mix(MotorCommand(np.zeros(4)), params)
    assert w.thrust == 0.0
    assert w.torque.tolist() == [0.0, 0.0, 0.0]


@pytest.mark.parametrize(
    "f_hat",
    [[1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0], [0.2, 0.9, 0.4, 0.1], [1.0, 1.0, 0.0, 0.0]],
)
def test_motor_mix_matches_lever_arms(f_hat: list[float], params: QuadrotorParams) -> None:
    w = motor_mix(MotorCommand(np.array(f_hat)), params)
    thrust, torque = _brute_force_wrench(f_hat, params)
    assert w.thrust == pytest.approx(thrust, abs=1e-15)
    np.testing.assert_allclose(w.torque, torque, atol=1e-15)


def test_opposite_spin_pair_only_yaws(params: QuadrotorParams) -> None:
    w = motor_mix(MotorCommand(np.array([1.0, 0.0, 1.0, 0.0])), params)
    assert w.torque[0] == 0.0
    assert w.torque[1] == 0.0
    assert w.torque[2] == pytest.approx(-2 * params.torque_coefficient * params.max_motor_thrust)


def test_allocation_inverts_mixing(params: QuadrotorParams) -> None:
    thrusts = np.array([0.05, 0.07, 0.02, 0.11])
    demand = mixing_matrix(params) @ thrusts
    np.testing.assert_allclose(allocate_thrusts(demand[0], demand[1:], params), thrusts, atol=1e-15)


def test_skew_is_cross_product() -> None:
    w, v = np.array([0.3, -1.2, 2.0]), np.array([1.0, 0.5, -0.25])
    np.testing.assert_allclose(skew(w) @ v, np.cross(w, v), atol=1e-15)


def test_rodrigues() -> None:
    assert np.array_equal(rodrigues(np.zeros(3)), np.eye(3))
    quarter = rodrigues(np.array([0.0, 0.0, math.pi / 2]))
    np.testing.assert_allclose(quarter, [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], atol=1e-15)
    r = rodrigues(np.array([0.4, -0.7, 1.1]))
    np.testing.assert_allclose(r.T @ r, np.eye(3), atol=1e-15)


def test_step_rejects_bad_dt(params: QuadrotorParams) -> None:
    with pytest.raises(InvalidParameterError):
        step(QuadrotorState.at_rest(np.zeros(3)), WrenchBody(0.0, np.zeros(3)), params, 0.0)


def test_step_detects_non_finite(params: QuadrotorParams) -> None:
    s = QuadrotorState(np.zeros(3), np.array([1e308, 0.0, 0.0]), np.eye(3), np.zeros(3))
    with pytest.raises(NonFiniteStateError):
        step(s, WrenchBody(0.0, np.array([1e308, 0.0, 0.0])), params, 10.0)


def test_free_fall_single_step(params: QuadrotorParams) -> None:
    s = step(QuadrotorState.at_rest(np.array([0.0, 0.0, 10.0])), WrenchBody(0.0, np.zeros(3)), params, 0.01)
    assert s.velocity[2] == pytest.approx(-0.0981, abs=1e-15)
    assert s.position[2] == pytest.approx(10.0 - 0.0981 * 0.01, abs=1e-15)


def test_free_fall_first_order_convergence(params: QuadrotorParams) -> None:
    duration = 1.0
    errors = []
    for dt in (0.02, 0.01, 0.005):
        s = QuadrotorState.at_rest(np.array([0.0, 0.0, 10.0]))
        zero = WrenchBody(0.0, np.zeros(3))
        for _ in range(round(duration / dt)):
            s = step(s, zero, params, dt)
        errors.append(abs(s.position[2] - (10.0 - 0.5 * GRAVITY * duration**2)))
    assert errors[0] / errors[1] == pytest.approx(2.0, rel=1e-6)
    assert errors[1] / errors[2] == pytest.approx(2.0, rel=1e-6)


def test_principal_axis_spin_has_no_gyroscopic_torque(params: QuadrotorParams) -> None:
    s = QuadrotorState(np.zeros(3), np.zeros(3), np.eye(3), np.array([0.0, 0.0, 7.0]))
    nxt = step(s, WrenchBody(0.0, np.zeros(3)), params, 0.01)
    assert nxt.omega.tolist() == [0.0, 0.0, 7.0]


def test_hover_command_halfway() -> None:
    params = QuadrotorParams(mass=2 * 0.15 / GRAVITY)
    assert hover_command(params).f_hat.tolist() == pytest.approx([0.5] * 4, rel=1e-15)


def test_hover_command_massless_limit() -> None:
    assert np.all(hover_command(QuadrotorParams(mass=1e-12)).f_hat < 1e-9)


def test_hover_command_closure(params: QuadrotorParams) -> None:
    w = motor_mix(hover_command(params), params)
    assert w.thrust == pytest.approx(params.mass * GRAVITY, rel=1e-14)
    assert w.torque.tolist() == [0.0, 0.0, 0.0]


def test_hover_infeasible() -> None:
    with pytest.raises(InfeasibleHoverError):
        hover_command(QuadrotorParams(mass=1.0))


def test_hover_is_a_fixed_point(params: QuadrotorParams) -> None:
    wrench = motor_mix(hover_command(params), params)
    start = np.array([1.0, 2.0, 1.5])
    s = QuadrotorState.at_rest(start)
    for _ in range(10_000):
        s = step(s, wrench, params, 0.01)
    assert np.max(np.abs(s.position - start)) < 1e-9
    assert np.max(np.abs(s.velocity)) < 1e-9
    assert np.array_equal(s.rotation, np.eye(3))
    assert s.omega.tolist() == [0.0, 0.0, 0.0]


def test_deterministic(params: QuadrotorParams) -> None:
    wrench = WrenchBody(0.4, np.array([1e-5, -2e-5, 3e-6]))

    def _run() -> QuadrotorState:
        s = QuadrotorState.at_rest(np.array([1.0, 1.0, 1.0]))
        for _ in range(500):
            s = step(s, wrench, params, 0.01)
        return s

    a, b = _run(), _run()
    assert np.array_equal(a.as_row(), b.as_row())


@pytest.mark.slow
def test_rotation_stays_orthonormal(params: QuadrotorParams) -> None:
    wrench = WrenchBody(params.weight, np.array([2e-7, -1e-7, 5e-8]))
    s = QuadrotorState(np.zeros(3), np.zeros(3), np.eye(3), np.array([3.0, -2.0, 5.0]))
    for index in range(100_000):
        s = step(s, wrench, params, 0.001)
        if index == 0:
            assert s.orthonormality_error() <= 1e-9
        # keep position and velocity bounded; only the attitude is under test
        s = QuadrotorState(np.zeros(3), np.zeros(3), s.rotation, s.omega)
    assert s.orthonormality_error() < 1e-6
    assert math.isclose(np.linalg.det(s.rotation), 1.0, abs_tol=1e-6)
