"""Rigid-body quadrotor model: X-frame motor mixing and a semi-implicit Euler step on SO(3)."""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np

from fxflight.domain.dynamics.schemas import QuadrotorState, WrenchBody
from fxflight.domain.network.schemas import MotorCommand
from fxflight.lib.exceptions import InfeasibleHoverError, InvalidParameterError, NonFiniteStateError

if TYPE_CHECKING:
    import numpy.typing as npt

    from fxflight.domain.dynamics.schemas import QuadrotorParams
    from fxflight.domain.network.schemas import FloatArray

__all__ = (
    "allocate_thrusts",
    "hover_command",
    "mixing_matrix",
    "motor_mix",
    "rodrigues",
    "skew",
    "step",
)


def skew(w: npt.ArrayLike) -> FloatArray:
    """Matrix form of ``w x .``."""
    x, y, z = np.asarray(w, dtype=np.float64).tolist()
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rodrigues(phi: npt.ArrayLike) -> FloatArray:
    """``exp(skew(phi))``: rotation by ``|phi|`` about ``phi``. A zero vector gives the identity exactly."""
    vec = np.asarray(phi, dtype=np.float64)
    theta = math.sqrt(math.fsum((vec * vec).tolist()))
    if theta == 0.0:
        return np.eye(3)
    k = skew(vec / theta)
    # 1 - cos(theta) without cancellation for small angles
    return np.eye(3) + math.sin(theta) * k + (2.0 * math.sin(theta / 2.0) ** 2) * (k @ k)


def _levers(params: QuadrotorParams) -> tuple[FloatArray, FloatArray, FloatArray]:
    d = params.arm_length / math.sqrt(2.0)
    x = np.array([d * m.x_sign for m in params.motor_layout])
    y = np.array([d * m.y_sign for m in params.motor_layout])
    spin = np.array([params.torque_coefficient * m.spin for m in params.motor_layout])
    return x, y, spin


def mixing_matrix(params: QuadrotorParams) -> FloatArray:
    """Map from per-motor thrusts to ``(f_z, tau_x, tau_y, tau_z)``.

    A motor at body ``(x, y, 0)`` pushing along body z yields torque ``(y*T, -x*T, 0)``; reaction torque is
    ``torque_coefficient * spin * T`` about z.
    """
    x, y, spin = _levers(params)
    return np.stack([np.ones(4), y, -x, spin])


def motor_mix(cmd: MotorCommand, params: QuadrotorParams) -> WrenchBody:
    thrusts = cmd.f_hat * params.max_motor_thrust
    x, y, spin = _levers(params)
    # exactly rounded sums: symmetric commands cancel to zero torque
    return WrenchBody(
        thrust=math.fsum(thrusts.tolist()),
        torque=np.array(
            [
                math.fsum((y * thrusts).tolist()),
                math.fsum((-x * thrusts).tolist()),
                math.fsum((spin * thrusts).tolist()),
            ],
        ),
    )


def allocate_thrusts(thrust: float, torque: npt.ArrayLike, params: QuadrotorParams) -> FloatArray:
    """Per-motor thrusts realizing a wrench, through the inverse mixing matrix; not clipped."""
    demand = np.concatenate([[thrust], np.asarray(torque, dtype=np.float64)])
    return np.linalg.solve(mixing_matrix(params), demand)


def step(s: QuadrotorState, w: WrenchBody, params: QuadrotorParams, dt: float) -> QuadrotorState:
    """Advance the Newton-Euler equations by ``dt``.

    Velocities update first and the new velocities drive position and attitude; attitude moves along the
    exponential map so ``R`` stays a rotation.

    Raises:
        InvalidParameterError: if ``dt`` is not positive.
        NonFiniteStateError: if the new state holds NaN or Inf.
    """
    if not dt > 0.0:
        msg = f"time step must be positive, got {dt}"
        raise InvalidParameterError(msg)
    inertia = params.inertia_diag
    accel = params.gravity + s.rotation[:, 2] * (w.thrust / params.mass)
    omega_dot = (w.torque - np.cross(s.omega, inertia * s.omega)) / inertia
    velocity = s.velocity + accel * dt
    position = s.position + velocity * dt
    omega = s.omega + omega_dot * dt
    rotation = s.rotation @ rodrigues(omega * dt)
    nxt = QuadrotorState(position, velocity, rotation, omega)
    if not nxt.is_finite():
        msg = f"non-finite state after step from position {s.position.tolist()} velocity {s.velocity.tolist()}"
        raise NonFiniteStateError(msg)
    return nxt


def hover_command(params: QuadrotorParams) -> MotorCommand:
    """Equal motor fractions whose total thrust balances gravity.

    Raises:
        InfeasibleHoverError: if four motors at full thrust cannot lift the vehicle.
    """
    budget = 4.0 * params.max_motor_thrust
    if params.weight > budget:
        msg = f"weight {params.weight:.4g} N exceeds the thrust budget {budget:.4g} N"
        raise InfeasibleHoverError(msg)
    return MotorCommand(np.full(4, params.weight / budget))
