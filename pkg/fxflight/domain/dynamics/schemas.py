from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Final, NamedTuple

import numpy as np

from fxflight.lib.exceptions import DimensionMismatchError, InvalidParameterError

if TYPE_CHECKING:
    import numpy.typing as npt

    from fxflight.domain.network.schemas import FloatArray

__all__ = (
    "DEFAULT_MOTOR_LAYOUT",
    "GRAVITY",
    "MotorSpec",
    "QuadrotorParams",
    "QuadrotorState",
    "WrenchBody",
)

GRAVITY: Final = 9.81


class MotorSpec(NamedTuple):
    """Motor placement on an X frame: arm direction signs in the body x/y plane and propeller spin (+1 counter-clockwise)."""

    x_sign: int
    y_sign: int
    spin: int


DEFAULT_MOTOR_LAYOUT: Final = (
    MotorSpec(1, -1, -1),
    MotorSpec(-1, -1, 1),
    MotorSpec(-1, 1, -1),
    MotorSpec(1, 1, 1),
)
"""Front-right, back-right, back-left, front-left."""


def _vector(values: npt.ArrayLike, shape: tuple[int, ...], name: str) -> FloatArray:
    array = np.array(values, dtype=np.float64)
    if array.shape != shape:
        msg = f"{name} must have shape {shape}, got {array.shape}"
        raise DimensionMismatchError(msg)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, slots=True)
class QuadrotorParams:
    """Rigid-body and actuator constants; defaults are nominal Crazyflie-class values."""

    mass: float = 0.033
    inertia: FloatArray = field(default_factory=lambda: np.diag([1.4e-5, 1.4e-5, 2.2e-5]))
    gravity: FloatArray = field(default_factory=lambda: np.array([0.0, 0.0, -GRAVITY]))
    arm_length: float = 0.046
    max_motor_thrust: float = 0.15
    torque_coefficient: float = 0.006
    motor_layout: tuple[MotorSpec, ...] = DEFAULT_MOTOR_LAYOUT

    def __post_init__(self) -> None:
        inertia = np.array(self.inertia, dtype=np.float64)
        if inertia.shape == (3,):
            inertia = np.diag(inertia)
        if inertia.shape != (3, 3) or np.any(inertia != np.diag(np.diag(inertia))):
            msg = "inertia must be a diagonal 3x3 matrix or its diagonal"
            raise DimensionMismatchError(msg)
        inertia.flags.writeable = False
        object.__setattr__(self, "inertia", inertia)
        object.__setattr__(self, "gravity", _vector(self.gravity, (3,), "gravity"))
        object.__setattr__(self, "motor_layout", tuple(MotorSpec(*m) for m in self.motor_layout))
        if self.mass <= 0:
            msg = f"mass must be positive, got {self.mass}"
            raise InvalidParameterError(msg)
        if np.any(np.diag(inertia) <= 0):
            msg = f"inertia diagonal must be positive, got {np.diag(inertia).tolist()}"
            raise InvalidParameterError(msg)
        if self.max_motor_thrust <= 0:
            msg = f"max_motor_thrust must be positive, got {self.max_motor_thrust}"
            raise InvalidParameterError(msg)
        if self.arm_length <= 0:
            msg = f"arm_length must be positive, got {self.arm_length}"
            raise InvalidParameterError(msg)
        if len(self.motor_layout) != 4:
            msg = f"an X frame has 4 motors, got {len(self.motor_layout)}"
            raise DimensionMismatchError(msg)

    @property
    def inertia_diag(self) -> FloatArray:
        return np.diag(self.inertia)

    @property
    def weight(self) -> float:
        """Thrust needed to hover, ``m * |g|``."""
        return self.mass * math.hypot(*self.gravity.tolist())


@dataclass(frozen=True, slots=True)
class QuadrotorState:
    """Position and velocity in the world frame, body-to-world rotation, body angular velocity."""

    position: FloatArray
    velocity: FloatArray
    rotation: FloatArray
    omega: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", _vector(self.position, (3,), "position"))
        object.__setattr__(self, "velocity", _vector(self.velocity, (3,), "velocity"))
        object.__setattr__(self, "rotation", _vector(self.rotation, (3, 3), "rotation"))
        object.__setattr__(self, "omega", _vector(self.omega, (3,), "omega"))

    @classmethod
    def at_rest(cls, position: npt.ArrayLike) -> QuadrotorState:
        """Level and motionless at ``position``."""
        return cls(position, np.zeros(3), np.eye(3), np.zeros(3))

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.position))
            and np.all(np.isfinite(self.velocity))
            and np.all(np.isfinite(self.rotation))
            and np.all(np.isfinite(self.omega)),
        )

    def orthonormality_error(self) -> float:
        """``max |R^T R - I|``."""
        return float(np.max(np.abs(self.rotation.T @ self.rotation - np.eye(3))))

    def as_row(self) -> FloatArray:
        """``(x[3], v[3], R row-major[9], omega[3])``."""
        return np.concatenate([self.position, self.velocity, self.rotation.ravel(), self.omega])


@dataclass(frozen=True, slots=True)
class WrenchBody:
    """Collective thrust along body z and body torque."""

    thrust: float
    torque: FloatArray

    def __post_init__(self) -> None:
        if not self.thrust >= 0.0:
            msg = f"collective thrust must be non-negative, got {self.thrust}"
            raise InvalidParameterError(msg)
        object.__setattr__(self, "thrust", float(self.thrust))
        object.__setattr__(self, "torque", _vector(self.torque, (3,), "torque"))

    @property
    def force(self) -> FloatArray:
        """Thrust as a body-frame vector ``(0, 0, f_z)``."""
        return np.array([0.0, 0.0, self.thrust])
