"""Flight controllers the closed loop can drive: the deepsets policy on either arithmetic path, and a cascaded baseline."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Protocol

import numpy as np

from fxflight.domain.dynamics.schemas import QuadrotorState
from fxflight.domain.dynamics.services import allocate_thrusts
from fxflight.domain.fixedpoint.services import dequantize_array, quantize_array
from fxflight.domain.network.schemas import NEIGHBOR_OBS_DIM, MotorCommand
from fxflight.domain.network.services import action_to_motor, deepsets_forward_float
from fxflight.domain.observation.services import build_neighbor_observations, build_self_observation
from fxflight.domain.quantizer.services import deepsets_forward_fixed_batch
from fxflight.domain.simharness.schemas import BaselineGains, ControllerKind

if TYPE_CHECKING:
    from collections.abc import Sequence

    import numpy.typing as npt

    from fxflight.domain.dynamics.schemas import QuadrotorParams
    from fxflight.domain.network.schemas import ActionVec, DeepsetsPolicy, FloatArray
    from fxflight.domain.observation.schemas import WorldSnapshot
    from fxflight.domain.quantizer.schemas import QuantizedPolicy

__all__ = (
    "BaselineController",
    "Controller",
    "FixedPolicyController",
    "FloatPolicyController",
    "baseline_controller",
)


class Controller(Protocol):
    kind: ControllerKind

    def __call__(self, world: WorldSnapshot, q: int, max_neighbors: int) -> tuple[ActionVec, MotorCommand]:
        """Action and motor command for quadrotor ``q``."""
        ...


class _PolicyController(ABC):
    """Observation building and the action-to-motor transform shared by both arithmetic paths."""

    kind: ControllerKind

    @abstractmethod
    def action(self, self_obs: FloatArray, neighbors: Sequence[FloatArray]) -> ActionVec:
        """Policy output for one observation set."""

    def __call__(self, world: WorldSnapshot, q: int, max_neighbors: int) -> tuple[ActionVec, MotorCommand]:
        a = self.action(build_self_observation(world, q), build_neighbor_observations(world, q, max_neighbors))
        return a, action_to_motor(a)


@dataclass(frozen=True, slots=True)
class FloatPolicyController(_PolicyController):
    policy: DeepsetsPolicy
    kind: ControllerKind = ControllerKind.FLOAT

    def action(self, self_obs: FloatArray, neighbors: Sequence[FloatArray]) -> ActionVec:
        return deepsets_forward_float(self.policy, self_obs, list(neighbors))


@dataclass(frozen=True, slots=True)
class FixedPolicyController(_PolicyController):
    """Quantizes each observation into the policy's format and runs the integer-only forward pass."""

    policy: QuantizedPolicy
    kind: ControllerKind = ControllerKind.FIXED

    def action(self, self_obs: FloatArray, neighbors: Sequence[FloatArray]) -> ActionVec:
        fmt = self.policy.format
        nbr = np.asarray(neighbors, dtype=np.float64).reshape(1, -1, NEIGHBOR_OBS_DIM)
        raws = deepsets_forward_fixed_batch(
            self.policy,
            quantize_array(np.reshape(self_obs, (1, -1)), fmt, what="self observation"),
            quantize_array(nbr, fmt, what="neighbor observation"),
        )
        return dequantize_array(raws[0], fmt)


def _clip_norm(v: FloatArray, limit: float) -> FloatArray:
    norm = float(np.linalg.norm(v))
    return v * (limit / norm) if norm > limit else v


def _vee(m: FloatArray) -> FloatArray:
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def baseline_controller(
    state: QuadrotorState,
    setpoint: npt.ArrayLike,
    params: QuadrotorParams,
    gains: BaselineGains | None = None,
) -> MotorCommand:
    """Cascaded position, attitude and allocation loops.

    The position loop turns the offset into a speed-limited velocity demand and then an acceleration demand.
    The attitude loop tracks the body z axis that acceleration needs (heading held along world x) on SO(3).
    Collective thrust and torque go through the inverse motor mix; motor thrusts are clipped to what the motors deliver.
    """
    gains = gains or BaselineGains()
    offset = np.asarray(setpoint, dtype=np.float64) - state.position
    v_des = _clip_norm(gains.position * offset, gains.max_speed)
    a_des = _clip_norm(gains.velocity * (v_des - state.velocity), gains.max_accel)
    force = params.mass * (a_des - params.gravity)
    b3 = force / np.linalg.norm(force)
    b2 = np.cross(b3, np.array([1.0, 0.0, 0.0]))
    b2 /= np.linalg.norm(b2)
    r_des = np.column_stack([np.cross(b2, b3), b2, b3])
    rotation = state.rotation
    e_r = 0.5 * _vee(r_des.T @ rotation - rotation.T @ r_des)
    inertia = params.inertia_diag
    torque = inertia * (-gains.attitude * e_r - gains.rate * state.omega) + np.cross(state.omega, inertia * state.omega)
    thrust = float(force @ rotation[:, 2])
    motors = np.clip(allocate_thrusts(thrust, torque, params), 0.0, params.max_motor_thrust)
    return MotorCommand(np.clip(motors / params.max_motor_thrust, 0.0, 1.0))


@dataclass(frozen=True, slots=True)
class BaselineController:
    """Logs ``a = 2 f_hat - 1`` as its action so every log row has the same columns."""

    params: QuadrotorParams
    gains: BaselineGains = field(default_factory=BaselineGains)
    kind: ControllerKind = ControllerKind.BASELINE

    def __call__(self, world: WorldSnapshot, q: int, max_neighbors: int) -> tuple[ActionVec, MotorCommand]:
        state = QuadrotorState(world.positions[q], world.velocities[q], world.rotations[q], world.omegas[q])
        cmd = baseline_controller(state, world.targets[q], self.params, self.gains)
        return 2.0 * cmd.f_hat - 1.0, cmd

