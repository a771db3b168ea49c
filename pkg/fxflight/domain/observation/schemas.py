from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from fxflight.domain.network.schemas import FloatArray
from fxflight.lib.exceptions import DimensionMismatchError

if TYPE_CHECKING:
    from collections.abc import Sequence

    import numpy.typing as npt

    from fxflight.domain.dynamics.schemas import QuadrotorState

__all__ = ("NeighborObservation", "SelfObservation", "WorldSnapshot")

SelfObservation = FloatArray
"""18 values: position relative to the target, world velocity, row-major rotation, body angular velocity."""

NeighborObservation = FloatArray
"""6 values: own position minus neighbor position, own velocity minus neighbor velocity."""


def _stacked(values: npt.ArrayLike, tail: tuple[int, ...], name: str) -> FloatArray:
    array = np.array(values, dtype=np.float64)
    if array.ndim != 1 + len(tail) or array.shape[1:] != tail:
        msg = f"{name} must have shape (count, {', '.join(map(str, tail))}), got {array.shape}"
        raise DimensionMismatchError(msg)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, slots=True)
class WorldSnapshot:
    """State of every quadrotor at one tick; row ``i`` of each array belongs to quadrotor ``i``."""

    positions: FloatArray
    velocities: FloatArray
    rotations: FloatArray
    omegas: FloatArray
    targets: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "positions", _stacked(self.positions, (3,), "positions"))
        object.__setattr__(self, "velocities", _stacked(self.velocities, (3,), "velocities"))
        object.__setattr__(self, "rotations", _stacked(self.rotations, (3, 3), "rotations"))
        object.__setattr__(self, "omegas", _stacked(self.omegas, (3,), "omegas"))
        object.__setattr__(self, "targets", _stacked(self.targets, (3,), "targets"))
        count = self.positions.shape[0]
        if count == 0:
            msg = "a world snapshot needs at least one quadrotor"
            raise DimensionMismatchError(msg)
        for name in ("velocities", "rotations", "omegas", "targets"):
            if getattr(self, name).shape[0] != count:
                msg = f"{name} describes {getattr(self, name).shape[0]} quadrotors, positions describe {count}"
                raise DimensionMismatchError(msg)

    @classmethod
    def from_states(cls, states: Sequence[QuadrotorState], targets: npt.ArrayLike) -> WorldSnapshot:
        return cls(
            positions=[s.position for s in states],
            velocities=[s.velocity for s in states],
            rotations=[s.rotation for s in states],
            omegas=[s.omega for s in states],
            targets=np.reshape(np.asarray(targets, dtype=np.float64), (len(states), 3)),
        )

    def __len__(self) -> int:
        return int(self.positions.shape[0])
