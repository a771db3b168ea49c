from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np

from fxflight.lib.exceptions import InvalidParameterError, QuadrotorIndexError

if TYPE_CHECKING:
    from fxflight.domain.observation.schemas import NeighborObservation, SelfObservation, WorldSnapshot

__all__ = ("build_neighbor_observations", "build_self_observation")


def _check_index(world: WorldSnapshot, q: int) -> None:
    if not 0 <= q < len(world):
        msg = f"quadrotor index {q} outside [0, {len(world) - 1}]"
        raise QuadrotorIndexError(msg)


def build_self_observation(world: WorldSnapshot, q: int) -> SelfObservation:
    _check_index(world, q)
    return np.concatenate(
        [
            world.positions[q] - world.targets[q],
            world.velocities[q],
            world.rotations[q].ravel(),
            world.omegas[q],
        ],
    )


def build_neighbor_observations(world: WorldSnapshot, q: int, k: int) -> list[NeighborObservation]:
    """Relative state of the ``k`` nearest other quadrotors, nearest first; equal distances keep index order."""
    _check_index(world, q)
    if k < 0:
        msg = f"neighbor count must be non-negative, got {k}"
        raise InvalidParameterError(msg)
    others = np.array([i for i in range(len(world)) if i != q], dtype=np.int64)
    if k == 0 or others.size == 0:
        return []
    offsets = world.positions[q] - world.positions[others]
    distances = np.linalg.norm(offsets, axis=1)
    # lexsort keys run last-to-first: distance, then index
    order = others[np.lexsort((others, distances))][:k]
    return [
        np.concatenate([world.positions[q] - world.positions[i], world.velocities[q] - world.velocities[i]])
        for i in order
    ]
