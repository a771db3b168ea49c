from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Final

import numpy as np

from fxflight.domain.fixedpoint.schemas import QFormat, RawArray  # noqa: TC001
from fxflight.domain.network.schemas import NEIGHBOR_OBS_DIM, SELF_OBS_DIM, Activation
from fxflight.lib.exceptions import DimensionMismatchError, InvalidParameterError
from fxflight.lib.schema import BaseStruct, DocumentStruct

if TYPE_CHECKING:
    from collections.abc import Iterator

    from fxflight.domain.network.schemas import FloatArray

__all__ = (
    "FLIGHT_AREA",
    "CalibrationReport",
    "CalibrationRow",
    "Interval",
    "ObservationBatch",
    "ObservationRanges",
    "QuantizedLayer",
    "QuantizedMlp",
    "QuantizedPolicy",
)

FLIGHT_AREA: Final = (6.5, 4.5, 2.7)
"""Extent of the flight volume in metres along x, y and z."""

Interval = tuple[float, float]
Box = tuple[Interval, Interval, Interval]


@dataclass(frozen=True, slots=True)
class QuantizedLayer:
    weight: RawArray
    bias: RawArray
    activation: Activation

    def __post_init__(self) -> None:
        self.weight.flags.writeable = False
        self.bias.flags.writeable = False

    @property
    def in_dim(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weight.shape[0])


@dataclass(frozen=True, slots=True)
class QuantizedMlp:
    layers: tuple[QuantizedLayer, ...]

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def parameter_count(self) -> int:
        return sum(layer.weight.size + layer.bias.size for layer in self.layers)

    @property
    def mac_count(self) -> int:
        return sum(layer.weight.size for layer in self.layers)


@dataclass(frozen=True, slots=True)
class QuantizedPolicy:
    """Integer counterpart of a :class:`DeepsetsPolicy`; every MLP shares ``format``."""

    self_encoder: QuantizedMlp
    neighbor_mlp: QuantizedMlp
    head: QuantizedMlp
    format: QFormat

    def mlps(self) -> dict[str, QuantizedMlp]:
        return {"self_encoder": self.self_encoder, "neighbor_mlp": self.neighbor_mlp, "head": self.head}

    def mac_count(self, neighbors: int = 0) -> int:
        """Multiply-accumulate operations of one inference with ``neighbors`` neighbor observations."""
        return self.self_encoder.mac_count + neighbors * self.neighbor_mlp.mac_count + self.head.mac_count

    @property
    def memory_bytes(self) -> int:
        """Storage for every weight and bias at the word width."""
        count = sum(mlp.parameter_count for mlp in self.mlps().values())
        return count * math.ceil(self.format.word_bits / 8)


def _default_position() -> Box:
    return tuple((-extent, extent) for extent in FLIGHT_AREA)  # type: ignore[return-value]


def _symmetric(bound: float) -> Box:
    return ((-bound, bound), (-bound, bound), (-bound, bound))


@dataclass(frozen=True, slots=True)
class ObservationRanges:
    """Per-component bounds of the operational envelope.

    Positions are relative (to the target, or to a neighbor) so they span the flight area in both directions.
    ``attitude`` bounds roll, pitch and yaw (ZYX Euler angles) of the sampled rotation.
    """

    position: Box = field(default_factory=_default_position)
    velocity: Box = field(default_factory=lambda: _symmetric(3.0))
    attitude: Box = field(default_factory=lambda: ((-math.pi, math.pi), (-math.pi / 2, math.pi / 2), (-math.pi, math.pi)))
    angular_velocity: Box = field(default_factory=lambda: _symmetric(10.0))
    neighbor_position: Box = field(default_factory=_default_position)
    neighbor_velocity: Box = field(default_factory=lambda: _symmetric(6.0))
    neighbors: int = 2

    def __post_init__(self) -> None:
        if self.neighbors < 0:
            msg = f"neighbor count must be non-negative, got {self.neighbors}"
            raise InvalidParameterError(msg)
        for name in ("position", "velocity", "attitude", "angular_velocity", "neighbor_position", "neighbor_velocity"):
            box = getattr(self, name)
            if len(box) != 3 or any(len(pair) != 2 or pair[0] > pair[1] for pair in box):
                msg = f"{name} must be three (low, high) pairs with low <= high, got {box}"
                raise InvalidParameterError(msg)

    @classmethod
    def zeros(cls, neighbors: int = 0) -> ObservationRanges:
        """Every range collapsed to zero: samples sit at the target with identity attitude."""
        zero: Box = ((0.0, 0.0), (0.0, 0.0), (0.0, 0.0))
        return cls(zero, zero, zero, zero, zero, zero, neighbors)

    def contains(self, self_obs: FloatArray, neighbors: FloatArray) -> bool:
        """Whether an observation lies inside the envelope (attitude checked through its Euler angles)."""
        if not (
            _inside(self_obs[0:3], self.position)
            and _inside(self_obs[3:6], self.velocity)
            and _inside(self_obs[15:18], self.angular_velocity)
        ):
            return False
        if not _inside(_euler_zyx(self_obs[6:15].reshape(3, 3)), self.attitude):
            return False
        return all(
            _inside(nbr[0:3], self.neighbor_position) and _inside(nbr[3:6], self.neighbor_velocity)
            for nbr in np.asarray(neighbors).reshape(-1, NEIGHBOR_OBS_DIM)
        )


def _inside(values: FloatArray, box: Box) -> bool:
    return all(low <= value <= high for value, (low, high) in zip(values.tolist(), box, strict=True))


def _euler_zyx(rotation: FloatArray) -> FloatArray:
    roll = math.atan2(rotation[2, 1], rotation[2, 2])
    pitch = -math.asin(min(max(rotation[2, 0], -1.0), 1.0))
    yaw = math.atan2(rotation[1, 0], rotation[0, 0])
    return np.array([roll, pitch, yaw])


@dataclass(frozen=True, slots=True)
class ObservationBatch:
    """``self_obs`` of shape ``(count, 18)`` with ``neighbors`` of shape ``(count, k, 6)``."""

    self_obs: FloatArray
    neighbors: FloatArray

    def __post_init__(self) -> None:
        if self.self_obs.ndim != 2 or self.self_obs.shape[1] != SELF_OBS_DIM:
            msg = f"self observations must have shape (count, {SELF_OBS_DIM}), got {self.self_obs.shape}"
            raise DimensionMismatchError(msg)
        if self.neighbors.ndim != 3 or self.neighbors.shape[::2] != (self.self_obs.shape[0], NEIGHBOR_OBS_DIM):
            msg = f"neighbor observations must have shape (count, k, {NEIGHBOR_OBS_DIM}), got {self.neighbors.shape}"
            raise DimensionMismatchError(msg)
        self.self_obs.flags.writeable = False
        self.neighbors.flags.writeable = False

    def __len__(self) -> int:
        return int(self.self_obs.shape[0])

    def __iter__(self) -> Iterator[tuple[FloatArray, list[FloatArray]]]:
        for obs, nbrs in zip(self.self_obs, self.neighbors, strict=True):
            yield obs, list(nbrs)


class CalibrationRow(BaseStruct, kw_only=True):
    frac_bits: int
    max_abs_error: float | None
    """``None`` when the fixed path overflowed at this ``frac_bits``."""
    overflow: bool = False

    @property
    def error(self) -> float:
        return math.inf if self.max_abs_error is None else self.max_abs_error


class CalibrationReport(DocumentStruct, kw_only=True):
    """Float-versus-fixed maximum output error for every swept fractional-bit count."""

    rows: list[CalibrationRow]
    selected_n: int
    sample_count: int
    seed: int
    neighbors: int
    word_bits: int
    accum_bits: int
    resample_per_n: bool = False
    saturate: bool = False

    @property
    def per_n(self) -> dict[int, float]:
        return {row.frac_bits: row.error for row in self.rows}

    @property
    def selected_error(self) -> float:
        return self.per_n[self.selected_n]

    @property
    def selected_format(self) -> QFormat:
        """The format the sweep evaluated at the selected ``n``."""
        return QFormat(
            frac_bits=self.selected_n,
            word_bits=self.word_bits,
            accum_bits=self.accum_bits,
            saturate=self.saturate,
        )
