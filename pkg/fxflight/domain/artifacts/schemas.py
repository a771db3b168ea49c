from __future__ import annotations

import msgspec

from fxflight.domain.network.schemas import Activation
from fxflight.domain.simharness.schemas import ControllerKind
from fxflight.lib.schema import BaseStruct, DocumentStruct

__all__ = (
    "BoundsDocument",
    "GainsDocument",
    "HelixDocument",
    "LayerDocument",
    "ParamsDocument",
    "QuantizedLayerDocument",
    "QuantizedWeightFile",
    "ScenarioDocument",
    "SetpointDocument",
    "WeightFile",
)


class LayerDocument(BaseStruct, forbid_unknown_fields=True):
    weight: list[list[float]]
    """Row-major ``(out, in)`` matrix."""
    bias: list[float]
    activation: Activation = Activation.RELU


class WeightFile(DocumentStruct, kw_only=True):
    """Float weights of the three MLPs of a deepsets policy."""

    self_encoder: list[LayerDocument]
    neighbor_mlp: list[LayerDocument]
    head: list[LayerDocument]
    metadata: dict[str, str] = msgspec.field(default_factory=dict)


class QuantizedLayerDocument(BaseStruct, forbid_unknown_fields=True):
    weight: list[list[int]]
    bias: list[int]
    activation: Activation = Activation.RELU


class QuantizedWeightFile(DocumentStruct, kw_only=True):
    """Integer raws of a quantized policy; every raw represents ``raw * 2**-frac_bits``."""

    frac_bits: int
    word_bits: int = 32
    accum_bits: int = 64
    self_encoder: list[QuantizedLayerDocument]
    neighbor_mlp: list[QuantizedLayerDocument]
    head: list[QuantizedLayerDocument]
    mac_count: int = 0
    """Multiply-accumulates of one inference without neighbors."""
    memory_bytes: int = 0


class SetpointDocument(BaseStruct, forbid_unknown_fields=True):
    position: list[float]
    dwell: float | None = None
    timeout: float | None = None


class HelixDocument(BaseStruct, forbid_unknown_fields=True, kw_only=True):
    """Setpoints along a helix whose radius and height change linearly with the winding angle."""

    center: list[float]
    """``(x, y)`` of the axis."""
    radius_start: float
    radius_end: float
    turns: float
    z_start: float
    z_end: float
    points: int
    dwell: float = 0.0
    """Hold at intermediate points; the last point uses the scenario dwell."""


class BoundsDocument(BaseStruct, forbid_unknown_fields=True):
    low: list[float]
    high: list[float]


class ParamsDocument(BaseStruct, forbid_unknown_fields=True, kw_only=True):
    mass: float = 0.033
    inertia: list[float] = msgspec.field(default_factory=lambda: [1.4e-5, 1.4e-5, 2.2e-5])
    """Diagonal of the inertia matrix."""
    gravity: list[float] = msgspec.field(default_factory=lambda: [0.0, 0.0, -9.81])
    arm_length: float = 0.046
    max_motor_thrust: float = 0.15
    torque_coefficient: float = 0.006


class GainsDocument(BaseStruct, forbid_unknown_fields=True, kw_only=True):
    position: float = 1.5
    velocity: float = 4.0
    max_speed: float = 1.0
    max_accel: float = 5.0
    attitude: float = 400.0
    rate: float = 36.0


class ScenarioDocument(DocumentStruct, kw_only=True):
    name: str
    description: str = ""
    start: list[float]
    setpoints: list[SetpointDocument] = msgspec.field(default_factory=list)
    helix: HelixDocument | None = None
    """Appended after ``setpoints`` when present."""
    bounds: BoundsDocument | None = None
    dt: float | None = None
    """Falls back to the simulation settings, as do the other optional timing fields."""
    max_duration: float = 60.0
    controller: ControllerKind = ControllerKind.BASELINE
    arrival_radius: float | None = None
    dwell: float | None = None
    max_neighbors: int | None = None
    seed: int = 0
    params: ParamsDocument | None = None
    gains: GainsDocument | None = None
