from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import StrEnum
from typing import TYPE_CHECKING, Any

import numpy as np

from fxflight.domain.dynamics.schemas import QuadrotorParams, QuadrotorState
from fxflight.domain.quantizer.schemas import FLIGHT_AREA
from fxflight.lib.exceptions import DimensionMismatchError, ScenarioValidationError
from fxflight.lib.schema import BaseStruct, DocumentStruct

if TYPE_CHECKING:
    import numpy.typing as npt

    from fxflight.domain.network.schemas import FloatArray

__all__ = (
    "BaselineGains",
    "Comparison",
    "ControllerKind",
    "DivergenceReport",
    "FlightArea",
    "Scenario",
    "Setpoint",
    "TrackingMetrics",
    "TrajectoryLog",
)


class ControllerKind(StrEnum):
    BASELINE = "baseline"
    FLOAT = "float"
    FIXED = "fixed"


def _point(values: npt.ArrayLike, name: str) -> FloatArray:
    array = np.array(values, dtype=np.float64)
    if array.shape != (3,) or not np.all(np.isfinite(array)):
        msg = f"{name} must be three finite coordinates, got {np.asarray(values).tolist()}"
        raise ScenarioValidationError(msg)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, slots=True)
class FlightArea:
    """Axis-aligned box the vehicle is expected to stay in."""

    low: FloatArray = field(default_factory=lambda: np.zeros(3))
    high: FloatArray = field(default_factory=lambda: np.array(FLIGHT_AREA))

    def __post_init__(self) -> None:
        object.__setattr__(self, "low", _point(self.low, "bounds.low"))
        object.__setattr__(self, "high", _point(self.high, "bounds.high"))
        if np.any(self.low > self.high):
            msg = f"bounds low {self.low.tolist()} exceeds high {self.high.tolist()}"
            raise ScenarioValidationError(msg)

    def contains(self, point: npt.ArrayLike) -> bool:
        p = np.asarray(point, dtype=np.float64)
        return bool(np.all(p >= self.low) and np.all(p <= self.high))


@dataclass(frozen=True, slots=True)
class Setpoint:
    """Target position; ``dwell`` overrides the scenario dwell, ``timeout`` advances on schedule."""

    position: FloatArray
    dwell: float | None = None
    timeout: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "position", _point(self.position, "setpoint"))
        if self.dwell is not None and self.dwell < 0:
            msg = f"setpoint dwell must be non-negative, got {self.dwell}"
            raise ScenarioValidationError(msg)
        if self.timeout is not None and not self.timeout > 0:
            msg = f"setpoint timeout must be positive, got {self.timeout}"
            raise ScenarioValidationError(msg)


@dataclass(frozen=True, slots=True)
class BaselineGains:
    """Cascaded controller gains, tuned once at the default vehicle parameters and ``dt = 0.01``."""

    position: float = 1.5
    velocity: float = 4.0
    max_speed: float = 1.0
    max_accel: float = 5.0
    attitude: float = 400.0
    rate: float = 36.0


@dataclass(frozen=True, slots=True)
class Scenario:
    name: str
    start: FloatArray
    setpoints: tuple[Setpoint, ...]
    bounds: FlightArea = field(default_factory=FlightArea)
    dt: float = 0.01
    max_duration: float = 60.0
    controller: ControllerKind = ControllerKind.BASELINE
    arrival_radius: float = 0.1
    dwell: float = 1.0
    max_neighbors: int = 0
    seed: int = 0
    params: QuadrotorParams = field(default_factory=QuadrotorParams)
    gains: BaselineGains = field(default_factory=BaselineGains)

    def __post_init__(self) -> None:
        object.__setattr__(self, "start", _point(self.start, "start"))
        object.__setattr__(self, "setpoints", tuple(self.setpoints))
        object.__setattr__(self, "controller", ControllerKind(self.controller))
        if not self.dt > 0:
            msg = f"dt must be positive, got {self.dt}"
            raise ScenarioValidationError(msg)
        if not self.max_duration >= 0:
            msg = f"max_duration must be non-negative, got {self.max_duration}"
            raise ScenarioValidationError(msg)
        if not self.arrival_radius > 0 or not self.dwell >= 0 or self.max_neighbors < 0:
            msg = "arrival_radius must be positive, dwell and max_neighbors non-negative"
            raise ScenarioValidationError(msg)
        if not self.setpoints:
            msg = f"scenario {self.name!r} has no setpoints"
            raise ScenarioValidationError(msg)
        if not self.bounds.contains(self.start):
            msg = f"start {self.start.tolist()} lies outside the flight area"
            raise ScenarioValidationError(msg)
        for index, sp in enumerate(self.setpoints):
            if not self.bounds.contains(sp.position):
                msg = f"setpoint {index} at {sp.position.tolist()} lies outside the flight area"
                raise ScenarioValidationError(msg)

    @property
    def max_ticks(self) -> int:
        """Index of the last tick an episode may reach."""
        return math.floor(self.max_duration / self.dt + 1e-9)

    def ticks(self, seconds: float) -> int:
        return round(seconds / self.dt)

    def dwell_for(self, index: int) -> float:
        sp = self.setpoints[index]
        return self.dwell if sp.dwell is None else sp.dwell

    def initial_state(self) -> QuadrotorState:
        return QuadrotorState.at_rest(self.start)

    def replace(self, **changes: Any) -> Scenario:
        return replace(self, **changes)


STATE_COLUMNS = 18


@dataclass(frozen=True, slots=True)
class TrajectoryLog:
    """One row per tick: ``t``, state ``(x, v, R row-major, omega)``, setpoint, action ``a`` and motor command."""

    times: FloatArray
    states: FloatArray
    setpoints: FloatArray
    actions: FloatArray
    motors: FloatArray

    def __post_init__(self) -> None:
        count = np.shape(self.times)[0] if np.ndim(self.times) == 1 else -1
        for name, width in (("states", STATE_COLUMNS), ("setpoints", 3), ("actions", 4), ("motors", 4)):
            array = np.array(getattr(self, name), dtype=np.float64).reshape(-1, width)
            if array.shape[0] != count:
                msg = f"{name} holds {array.shape[0]} rows, times holds {count}"
                raise DimensionMismatchError(msg)
            array.flags.writeable = False
            object.__setattr__(self, name, array)
        times = np.array(self.times, dtype=np.float64)
        if np.any(np.diff(times) <= 0):
            msg = "log times must be strictly increasing"
            raise DimensionMismatchError(msg)
        times.flags.writeable = False
        object.__setattr__(self, "times", times)

    @classmethod
    def from_rows(cls, rows: list[tuple[float, FloatArray, FloatArray, FloatArray, FloatArray]]) -> TrajectoryLog:
        if not rows:
            return cls(np.zeros(0), np.zeros((0, STATE_COLUMNS)), np.zeros((0, 3)), np.zeros((0, 4)), np.zeros((0, 4)))
        times, states, setpoints, actions, motors = zip(*rows, strict=True)
        return cls(np.array(times), np.array(states), np.array(setpoints), np.array(actions), np.array(motors))

    def __len__(self) -> int:
        return int(self.times.shape[0])

    @property
    def positions(self) -> FloatArray:
        return self.states[:, 0:3]

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self) > 1 else 0.0

    def state(self, index: int) -> QuadrotorState:
        row = self.states[index]
        return QuadrotorState(row[0:3], row[3:6], row[6:15].reshape(3, 3), row[15:18])

    def truncated(self, count: int) -> TrajectoryLog:
        return TrajectoryLog(
            self.times[:count],
            self.states[:count],
            self.setpoints[:count],
            self.actions[:count],
            self.motors[:count],
        )

    def equals(self, other: TrajectoryLog) -> bool:
        """Bit-exact comparison of every column."""
        return all(
            np.array_equal(getattr(self, name), getattr(other, name))
            for name in ("times", "states", "setpoints", "actions", "motors")
        )


class TrackingMetrics(BaseStruct, kw_only=True):
    rms_position_error: float
    max_deviation: float
    arrival_times: list[float | None]
    """First time within the arrival radius of each setpoint, ``None`` if never reached."""
    completed: bool
    out_of_bounds: bool = False


class DivergenceReport(DocumentStruct, kw_only=True):
    """Per-tick difference between a reference controller and a candidate on the same scenario."""

    scenario: str
    reference: str
    candidate: str
    frac_bits: int | None = None
    times: list[float]
    action_error: list[float | None]
    """Max-abs action difference of the candidate evaluated on the reference run's observations; ``None`` where the
    candidate overflowed."""
    in_envelope: list[bool]
    position_divergence: list[float]
    """Distance between the two closed-loop runs, over the shorter of the two."""
    candidate_aborted: bool = False

    @property
    def max_action_error(self) -> float:
        return max((math.inf if e is None else e for e in self.action_error), default=0.0)

    @property
    def max_action_error_in_envelope(self) -> float:
        return max(
            (math.inf if e is None else e for e, inside in zip(self.action_error, self.in_envelope, strict=True) if inside),
            default=0.0,
        )

    @property
    def max_position_divergence(self) -> float:
        return max(self.position_divergence, default=0.0)


@dataclass(frozen=True, slots=True)
class Comparison:
    report: DivergenceReport
    reference_log: TrajectoryLog
    candidate_log: TrajectoryLog
    """Partial when the candidate run aborted."""
