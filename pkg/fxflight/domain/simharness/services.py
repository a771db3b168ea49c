from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import structlog

from fxflight.domain.artifacts.services import builtin_scenario
from fxflight.domain.dynamics.services import motor_mix, step
from fxflight.domain.observation.schemas import WorldSnapshot
from fxflight.domain.observation.services import build_neighbor_observations, build_self_observation
from fxflight.domain.quantizer.schemas import ObservationRanges
from fxflight.domain.simharness.controllers import BaselineController, FixedPolicyController, FloatPolicyController
from fxflight.domain.simharness.schemas import (
    Comparison,
    ControllerKind,
    DivergenceReport,
    TrackingMetrics,
    TrajectoryLog,
)
from fxflight.lib.exceptions import (
    EmptySequenceError,
    EpisodeAbortedError,
    FixedPointOverflowError,
    MissingWeightsError,
    NonFiniteStateError,
    ScenarioValidationError,
)

if TYPE_CHECKING:
    from pathlib import Path

    from fxflight.domain.dynamics.schemas import QuadrotorParams
    from fxflight.domain.network.schemas import DeepsetsPolicy, FloatArray
    from fxflight.domain.quantizer.schemas import QuantizedPolicy
    from fxflight.domain.simharness.controllers import Controller
    from fxflight.domain.simharness.schemas import Scenario

__all__ = (
    "compare_controllers",
    "compare_float_fixed",
    "compute_metrics",
    "make_controller",
    "run_closed_loop",
    "run_comparison",
    "scenario_directions",
    "scenario_rectangle",
    "scenario_spiral",
)

logger = structlog.get_logger()


def scenario_directions(fixture_path: Path | None = None) -> Scenario:
    """Hover start at the room centre, then setpoints placed in different directions."""
    return builtin_scenario("directions", fixture_path)


def scenario_rectangle(fixture_path: Path | None = None) -> Scenario:
    """3 m x 2 m rectangle at 1 m altitude; the fifth point is the landing approach above the first."""
    return builtin_scenario("rectangle", fixture_path)


def scenario_spiral(fixture_path: Path | None = None) -> Scenario:
    """Inward ascending helix from the floor, ending 0.8 m above the start."""
    return builtin_scenario("spiral", fixture_path)


@dataclass(slots=True)
class _SetpointTracker:
    """Active setpoint of an episode: arrival within the radius, then the dwell (or the leg timeout) advances."""

    scn: Scenario
    index: int = 0
    leg_start: int = 0
    arrived_tick: int | None = None

    @property
    def finished(self) -> bool:
        return self.index == len(self.scn.setpoints)

    def jump(self, index: int, tick: int) -> None:
        if index != self.index:
            self.index, self.leg_start, self.arrived_tick = index, tick, None

    def update(self, tick: int, position: FloatArray) -> bool:
        """Record ``position`` at ``tick``; True when the active setpoint advanced."""
        scn = self.scn
        sp = scn.setpoints[self.index]
        if self.arrived_tick is None and np.linalg.norm(position - sp.position) <= scn.arrival_radius:
            self.arrived_tick = tick
        held = self.arrived_tick is not None and tick - self.arrived_tick >= scn.ticks(scn.dwell_for(self.index))
        timed_out = sp.timeout is not None and tick - self.leg_start >= scn.ticks(sp.timeout)
        if not (held or timed_out):
            return False
        self.index += 1
        self.leg_start, self.arrived_tick = tick, None
        return True


def make_controller(
    scn: Scenario,
    *,
    policy: DeepsetsPolicy | None = None,
    quantized: QuantizedPolicy | None = None,
    params: QuadrotorParams | None = None,
) -> Controller:
    """Controller of the scenario's kind.

    Raises:
        MissingWeightsError: if a policy controller is requested without the weights it runs on.
    """
    if scn.controller is ControllerKind.BASELINE:
        return BaselineController(params or scn.params, scn.gains)
    if scn.controller is ControllerKind.FLOAT:
        if policy is None:
            msg = "the float controller needs a weight file"
            raise MissingWeightsError(msg)
        return FloatPolicyController(policy)
    if quantized is None:
        msg = "the fixed controller needs quantized weights"
        raise MissingWeightsError(msg)
    return FixedPolicyController(quantized)


def run_closed_loop(
    scn: Scenario,
    controller: Controller | None = None,
    params: QuadrotorParams | None = None,
) -> TrajectoryLog:
    """Fly ``scn`` and log every tick.

    Each tick builds the observation against the active setpoint, evaluates the controller, logs the row, checks
    arrival and advancing, then mixes and integrates. The episode ends once the final setpoint has been held for
    its dwell, or at ``max_duration``.

    Raises:
        MissingWeightsError: if no controller is given for a policy scenario.
        EpisodeAbortedError: on a non-finite state or an overflowing fixed-point controller; ``log`` holds the
            ticks recorded so far.
    """
    params = params or scn.params
    controller = controller or make_controller(scn, params=params)
    log = logger.bind(scenario=scn.name, controller=str(controller.kind))
    state = scn.initial_state()
    rows: list[tuple[float, FloatArray, FloatArray, FloatArray, FloatArray]] = []
    tracker = _SetpointTracker(scn)
    out_of_bounds = False
    log.info("episode start", max_ticks=scn.max_ticks, setpoints=len(scn.setpoints))
    for tick in range(scn.max_ticks + 1):
        t = tick * scn.dt
        sp = scn.setpoints[tracker.index]
        world = WorldSnapshot.from_states([state], [sp.position])
        try:
            action, cmd = controller(world, 0, scn.max_neighbors)
        except FixedPointOverflowError as exc:
            log.error("episode aborted", t=t, reason=exc.detail)
            raise EpisodeAbortedError(f"controller overflow at t={t:.2f}s", log=TrajectoryLog.from_rows(rows)) from exc
        rows.append((t, state.as_row(), sp.position, np.asarray(action, dtype=np.float64), cmd.f_hat))
        if not out_of_bounds and not scn.bounds.contains(state.position):
            out_of_bounds = True
            log.warning("left flight area", t=t, position=state.position)
        if tracker.update(tick, state.position):
            if tracker.finished:
                break
            log.debug("setpoint advanced", index=tracker.index, t=t)
        if tick == scn.max_ticks:
            break
        try:
            state = step(state, motor_mix(cmd, params), params, scn.dt)
        except NonFiniteStateError as exc:
            log.error("episode aborted", t=t, reason=exc.detail)
            raise EpisodeAbortedError(f"non-finite state after t={t:.2f}s", log=TrajectoryLog.from_rows(rows)) from exc
    log.info("episode finished", ticks=len(rows), completed=tracker.finished, out_of_bounds=out_of_bounds)
    return TrajectoryLog.from_rows(rows)


def _setpoint_indices(log: TrajectoryLog, scn: Scenario) -> list[int]:
    """Index of the active setpoint per tick.

    The logged setpoint column decides the position; the episode's advance rule, replayed over the logged
    positions, decides between consecutive setpoints at the same position.
    """
    tracker = _SetpointTracker(scn)
    indices: list[int] = []
    j = 0
    for tick, (row, position) in enumerate(zip(log.setpoints, log.positions, strict=True)):
        if not tracker.finished and np.array_equal(row, scn.setpoints[tracker.index].position):
            j = tracker.index
        while not np.array_equal(row, scn.setpoints[j].position):
            j += 1
            if j == len(scn.setpoints):
                msg = f"log setpoints do not follow scenario {scn.name!r}"
                raise ScenarioValidationError(msg)
        tracker.jump(j, tick)
        indices.append(j)
        tracker.update(tick, position)
    return indices


def compute_metrics(log: TrajectoryLog, scn: Scenario) -> TrackingMetrics:
    """Deviation from the piecewise-linear reference path and per-setpoint arrival times.

    The reference for a tick is the segment from the previous setpoint (the start for the first one) to the
    active setpoint; deviation is the distance to its closest point. The reference is geometric rather than
    scheduled in time, so lagging behind along the path adds no deviation.

    Raises:
        EmptySequenceError: if the log has no rows.
    """
    if len(log) == 0:
        msg = "metrics of an empty log"
        raise EmptySequenceError(msg)
    indices = np.array(_setpoint_indices(log, scn))
    targets = np.array([sp.position for sp in scn.setpoints])
    origins = np.vstack([scn.start, targets[:-1]])
    a, b = origins[indices], targets[indices]
    p = log.positions
    ab = b - a
    length2 = np.einsum("ij,ij->i", ab, ab)
    along = np.einsum("ij,ij->i", p - a, ab)
    s = np.clip(np.divide(along, length2, out=np.zeros_like(along), where=length2 > 0), 0.0, 1.0)
    deviation = np.linalg.norm(p - (a + s[:, None] * ab), axis=1)
    max_deviation = float(np.max(deviation))
    rms = min(math.sqrt(math.fsum((deviation**2).tolist()) / len(log)), max_deviation)

    reached = np.linalg.norm(p - b, axis=1) <= scn.arrival_radius
    arrivals: list[float | None] = []
    for j in range(len(scn.setpoints)):
        hits = np.flatnonzero((indices == j) & reached)
        arrivals.append(float(log.times[hits[0]]) if hits.size else None)
    final = arrivals[-1]
    completed = (
        all(t is not None for t in arrivals)
        and final is not None
        and float(log.times[-1]) - final >= scn.dwell_for(len(scn.setpoints) - 1) - scn.dt / 2
    )
    out_of_bounds = not all(scn.bounds.contains(row) for row in p)
    return TrackingMetrics(
        rms_position_error=rms,
        max_deviation=max_deviation,
        arrival_times=arrivals,
        completed=completed,
        out_of_bounds=out_of_bounds,
    )


def run_comparison(
    reference: Controller,
    candidate: Controller,
    scn: Scenario,
    *,
    ranges: ObservationRanges | None = None,
    frac_bits: int | None = None,
) -> Comparison:
    """Fly ``reference``, shadow-evaluate ``candidate`` on every observation of that run, then fly ``candidate``.

    Action error per tick compares the candidate against the logged reference action on identical observations.
    ``in_envelope`` marks ticks whose observation lies inside ``ranges``. Position divergence compares the two
    closed-loop runs tick by tick over the shorter one; a candidate run that aborts contributes its partial log.
    """
    ranges = ranges or ObservationRanges()
    reference_log = run_closed_loop(scn, reference)
    errors: list[float | None] = []
    inside: list[bool] = []
    for i in range(len(reference_log)):
        world = WorldSnapshot.from_states([reference_log.state(i)], [reference_log.setpoints[i]])
        self_obs = build_self_observation(world, 0)
        neighbors = build_neighbor_observations(world, 0, scn.max_neighbors)
        inside.append(ranges.contains(self_obs, np.asarray(neighbors)))
        try:
            action, _ = candidate(world, 0, scn.max_neighbors)
        except FixedPointOverflowError:
            errors.append(None)
            continue
        errors.append(float(np.max(np.abs(np.asarray(action) - reference_log.actions[i]))))
    aborted = False
    try:
        candidate_log = run_closed_loop(scn, candidate)
    except EpisodeAbortedError as exc:
        candidate_log, aborted = exc.log, True
    count = min(len(reference_log), len(candidate_log))
    divergence = np.linalg.norm(reference_log.positions[:count] - candidate_log.positions[:count], axis=1)
    report = DivergenceReport(
        scenario=scn.name,
        reference=str(reference.kind),
        candidate=str(candidate.kind),
        frac_bits=frac_bits,
        times=reference_log.times.tolist(),
        action_error=errors,
        in_envelope=inside,
        position_divergence=divergence.tolist(),
        candidate_aborted=aborted,
    )
    logger.info(
        "comparison finished",
        scenario=scn.name,
        max_action_error=report.max_action_error,
        max_position_divergence=report.max_position_divergence,
        candidate_aborted=aborted,
    )
    return Comparison(report, reference_log, candidate_log)


def compare_controllers(
    reference: Controller,
    candidate: Controller,
    scn: Scenario,
    *,
    ranges: ObservationRanges | None = None,
    frac_bits: int | None = None,
) -> DivergenceReport:
    return run_comparison(reference, candidate, scn, ranges=ranges, frac_bits=frac_bits).report


def compare_float_fixed(
    p: DeepsetsPolicy,
    qp: QuantizedPolicy,
    scn: Scenario,
    *,
    ranges: ObservationRanges | None = None,
) -> DivergenceReport:
    """Float policy as reference, its quantized counterpart as candidate."""
    return compare_controllers(
        FloatPolicyController(p),
        FixedPolicyController(qp),
        scn,
        ranges=ranges,
        frac_bits=qp.format.frac_bits,
    )
