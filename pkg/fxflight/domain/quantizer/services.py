from __future__ import annotations

from typing import TYPE_CHECKING

import anyio
import numpy as np
import structlog
from anyio import to_thread

from fxflight.domain.fixedpoint.schemas import QFormat, QVector
from fxflight.domain.fixedpoint.services import (
    dequantize_array,
    q_matvec_batch,
    q_mean_batch,
    q_relu_batch,
    quantize_array,
)
from fxflight.domain.network.schemas import (
    NEIGHBOR_OBS_DIM,
    SELF_OBS_DIM,
    Activation,
    DeepsetsPolicy,
    MlpLayer,
    MlpWeights,
)
from fxflight.domain.network.services import deepsets_forward_float_batch
from fxflight.domain.quantizer.schemas import (
    CalibrationReport,
    CalibrationRow,
    ObservationBatch,
    ObservationRanges,
    QuantizedLayer,
    QuantizedMlp,
    QuantizedPolicy,
)
from fxflight.lib.exceptions import (
    DimensionMismatchError,
    FixedPointOverflowError,
    FormatMismatchError,
    InvalidParameterError,
)

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

    from fxflight.domain.fixedpoint.schemas import RawArray
    from fxflight.domain.network.schemas import FloatArray

__all__ = (
    "calibrate_fraction_bits",
    "dequantize_policy",
    "deepsets_forward_fixed",
    "deepsets_forward_fixed_batch",
    "quantize_observations",
    "quantize_policy",
    "rotation_from_euler",
    "sample_observations",
)

logger = structlog.get_logger()


def _as_format(n: int | QFormat) -> QFormat:
    return n if isinstance(n, QFormat) else QFormat(frac_bits=n)


def quantize_policy(p: DeepsetsPolicy, n: int | QFormat) -> QuantizedPolicy:
    """Floor-quantize every weight and bias of ``p`` with one shared fractional-bit count.

    Raises:
        FixedPointOverflowError: naming the first layer whose parameters leave the word range.
    """
    fmt = _as_format(n)

    def _mlp(name: str, mlp: MlpWeights) -> QuantizedMlp:
        return QuantizedMlp(
            tuple(
                QuantizedLayer(
                    weight=quantize_array(layer.weight, fmt, what=f"{name}.layers[{index}].weight"),
                    bias=quantize_array(layer.bias, fmt, what=f"{name}.layers[{index}].bias"),
                    activation=layer.activation,
                )
                for index, layer in enumerate(mlp.layers)
            ),
        )

    return QuantizedPolicy(
        self_encoder=_mlp("self_encoder", p.self_encoder),
        neighbor_mlp=_mlp("neighbor_mlp", p.neighbor_mlp),
        head=_mlp("head", p.head),
        format=fmt,
    )


def dequantize_policy(qp: QuantizedPolicy) -> DeepsetsPolicy:
    """Float policy whose parameters are exactly the grid values of ``qp``."""

    def _mlp(mlp: QuantizedMlp) -> MlpWeights:
        return MlpWeights(
            tuple(
                MlpLayer(
                    dequantize_array(layer.weight, qp.format),
                    dequantize_array(layer.bias, qp.format),
                    layer.activation,
                )
                for layer in mlp.layers
            ),
        )

    return DeepsetsPolicy(_mlp(qp.self_encoder), _mlp(qp.neighbor_mlp), _mlp(qp.head))


def _forward_mlp(mlp: QuantizedMlp, x: RawArray, fmt: QFormat, name: str) -> RawArray:
    h = x
    for index, layer in enumerate(mlp.layers):
        h = q_matvec_batch(h, layer.weight, layer.bias, fmt, what=f"{name}.layers[{index}]")
        if layer.activation is Activation.RELU:
            h = q_relu_batch(h)
    return h


def deepsets_forward_fixed_batch(qp: QuantizedPolicy, self_raw: RawArray, neighbors_raw: RawArray) -> RawArray:
    """Integer-only forward pass over a batch.

    Args:
        qp: Quantized policy.
        self_raw: Raws of shape ``(batch, 18)`` in ``qp.format``.
        neighbors_raw: Raws of shape ``(batch, k, 6)`` in ``qp.format``; ``k`` may be zero.

    Returns:
        Action raws of shape ``(batch, 4)``.
    """
    fmt = qp.format
    if self_raw.ndim != 2 or self_raw.shape[1] != SELF_OBS_DIM:
        msg = f"self observations must have shape (batch, {SELF_OBS_DIM}), got {self_raw.shape}"
        raise DimensionMismatchError(msg)
    batch = self_raw.shape[0]
    if neighbors_raw.ndim != 3 or neighbors_raw.shape[0] != batch or neighbors_raw.shape[2] != NEIGHBOR_OBS_DIM:
        msg = f"neighbor observations must have shape ({batch}, k, {NEIGHBOR_OBS_DIM}), got {neighbors_raw.shape}"
        raise DimensionMismatchError(msg)
    e_q = _forward_mlp(qp.self_encoder, self_raw, fmt, "self_encoder")
    k = neighbors_raw.shape[1]
    if k:
        flat = neighbors_raw.reshape(batch * k, NEIGHBOR_OBS_DIM)
        embedded = _forward_mlp(qp.neighbor_mlp, flat, fmt, "neighbor_mlp")
        e_k = q_mean_batch(embedded.reshape(batch, k, -1))
    else:
        e_k = np.zeros((batch, qp.neighbor_mlp.out_dim), dtype=e_q.dtype)
    return _forward_mlp(qp.head, np.concatenate([e_q, e_k], axis=1), fmt, "head")


def deepsets_forward_fixed(qp: QuantizedPolicy, self_obs_q: QVector, neighbors_q: Sequence[QVector]) -> QVector:
    """Integer-only forward pass for one observation; same dataflow as the float path."""
    for vector in (self_obs_q, *neighbors_q):
        if vector.format != qp.format:
            msg = f"observation format {vector.format} differs from policy format {qp.format}"
            raise FormatMismatchError(msg)
    dtype = np.int64 if qp.format.narrow else object
    self_raw = np.asarray([self_obs_q.raws], dtype=dtype)
    if neighbors_q:
        neighbors_raw = np.asarray([[v.raws for v in neighbors_q]], dtype=dtype)
    else:
        neighbors_raw = np.zeros((1, 0, NEIGHBOR_OBS_DIM), dtype=dtype)
    return QVector.from_array(deepsets_forward_fixed_batch(qp, self_raw, neighbors_raw)[0], qp.format)


def quantize_observations(batch: ObservationBatch, fmt: QFormat) -> tuple[RawArray, RawArray]:
    return (
        quantize_array(batch.self_obs, fmt, what="self observation"),
        quantize_array(batch.neighbors, fmt, what="neighbor observation"),
    )


def rotation_from_euler(roll: FloatArray, pitch: FloatArray, yaw: FloatArray) -> FloatArray:
    """Body-to-world rotations ``Rz(yaw) @ Ry(pitch) @ Rx(roll)`` for arrays of angles, shape ``(..., 3, 3)``."""
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    return np.stack(
        [
            np.stack([cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr], axis=-1),
            np.stack([sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr], axis=-1),
            np.stack([-sp, cp * sr, cp * cr], axis=-1),
        ],
        axis=-2,
    )


def sample_observations(seed: int | Sequence[int], count: int, ranges: ObservationRanges) -> ObservationBatch:
    """Draw ``count`` observations uniformly inside ``ranges``.

    The rotation block is a proper rotation built from sampled Euler angles, flattened row by row.
    """
    if count < 1:
        msg = f"sample count must be at least 1, got {count}"
        raise InvalidParameterError(msg)
    rng = np.random.default_rng(seed)

    def _uniform(box: tuple[tuple[float, float], ...], shape: tuple[int, ...]) -> FloatArray:
        low = np.array([pair[0] for pair in box])
        high = np.array([pair[1] for pair in box])
        return low + (high - low) * rng.random((*shape, len(box)))

    position = _uniform(ranges.position, (count,))
    velocity = _uniform(ranges.velocity, (count,))
    angles = _uniform(ranges.attitude, (count,))
    omega = _uniform(ranges.angular_velocity, (count,))
    rotation = rotation_from_euler(angles[:, 0], angles[:, 1], angles[:, 2]).reshape(count, 9)
    k = ranges.neighbors
    neighbors = np.concatenate(
        [_uniform(ranges.neighbor_position, (count, k)), _uniform(ranges.neighbor_velocity, (count, k))],
        axis=2,
    )
    return ObservationBatch(np.concatenate([position, velocity, rotation, omega], axis=1), neighbors)


def _max_error(qp: QuantizedPolicy, samples: ObservationBatch, reference: FloatArray) -> float:
    self_raw, neighbors_raw = quantize_observations(samples, qp.format)
    fixed = dequantize_array(deepsets_forward_fixed_batch(qp, self_raw, neighbors_raw), qp.format)
    return float(np.max(np.abs(reference - fixed)))


def _sweep_entry(
    p: DeepsetsPolicy,
    fmt: QFormat,
    samples: ObservationBatch,
    reference: FloatArray,
) -> CalibrationRow:
    try:
        error = _max_error(quantize_policy(p, fmt), samples, reference)
    except FixedPointOverflowError as exc:
        logger.debug("calibration overflow", frac_bits=fmt.frac_bits, reason=exc.detail)
        return CalibrationRow(frac_bits=fmt.frac_bits, max_abs_error=None, overflow=True)
    logger.debug("calibration entry", frac_bits=fmt.frac_bits, max_abs_error=error)
    return CalibrationRow(frac_bits=fmt.frac_bits, max_abs_error=error)


def calibrate_fraction_bits(
    p: DeepsetsPolicy,
    seed: int,
    count: int,
    n_min: int,
    n_max: int,
    *,
    ranges: ObservationRanges | None = None,
    word_bits: int = 32,
    accum_bits: int = 64,
    saturate: bool = False,
    resample_per_n: bool = False,
    workers: int = 1,
) -> CalibrationReport:
    """Sweep ``n`` in ascending order and pick the one with the smallest maximum float-versus-fixed error.

    Overflow at some ``n`` is recorded as an infinite error for that entry. Ties go to the smaller ``n``.

    Args:
        p: Float policy.
        seed: Seed of the observation sampler.
        count: Samples per sweep entry.
        n_min: First fractional-bit count.
        n_max: Last fractional-bit count (inclusive).
        ranges: Sampling envelope; the operational envelope by default.
        word_bits: Word width of the fixed path.
        accum_bits: Accumulator width of the fixed path.
        saturate: Clamp word results instead of failing on overflow.
        resample_per_n: Draw a fresh sample set for every ``n`` (seeded by ``(seed, n)``).
        workers: Worker threads evaluating sweep entries; the report does not depend on it.

    Raises:
        InvalidParameterError: if the sweep range is empty or outside the word format.
        FixedPointOverflowError: if every ``n`` overflowed.

    Returns:
        The calibration report.
    """
    if n_min < 1 or n_max < n_min:
        msg = f"invalid sweep range [{n_min}, {n_max}]"
        raise InvalidParameterError(msg)
    formats = [
        QFormat(frac_bits=n, word_bits=word_bits, accum_bits=accum_bits, saturate=saturate)
        for n in range(n_min, n_max + 1)
    ]
    ranges = ranges or ObservationRanges()
    shared = sample_observations(seed, count, ranges)
    shared_reference = deepsets_forward_float_batch(p, shared.self_obs, shared.neighbors)

    def _entry(fmt: QFormat) -> CalibrationRow:
        if not resample_per_n:
            return _sweep_entry(p, fmt, shared, shared_reference)
        samples = sample_observations((seed, fmt.frac_bits), count, ranges)
        reference = deepsets_forward_float_batch(p, samples.self_obs, samples.neighbors)
        return _sweep_entry(p, fmt, samples, reference)

    if workers > 1:
        rows = _run_threaded(_entry, formats, workers)
    else:
        rows = [_entry(fmt) for fmt in formats]
    feasible = [row for row in rows if not row.overflow]
    if not feasible:
        msg = f"every fractional-bit count in [{n_min}, {n_max}] overflowed"
        raise FixedPointOverflowError(msg)
    best = min(feasible, key=lambda row: (row.error, row.frac_bits))
    logger.info(
        "calibration complete",
        selected_n=best.frac_bits,
        max_abs_error=best.max_abs_error,
        samples=count,
        seed=seed,
    )
    return CalibrationReport(
        rows=rows,
        selected_n=best.frac_bits,
        sample_count=count,
        seed=seed,
        neighbors=ranges.neighbors,
        word_bits=word_bits,
        accum_bits=accum_bits,
        resample_per_n=resample_per_n,
        saturate=saturate,
    )


def _run_threaded(
    entry: Callable[[QFormat], CalibrationRow],
    formats: list[QFormat],
    workers: int,
) -> list[CalibrationRow]:
    """Evaluate sweep entries on worker threads, returning them in ``formats`` order."""
    results: dict[int, CalibrationRow] = {}

    async def _sweep() -> None:
        limiter = anyio.CapacityLimiter(workers)

        async def _one(fmt: QFormat) -> None:
            results[fmt.frac_bits] = await to_thread.run_sync(entry, fmt, limiter=limiter)

        async with anyio.create_task_group() as tg:
            for fmt in formats:
                tg.start_soon(_one, fmt)

    anyio.run(_sweep)
    return [results[fmt.frac_bits] for fmt in formats]
