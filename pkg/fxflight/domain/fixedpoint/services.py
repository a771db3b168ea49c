"""Integer-only fixed-point arithmetic.

Scalar operations work on Python ints and are the reference semantics. The ``*_batch`` kernels apply the same
arithmetic to numpy arrays of raws and are bit-identical to composing the scalar operations.
"""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np

from fxflight.domain.fixedpoint.schemas import QFormat, QScalar, QVector
from fxflight.lib.exceptions import (
    DimensionMismatchError,
    EmptySequenceError,
    FixedPointOverflowError,
    FormatMismatchError,
    InvalidParameterError,
)

if TYPE_CHECKING:
    from collections.abc import Sequence

    import numpy.typing as npt

    from fxflight.domain.fixedpoint.schemas import RawArray

__all__ = (
    "dequantize_array",
    "dequantize_scalar",
    "q_add",
    "q_dot",
    "q_matvec_batch",
    "q_mean",
    "q_mean_batch",
    "q_mul",
    "q_relu",
    "q_relu_batch",
    "quantize_array",
    "quantize_scalar",
)

# float64 bound of |sum| is within a few ulps of the exact value; keep well clear of the limit
_BOUND_SLACK = 1.0 - 2.0**-30


def _as_format(n: int | QFormat) -> QFormat:
    return n if isinstance(n, QFormat) else QFormat(frac_bits=n)


def _same_format(a: QFormat, b: QFormat) -> QFormat:
    if a != b:
        msg = f"operands use different formats: {a} and {b}"
        raise FormatMismatchError(msg)
    return a


def quantize_scalar(w: float, n: int | QFormat) -> QScalar:
    """Convert ``w`` to fixed point by scaling with ``2**n`` and rounding down."""
    fmt = _as_format(n)
    if not math.isfinite(w):
        msg = f"cannot quantize non-finite value {w}"
        raise InvalidParameterError(msg)
    try:
        raw = math.floor(math.ldexp(w, fmt.frac_bits))
    except OverflowError as exc:
        msg = f"value {w} overflows at n={fmt.frac_bits}"
        raise FixedPointOverflowError(msg) from exc
    return QScalar(fmt.fit_word(raw, what=f"quantized {w!r}"), fmt)


def dequantize_scalar(q: QScalar) -> float:
    return math.ldexp(q.raw, -q.format.frac_bits)


def q_add(a: QScalar, b: QScalar) -> QScalar:
    fmt = _same_format(a.format, b.format)
    return QScalar(fmt.fit_word(a.raw + b.raw, what="sum"), fmt)


def q_mul(a: QScalar, b: QScalar) -> QScalar:
    """Product rescaled by an arithmetic right shift, i.e. rounded toward negative infinity."""
    fmt = _same_format(a.format, b.format)
    product = fmt.check_accum(a.raw * b.raw, what="product")
    return QScalar(fmt.fit_word(product >> fmt.frac_bits, what="product"), fmt)


def q_dot(a: QVector, b: QVector, *, bias: QScalar | None = None) -> QScalar:
    """Dot product with one rounding at the end.

    Products are summed at ``2n`` fractional bits in the accumulator. ``bias`` is added there too, shifted up to
    ``2n`` bits, so the affine result is rescaled once.
    """
    fmt = _same_format(a.format, b.format)
    if len(a) != len(b):
        msg = f"dot product of vectors with lengths {len(a)} and {len(b)}"
        raise DimensionMismatchError(msg)
    acc = sum(x * y for x, y in zip(a.raws, b.raws, strict=True))
    if bias is not None:
        _same_format(fmt, bias.format)
        acc += bias.raw << fmt.frac_bits
    acc = fmt.check_accum(acc)
    return QScalar(fmt.fit_word(acc >> fmt.frac_bits, what="dot product"), fmt)


def q_relu(a: QScalar) -> QScalar:
    return a if a.raw >= 0 else QScalar(0, a.format)


def q_mean(vectors: Sequence[QVector]) -> QVector:
    """Element-wise mean with floor division by the vector count."""
    if not vectors:
        msg = "mean of an empty sequence of vectors"
        raise EmptySequenceError(msg)
    fmt = vectors[0].format
    width = len(vectors[0])
    for vector in vectors:
        _same_format(fmt, vector.format)
        if len(vector) != width:
            msg = f"mean over vectors of lengths {width} and {len(vector)}"
            raise DimensionMismatchError(msg)
    k = len(vectors)
    return QVector(tuple(sum(column) // k for column in zip(*(v.raws for v in vectors), strict=True)), fmt)


def quantize_array(values: npt.ArrayLike, fmt: QFormat, *, what: str = "values") -> RawArray:
    """Array form of :func:`quantize_scalar`."""
    array = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(array)):
        msg = f"cannot quantize non-finite {what}"
        raise InvalidParameterError(msg)
    with np.errstate(over="ignore"):
        floored = np.floor(np.ldexp(array, fmt.frac_bits))
    if not np.all(np.isfinite(floored)):
        msg = f"{what} overflow at n={fmt.frac_bits}"
        raise FixedPointOverflowError(msg)
    # compare as floats first so out-of-range values never reach an integer cast
    out_of_range = (floored < fmt.word_min) | (floored > fmt.word_max)
    if np.any(out_of_range):
        if not fmt.saturate:
            first = floored[out_of_range].flat[0]
            msg = f"{what} raw {int(first)} exceeds the {fmt.word_bits}-bit word range at n={fmt.frac_bits}"
            raise FixedPointOverflowError(msg)
        floored = np.clip(floored, fmt.word_min, fmt.word_max)
    if fmt.narrow:
        return floored.astype(np.int64)
    return np.array([int(v) for v in floored.ravel()], dtype=object).reshape(floored.shape)


def dequantize_array(raws: RawArray, fmt: QFormat) -> npt.NDArray[np.float64]:
    return np.ldexp(np.asarray(raws, dtype=np.float64), -fmt.frac_bits)


def q_matvec_batch(
    x: RawArray,
    weight: RawArray,
    bias: RawArray,
    fmt: QFormat,
    *,
    what: str = "layer",
) -> RawArray:
    """Affine layer over a batch: row ``i`` of the result is ``q_dot(x[i], weight[j], bias=bias[j])`` for each ``j``.

    Args:
        x: Raws of shape ``(batch, in)``.
        weight: Raws of shape ``(out, in)``.
        bias: Raws of shape ``(out,)``.
        fmt: Shared format of every operand.
        what: Name used in overflow messages.

    Returns:
        Raws of shape ``(batch, out)``.
    """
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1] or bias.shape != (weight.shape[0],):
        msg = f"{what}: cannot apply weight {weight.shape} and bias {bias.shape} to input {x.shape}"
        raise DimensionMismatchError(msg)
    n = fmt.frac_bits
    acc: RawArray | None = None
    if fmt.narrow:
        bound = np.abs(x).astype(np.float64) @ np.abs(weight).T.astype(np.float64)
        bound += np.abs(bias).astype(np.float64) * 2.0**n
        if np.all(bound < 2.0 ** (min(fmt.accum_bits, 64) - 1) * _BOUND_SLACK):
            acc = x.astype(np.int64) @ weight.T.astype(np.int64) + (bias.astype(np.int64) << n)
    if acc is None:
        acc = x.astype(object) @ weight.T.astype(object) + bias.astype(object) * (1 << n)
        outside = (acc < fmt.accum_min) | (acc > fmt.accum_max)
        if np.any(outside):
            msg = f"{what}: accumulator {acc[outside].flat[0]} exceeds {fmt.accum_bits} bits at n={n}"
            raise FixedPointOverflowError(msg)
    return fmt.fit_word_array(acc >> n, what=what)


def q_relu_batch(x: RawArray) -> RawArray:
    return np.maximum(x, 0)


def q_mean_batch(x: RawArray) -> RawArray:
    """Floor mean over axis 1 of a ``(batch, k, width)`` raw array."""
    if x.ndim != 3:
        msg = f"expected a (batch, k, width) array, got shape {x.shape}"
        raise DimensionMismatchError(msg)
    k = x.shape[1]
    if k == 0:
        msg = "mean over zero vectors"
        raise EmptySequenceError(msg)
    return np.floor_divide(x.sum(axis=1), k)
