from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, overload

import numpy as np

from fxflight.lib.exceptions import FixedPointOverflowError, FormatMismatchError, InvalidParameterError

if TYPE_CHECKING:
    from collections.abc import Iterable, Iterator

    import numpy.typing as npt

__all__ = ("QFormat", "QScalar", "QVector", "RawArray")

RawArray = np.ndarray[Any, np.dtype[Any]]
"""Integer raws: ``int64`` while products fit, ``object`` (Python ints) for wide words."""


@dataclass(frozen=True, slots=True)
class QFormat:
    """Fixed-point encoding with ``frac_bits`` fractional bits.

    A raw integer ``r`` represents the real value ``r * 2**-frac_bits``.
    """

    frac_bits: int
    word_bits: int = 32
    accum_bits: int = 64
    saturate: bool = False

    def __post_init__(self) -> None:
        if self.word_bits < 3:
            msg = f"word_bits must be at least 3, got {self.word_bits}"
            raise InvalidParameterError(msg)
        if not 1 <= self.frac_bits <= self.word_bits - 2:
            msg = f"frac_bits must lie in [1, {self.word_bits - 2}] for {self.word_bits}-bit words, got {self.frac_bits}"
            raise InvalidParameterError(msg)
        if self.accum_bits < 2 * self.word_bits:
            msg = f"accum_bits must be at least 2*word_bits={2 * self.word_bits}, got {self.accum_bits}"
            raise InvalidParameterError(msg)

    @property
    def word_min(self) -> int:
        return -(1 << (self.word_bits - 1))

    @property
    def word_max(self) -> int:
        return (1 << (self.word_bits - 1)) - 1

    @property
    def accum_min(self) -> int:
        return -(1 << (self.accum_bits - 1))

    @property
    def accum_max(self) -> int:
        return (1 << (self.accum_bits - 1)) - 1

    @property
    def one(self) -> int:
        """Raw value of 1.0."""
        return 1 << self.frac_bits

    @property
    def narrow(self) -> bool:
        """Whether raws and their products fit ``int64`` arrays."""
        return self.word_bits <= 32

    def fit_word(self, raw: int, what: str = "value") -> int:
        """Return ``raw`` if it fits a word, its clamp when saturating, else raise."""
        if self.word_min <= raw <= self.word_max:
            return raw
        if self.saturate:
            return min(max(raw, self.word_min), self.word_max)
        msg = f"{what} raw {raw} exceeds the {self.word_bits}-bit word range at n={self.frac_bits}"
        raise FixedPointOverflowError(msg)

    def check_accum(self, acc: int, what: str = "accumulator") -> int:
        if self.accum_min <= acc <= self.accum_max:
            return acc
        msg = f"{what} {acc} exceeds the {self.accum_bits}-bit accumulator range at n={self.frac_bits}"
        raise FixedPointOverflowError(msg)

    def fit_word_array(self, raws: RawArray, what: str = "values") -> RawArray:
        """Array form of :meth:`fit_word`; the result has the format's array dtype."""
        out_of_range = (raws < self.word_min) | (raws > self.word_max)
        if np.any(out_of_range):
            if not self.saturate:
                first = raws[out_of_range].flat[0]
                msg = f"{what} raw {int(first)} exceeds the {self.word_bits}-bit word range at n={self.frac_bits}"
                raise FixedPointOverflowError(msg)
            raws = np.clip(raws, self.word_min, self.word_max)
        return raws.astype(np.int64) if self.narrow else raws.astype(object)


@dataclass(frozen=True, slots=True)
class QScalar:
    raw: int
    format: QFormat

    def __post_init__(self) -> None:
        if not self.format.word_min <= self.raw <= self.format.word_max:
            msg = f"raw {self.raw} does not fit a {self.format.word_bits}-bit word"
            raise FixedPointOverflowError(msg)


@dataclass(frozen=True, slots=True)
class QVector:
    """Ordered raws sharing one :class:`QFormat`."""

    raws: tuple[int, ...]
    format: QFormat

    def __post_init__(self) -> None:
        for raw in self.raws:
            if not self.format.word_min <= raw <= self.format.word_max:
                msg = f"raw {raw} does not fit a {self.format.word_bits}-bit word"
                raise FixedPointOverflowError(msg)

    @classmethod
    def from_scalars(cls, scalars: Iterable[QScalar], fmt: QFormat | None = None) -> QVector:
        items = list(scalars)
        if fmt is None:
            if not items:
                msg = "an empty vector needs an explicit format"
                raise InvalidParameterError(msg)
            fmt = items[0].format
        for item in items:
            if item.format != fmt:
                msg = f"element format {item.format} differs from vector format {fmt}"
                raise FormatMismatchError(msg)
        return cls(raws=tuple(item.raw for item in items), format=fmt)

    @classmethod
    def from_array(cls, raws: npt.ArrayLike, fmt: QFormat) -> QVector:
        return cls(raws=tuple(int(r) for r in np.asarray(raws).ravel()), format=fmt)

    def to_array(self) -> RawArray:
        if self.format.narrow:
            return np.asarray(self.raws, dtype=np.int64)
        return np.asarray(self.raws, dtype=object)

    def __len__(self) -> int:
        return len(self.raws)

    def __iter__(self) -> Iterator[QScalar]:
        return (QScalar(raw, self.format) for raw in self.raws)

    @overload
    def __getitem__(self, index: int) -> QScalar: ...

    @overload
    def __getitem__(self, index: slice) -> QVector: ...

    def __getitem__(self, index: int | slice) -> QScalar | QVector:
        if isinstance(index, slice):
            return QVector(self.raws[index], self.format)
        return QScalar(self.raws[index], self.format)
