from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from typing import Any

    from fxflight.domain.simharness.schemas import TrajectoryLog


__all__ = (
    "ApplicationClientError",
    "ApplicationError",
    "DimensionMismatchError",
    "EmptySequenceError",
    "EpisodeAbortedError",
    "FixedPointOverflowError",
    "FormatMismatchError",
    "InfeasibleHoverError",
    "InvalidParameterError",
    "MissingWeightsError",
    "NonFiniteStateError",
    "QuadrotorIndexError",
    "ScenarioValidationError",
    "WeightFileError",
)


class ApplicationError(Exception):
    """Base exception type for the lib's custom exception types."""

    detail: str

    def __init__(self, *args: Any, detail: str = "") -> None:
        """Initialize ``ApplicationError``.

        Args:
            *args: args are converted to :class:`str` before passing to :class:`Exception`
            detail: detail of the exception.
        """
        str_args = [str(arg) for arg in args if arg]
        if not detail:
            if str_args:
                detail, *str_args = str_args
            elif hasattr(self, "detail"):
                detail = self.detail
        self.detail = detail
        super().__init__(*str_args)

    def __repr__(self) -> str:
        if self.detail:
            return f"{self.__class__.__name__} - {self.detail}"
        return self.__class__.__name__

    def __str__(self) -> str:
        return " ".join((*self.args, self.detail)).strip()


class ApplicationClientError(ApplicationError):
    """Base exception type for client errors.

    Raised when the caller handed in something unusable; the CLI maps these to the validation exit code.
    """


class InvalidParameterError(ApplicationClientError, ValueError):
    """A numeric parameter is outside its documented range."""


class DimensionMismatchError(ApplicationClientError, ValueError):
    """Vector or matrix shapes do not chain."""


class FormatMismatchError(ApplicationClientError, ValueError):
    """Fixed-point operands carry different formats."""


class EmptySequenceError(ApplicationClientError, ValueError):
    """An aggregate was requested over no elements."""


class QuadrotorIndexError(ApplicationClientError, IndexError):
    """A quadrotor index does not exist in the world snapshot."""


class ScenarioValidationError(ApplicationClientError):
    """A scenario document or object violates its invariants."""


class WeightFileError(ApplicationClientError):
    """A weight document is malformed."""


class MissingWeightsError(ApplicationClientError):
    """A policy controller was requested without a weight file."""


class InfeasibleHoverError(ApplicationClientError):
    """The motors cannot lift the vehicle."""


class FixedPointOverflowError(ApplicationError, OverflowError):
    """An integer result left the representable range of its word or accumulator."""


class NonFiniteStateError(ApplicationError, ArithmeticError):
    """The integrator produced NaN or Inf."""


class EpisodeAbortedError(ApplicationError):
    """A closed-loop episode stopped early; ``log`` holds every tick recorded before the failure."""

    def __init__(self, *args: Any, log: TrajectoryLog, detail: str = "") -> None:
        self.log = log
        super().__init__(*args, detail=detail)
