from __future__ import annotations

import logging
import sys
from functools import lru_cache
from typing import TYPE_CHECKING

import numpy as np
import structlog

from fxflight.lib.settings import get_settings

if TYPE_CHECKING:
    from typing import Any

    from structlog.types import EventDict, Processor, WrappedLogger

__all__ = ("configure_logging", "convert_numpy_values")


def convert_numpy_values(_: WrappedLogger, __: str, event_dict: EventDict) -> EventDict:
    """Replace numpy scalars and arrays with builtin values so every renderer can serialize them.

    Args:
        _: Wrapped logger object.
        __: Name of the wrapped method, e.g., "info", "warning", etc.
        event_dict: Current context with current event, e.g, `{"a": 42, "event": "foo"}`.

    Returns:
        `event_dict` with numpy values converted.
    """
    for key, value in event_dict.items():
        if isinstance(value, np.ndarray):
            event_dict[key] = value.tolist()
        elif isinstance(value, np.generic):
            event_dict[key] = value.item()
    return event_dict


@lru_cache
def _is_tty() -> bool:
    return bool(sys.stderr.isatty() or sys.stdout.isatty())


def _processors(as_json: bool) -> list[Processor]:
    processors: list[Processor] = [
        structlog.contextvars.merge_contextvars,
        structlog.processors.add_log_level,
        structlog.processors.TimeStamper(fmt="iso", utc=True),
        convert_numpy_values,
        structlog.processors.StackInfoRenderer(),
    ]
    if as_json:
        processors.extend(
            [
                structlog.processors.dict_tracebacks,
                structlog.processors.EventRenamer("message"),
                structlog.processors.JSONRenderer(),
            ],
        )
    else:
        processors.append(structlog.dev.ConsoleRenderer(colors=_is_tty()))
    return processors


def _stderr_logger(*_: Any) -> structlog.PrintLogger:
    # looked up per logger: sys.stderr may be swapped after configuration
    return structlog.PrintLogger(file=sys.stderr)


@lru_cache(maxsize=1)
def configure_logging() -> None:
    """Configure structlog once per process from :class:`LogSettings`.

    Logs go to stderr so command output on stdout stays machine readable.
    """
    settings = get_settings()
    as_json = settings.log.FORCE_JSON or not _is_tty()
    structlog.configure(
        processors=_processors(as_json),
        wrapper_class=structlog.make_filtering_bound_logger(settings.log.LEVEL),
        logger_factory=_stderr_logger,
        cache_logger_on_first_use=False,
    )
    logging.basicConfig(level=settings.log.LEVEL, stream=sys.stderr, format="%(message)s")
