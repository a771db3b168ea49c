from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Final

DEFAULT_MODULE_NAME = "fxflight"
BASE_DIR: Final[Path] = Path(__file__).resolve().parent.parent

TRUE_VALUES = {"True", "true", "1", "yes", "Y", "T"}


@dataclass
class AppSettings:
    """Application configuration"""

    NAME: str = field(default_factory=lambda: os.getenv("APP_NAME", "fxflight"))
    """Application name."""
    DEBUG: bool = field(default_factory=lambda: os.getenv("APP_DEBUG", "False") in TRUE_VALUES)
    """Print tracebacks for runtime failures in the CLI."""


@dataclass
class FixedPointSettings:
    """Integer arithmetic defaults for the quantized inference path."""

    WORD_BITS: int = field(default_factory=lambda: int(os.getenv("FXP_WORD_BITS", "32")))
    """Storage width of weights and activations."""
    ACCUM_BITS: int = field(default_factory=lambda: int(os.getenv("FXP_ACCUM_BITS", "64")))
    """Accumulator width used inside dot products."""
    SATURATE: bool = field(default_factory=lambda: os.getenv("FXP_SATURATE", "False") in TRUE_VALUES)
    """Clamp word-sized results to range instead of raising on overflow."""


@dataclass
class CalibrationSettings:
    """Fractional-bit sweep configuration."""

    N_MIN: int = field(default_factory=lambda: int(os.getenv("CALIBRATION_N_MIN", "1")))
    """First fractional-bit count of the sweep."""
    N_MAX: int = field(default_factory=lambda: int(os.getenv("CALIBRATION_N_MAX", "14")))
    """Last fractional-bit count of the sweep (inclusive)."""
    SAMPLES: int = field(default_factory=lambda: int(os.getenv("CALIBRATION_SAMPLES", "1000")))
    """Number of random observation samples per sweep."""
    SEED: int = field(default_factory=lambda: int(os.getenv("CALIBRATION_SEED", "0")))
    """Seed of the sample generator."""
    NEIGHBORS: int = field(default_factory=lambda: int(os.getenv("CALIBRATION_NEIGHBORS", "2")))
    """Neighbor observations drawn per sample."""
    WORKERS: int = field(default_factory=lambda: int(os.getenv("CALIBRATION_WORKERS", "1")))
    """Worker threads evaluating sweep entries; 1 runs the sweep inline."""
    RESAMPLE_PER_N: bool = field(
        default_factory=lambda: os.getenv("CALIBRATION_RESAMPLE_PER_N", "False") in TRUE_VALUES,
    )
    """Draw a fresh sample set for every fractional-bit count."""


@dataclass
class SimulationSettings:
    """Closed-loop harness defaults."""

    DT: float = field(default_factory=lambda: float(os.getenv("SIM_DT", "0.01")))
    """Physics and control period in seconds."""
    ARRIVAL_RADIUS: float = field(default_factory=lambda: float(os.getenv("SIM_ARRIVAL_RADIUS", "0.1")))
    """Distance in metres at which a setpoint counts as reached."""
    DWELL: float = field(default_factory=lambda: float(os.getenv("SIM_DWELL", "1.0")))
    """Seconds to hold a reached setpoint before advancing."""
    MAX_NEIGHBORS: int = field(default_factory=lambda: int(os.getenv("SIM_MAX_NEIGHBORS", "0")))
    """Neighbor observations handed to the policy (solo flight uses 0)."""
    FIXTURE_PATH: Path = field(
        default_factory=lambda: Path(os.getenv("SCENARIO_FIXTURE_PATH", f"{BASE_DIR}/domain/simharness/fixtures")),
    )
    """Directory holding the built-in scenario documents."""


@dataclass
class LogSettings:
    """Logger configuration"""

    LEVEL: int = field(default_factory=lambda: int(os.getenv("LOG_LEVEL", "30")))
    """Stdlib log levels.

    Only emit logs at this level, or higher.
    """
    FORCE_JSON: bool = field(default_factory=lambda: os.getenv("LOG_FORCE_JSON", "False") in TRUE_VALUES)
    """Render JSON lines even when attached to a terminal."""


@dataclass
class Settings:
    app: AppSettings = field(default_factory=AppSettings)
    fixed_point: FixedPointSettings = field(default_factory=FixedPointSettings)
    calibration: CalibrationSettings = field(default_factory=CalibrationSettings)
    simulation: SimulationSettings = field(default_factory=SimulationSettings)
    log: LogSettings = field(default_factory=LogSettings)

    @classmethod
    @lru_cache(maxsize=1, typed=True)
    def from_env(cls, dotenv_filename: str = ".env") -> Settings:
        env_file = Path(f"{os.curdir}/{dotenv_filename}")
        if env_file.is_file():
            from dotenv import load_dotenv

            load_dotenv(env_file, override=True)
        return Settings()


def get_settings() -> Settings:
    return Settings.from_env()
