from __future__ import annotations

from typing import TYPE_CHECKING

import pytest

from fxflight.lib import settings as base

if TYPE_CHECKING:
    from pytest import MonkeyPatch


@pytest.fixture(autouse=True)
def _patch_settings(monkeypatch: MonkeyPatch) -> None:
    """Fresh settings per test, read from the environment at fixture time."""

    settings = base.Settings()

    def get_settings(dotenv_filename: str = ".env.testing") -> base.Settings:
        return settings

    def from_env(dotenv_filename: str = ".env.testing") -> base.Settings:
        return settings

    monkeypatch.setattr(base, "get_settings", get_settings)
    monkeypatch.setattr(base.Settings, "from_env", staticmethod(from_env))
