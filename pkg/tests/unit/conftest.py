from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest
from click.testing import CliRunner

from fxflight.domain.dynamics.schemas import QuadrotorParams
from fxflight.domain.network.schemas import Activation, DeepsetsPolicy, MlpLayer, MlpWeights
from fxflight.domain.network.services import random_policy
from fxflight.domain.simharness.schemas import Scenario, Setpoint

if TYPE_CHECKING:
    from pathlib import Path


@pytest.fixture()
def cli_runner() -> CliRunner:
    return CliRunner()


@pytest.fixture(name="policy")
def fx_policy() -> DeepsetsPolicy:
    """Seeded random policy at the default 18-16-16 / 6-8-8 / 24-32-4 sizes."""
    return random_policy(seed=7)


@pytest.fixture(name="zero_policy")
def fx_zero_policy() -> DeepsetsPolicy:
    def _zeros(dims: list[int], last: Activation = Activation.RELU) -> MlpWeights:
        layers = [
            MlpLayer(np.zeros((fan_out, fan_in)), np.zeros(fan_out))
            for fan_in, fan_out in zip(dims[:-2], dims[1:-1], strict=True)
        ]
        layers.append(MlpLayer(np.zeros((dims[-1], dims[-2])), np.zeros(dims[-1]), last))
        return MlpWeights(tuple(layers))

    return DeepsetsPolicy(_zeros([18, 16, 16]), _zeros([6, 8, 8]), _zeros([24, 32, 4], Activation.NONE))


@pytest.fixture(name="single_weight_policy")
def fx_single_weight_policy() -> DeepsetsPolicy:
    """``a_0 = 0.5 * o_0``; every other weight is zero so one product decides the output."""
    encoder_weight = np.zeros((1, 18))
    encoder_weight[0, 0] = 0.5
    head_weight = np.zeros((4, 2))
    head_weight[0, 0] = 1.0
    return DeepsetsPolicy(
        MlpWeights((MlpLayer(encoder_weight, np.zeros(1)),)),
        MlpWeights((MlpLayer(np.zeros((1, 6)), np.zeros(1)),)),
        MlpWeights((MlpLayer(head_weight, np.zeros(4), Activation.NONE),)),
    )


@pytest.fixture(name="params")
def fx_params() -> QuadrotorParams:
    return QuadrotorParams()


@pytest.fixture(name="hold_scenario")
def fx_hold_scenario() -> Scenario:
    """Hold a single setpoint at the start position."""
    start = np.array([3.0, 2.0, 1.0])
    return Scenario(name="hold", start=start, setpoints=(Setpoint(start),), max_duration=5.0)


@pytest.fixture(name="weights_file")
def fx_weights_file(tmp_path: Path, policy: DeepsetsPolicy) -> Path:
    from fxflight.domain.artifacts.services import save_weights

    path = tmp_path / "weights.json"
    save_weights(policy, path, metadata={"source": "random_policy", "seed": "7"})
    return path
