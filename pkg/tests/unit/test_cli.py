from __future__ import annotations

import json
from typing import TYPE_CHECKING

import numpy as np
import pytest

from fxflight.__metadata__ import __version__
from fxflight.cli import EXIT_RUNTIME_ERROR, EXIT_VALIDATION_ERROR, fxflight_app
from fxflight.domain.artifacts.services import load_quantized, load_weights, parse_csv, save_weights
from fxflight.domain.network.schemas import DeepsetsPolicy, MlpLayer, MlpWeights

if TYPE_CHECKING:
    from pathlib import Path

    from click.testing import CliRunner


def test_help(cli_runner: CliRunner) -> None:
    result = cli_runner.invoke(fxflight_app, ["--help"])
    assert result.exit_code == 0
    for command in ("random-weights", "calibrate", "quantize", "simulate", "compare"):
        assert command in result.output


def test_version(cli_runner: CliRunner) -> None:
    result = cli_runner.invoke(fxflight_app, ["--version"])
    assert result.exit_code == 0
    assert "fxflight" in result.output
    assert __version__ in result.output


def test_random_weights(cli_runner: CliRunner, tmp_path: Path) -> None:
    out = tmp_path / "weights.json"
    result = cli_runner.invoke(fxflight_app, ["random-weights", "--seed", "3", "--out", str(out)])
    assert result.exit_code == 0, result.output
    policy = load_weights(out)
    assert policy.head.layers[-1].weight.shape == (4, 32)
    assert json.loads(out.read_text())["metadata"] == {"source": "random_policy", "seed": "3"}


def test_calibrate_report_is_reproducible(cli_runner: CliRunner, weights_file: Path, tmp_path: Path) -> None:
    reports = []
    for name in ("first.json", "second.json"):
        out = tmp_path / name
        result = cli_runner.invoke(
            fxflight_app,
            ["calibrate", "--weights", str(weights_file), "--samples", "200", "--n-max", "12", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        assert "Selected n =" in result.output
        reports.append(out.read_bytes())
    assert reports[0] == reports[1]
    document = json.loads(reports[0])
    assert [row["frac_bits"] for row in document["rows"]] == list(range(1, 13))
    assert document["sample_count"] == 200


def test_quantize(cli_runner: CliRunner, weights_file: Path, tmp_path: Path) -> None:
    out = tmp_path / "quantized.json"
    result = cli_runner.invoke(fxflight_app, ["quantize", "--weights", str(weights_file), "--n", "10", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert load_quantized(out).format.frac_bits == 10


def test_calibrate_with_saturation(cli_runner: CliRunner, zero_policy: DeepsetsPolicy, tmp_path: Path) -> None:
    # 1e5 leaves the 32-bit word at n >= 15; the unit it scales is always zero, so clamping costs no accuracy
    first, second = zero_policy.head.layers
    weight = np.zeros((32, 24))
    weight[0, 0] = 1e5
    loud = DeepsetsPolicy(
        zero_policy.self_encoder,
        zero_policy.neighbor_mlp,
        MlpWeights((MlpLayer(weight, first.bias, first.activation), second)),
    )
    weights_file = tmp_path / "loud.json"
    save_weights(loud, weights_file)
    args = ["calibrate", "--weights", str(weights_file), "--samples", "50", "--n-min", "16", "--n-max", "17"]

    plain = tmp_path / "plain.json"
    result = cli_runner.invoke(fxflight_app, [*args, "--out", str(plain)])
    assert result.exit_code == EXIT_RUNTIME_ERROR
    assert not plain.exists()

    clamped = tmp_path / "clamped.json"
    result = cli_runner.invoke(fxflight_app, [*args, "--saturate", "--out", str(clamped)])
    assert result.exit_code == 0, result.output
    document = json.loads(clamped.read_text())
    assert document["saturate"] is True
    assert document["selected_n"] == 16
    assert [row["max_abs_error"] for row in document["rows"]] == [0.0, 0.0]


def test_quantize_is_reproducible(
    cli_runner: CliRunner,
    single_weight_policy: DeepsetsPolicy,
    tmp_path: Path,
) -> None:
    weights_file = tmp_path / "single.json"
    save_weights(single_weight_policy, weights_file)
    documents = []
    for name in ("first.json", "second.json"):
        out = tmp_path / name
        result = cli_runner.invoke(
            fxflight_app,
            ["quantize", "--weights", str(weights_file), "--n", "4", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        documents.append(out.read_bytes())
    assert documents[0] == documents[1]
    document = json.loads(documents[0])
    assert document["frac_bits"] == 4
    assert document["self_encoder"][0]["weight"][0][0] == 8
    assert document["head"][0]["weight"][0][0] == 16


def test_simulate_baseline(cli_runner: CliRunner, tmp_path: Path) -> None:
    out = tmp_path / "trajectory.csv"
    result = cli_runner.invoke(
        fxflight_app,
        ["simulate", "--scenario", "rectangle", "--controller", "baseline", "--max-duration", "0", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    assert len(parse_csv(out)) == 1
    assert "Tracking metrics" in result.output


def test_simulate_fixed_policy(cli_runner: CliRunner, weights_file: Path, tmp_path: Path) -> None:
    out = tmp_path / "trajectory.csv"
    result = cli_runner.invoke(
        fxflight_app,
        [
            "simulate",
            "--scenario",
            "directions",
            "--controller",
            "fixed",
            "--weights",
            str(weights_file),
            "--n",
            "12",
            "--max-duration",
            "0.5",
            "--out",
            str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    assert len(parse_csv(out)) == 51


def test_simulate_is_reproducible(cli_runner: CliRunner, weights_file: Path, tmp_path: Path) -> None:
    trajectories = []
    for name in ("first.csv", "second.csv"):
        out = tmp_path / name
        result = cli_runner.invoke(
            fxflight_app,
            [
                "simulate",
                "--scenario",
                "directions",
                "--controller",
                "fixed",
                "--weights",
                str(weights_file),
                "--n",
                "12",
                "--max-duration",
                "1",
                "--out",
                str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        trajectories.append(out.read_bytes())
    assert trajectories[0] == trajectories[1]


def test_simulate_spiral_reaches_final_setpoint(cli_runner: CliRunner, tmp_path: Path) -> None:
    out = tmp_path / "spiral.csv"
    result = cli_runner.invoke(
        fxflight_app,
        ["simulate", "--scenario", "spiral", "--controller", "baseline", "--max-duration", "120", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    log = parse_csv(out)
    assert log.setpoints[-1].tolist() == [3.25, 2.25, 0.8]
    assert log.setpoints[-1][2] - log.positions[0][2] == pytest.approx(0.8)
    assert log.positions[-1].tolist() == pytest.approx([3.25, 2.25, 0.8], abs=0.1)


def test_compare_float_against_float(cli_runner: CliRunner, weights_file: Path, tmp_path: Path) -> None:
    out = tmp_path / "comparison"
    result = cli_runner.invoke(
        fxflight_app,
        [
            "compare",
            "--scenario",
            "directions",
            "--weights",
            str(weights_file),
            "--candidate",
            "float",
            "--max-duration",
            "0.5",
            "--out",
            str(out),
        ],
    )
    assert result.exit_code == 0, result.output
    report = json.loads((out / "divergence.json").read_text())
    assert max(report["action_error"]) == 0.0
    assert max(report["position_divergence"]) == 0.0
    assert parse_csv(out / "reference.csv").equals(parse_csv(out / "candidate.csv"))


def test_compare_is_reproducible(cli_runner: CliRunner, weights_file: Path, tmp_path: Path) -> None:
    reports = []
    for name in ("first", "second"):
        out = tmp_path / name
        result = cli_runner.invoke(
            fxflight_app,
            [
                "compare",
                "--scenario",
                "directions",
                "--weights",
                str(weights_file),
                "--n",
                "12",
                "--max-duration",
                "0.5",
                "--out",
                str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        reports.append((out / "divergence.json").read_bytes())
    assert reports[0] == reports[1]
    assert json.loads(reports[0])["frac_bits"] == 12


def test_malformed_weight_file_exits_with_validation_code(cli_runner: CliRunner, tmp_path: Path) -> None:
    weights = tmp_path / "weights.json"
    weights.write_text('{"self_encoder": [], "neighbor_mlp": [], "head": [], "extra": true}')
    result = cli_runner.invoke(fxflight_app, ["calibrate", "--weights", str(weights)])
    assert result.exit_code == EXIT_VALIDATION_ERROR
    assert "error:" in result.output


@pytest.mark.parametrize(
    "args",
    [
        ["simulate", "--controller", "float", "--max-duration", "0"],
        ["simulate", "--controller", "fixed", "--max-duration", "0", "--weights"],
    ],
)
def test_missing_weights_exit_with_validation_code(
    cli_runner: CliRunner,
    weights_file: Path,
    tmp_path: Path,
    args: list[str],
) -> None:
    if args[-1] == "--weights":
        args = [*args, str(weights_file)]
    result = cli_runner.invoke(fxflight_app, [*args, "--out", str(tmp_path / "trajectory.csv")])
    assert result.exit_code == EXIT_VALIDATION_ERROR
    assert "needs" in result.output


def test_unknown_scenario(cli_runner: CliRunner, tmp_path: Path) -> None:
    result = cli_runner.invoke(
        fxflight_app,
        ["simulate", "--scenario", "loop-the-loop", "--out", str(tmp_path / "trajectory.csv")],
    )
    assert result.exit_code == EXIT_VALIDATION_ERROR


def test_overflowing_fixed_controller_exits_with_runtime_code(
    cli_runner: CliRunner,
    zero_policy: DeepsetsPolicy,
    tmp_path: Path,
) -> None:
    # r11 = 1 at rest, so the first hidden unit reaches 7.8, past the +-4 range of 29 fractional bits
    weight = np.zeros((16, 18))
    weight[0, 6] = 3.9
    bias = np.zeros(16)
    bias[0] = 3.9
    _, second = zero_policy.self_encoder.layers
    loud = DeepsetsPolicy(MlpWeights((MlpLayer(weight, bias), second)), zero_policy.neighbor_mlp, zero_policy.head)
    weights_file = tmp_path / "loud.json"
    save_weights(loud, weights_file)
    out = tmp_path / "trajectory.csv"
    result = cli_runner.invoke(
        fxflight_app,
        [
            "simulate",
            "--scenario",
            "directions",
            "--controller",
            "fixed",
            "--weights",
            str(weights_file),
            "--n",
            "29",
            "--max-duration",
            "0.5",
            "--out",
            str(out),
        ],
    )
    assert result.exit_code == EXIT_RUNTIME_ERROR
    assert len(parse_csv(out)) == 0
