from __future__ import annotations

from typing import TYPE_CHECKING

import msgspec
import numpy as np
import pytest

from fxflight.domain.artifacts.schemas import ScenarioDocument, SetpointDocument
from fxflight.domain.artifacts.services import (
    CSV_COLUMNS,
    builtin_scenario,
    builtin_scenario_names,
    export_csv,
    load_quantized,
    load_scenario,
    load_weights,
    parse_csv,
    policy_to_document,
    quantized_to_document,
    save_quantized,
    save_weights,
    scenario_from_document,
    scenario_to_document,
    write_document,
)
from fxflight.domain.quantizer.services import quantize_policy
from fxflight.domain.simharness.services import run_closed_loop
from fxflight.lib.exceptions import ScenarioValidationError, WeightFileError
from fxflight.lib.schema import encode_document

if TYPE_CHECKING:
    from pathlib import Path

    from fxflight.domain.network.schemas import DeepsetsPolicy, MlpWeights
    from fxflight.domain.quantizer.schemas import QuantizedMlp


def _same_mlp(a: MlpWeights | QuantizedMlp, b: MlpWeights | QuantizedMlp) -> bool:
    return len(a.layers) == len(b.layers) and all(
        np.array_equal(la.weight, lb.weight) and np.array_equal(la.bias, lb.bias) and la.activation is lb.activation
        for la, lb in zip(a.layers, b.layers, strict=True)
    )


def test_weights_round_trip(policy: DeepsetsPolicy, weights_file: Path) -> None:
    loaded = load_weights(weights_file)
    for name, mlp in policy.mlps().items():
        assert _same_mlp(mlp, loaded.mlps()[name])


def test_weight_file_is_stable(policy: DeepsetsPolicy, tmp_path: Path) -> None:
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    save_weights(policy, first)
    save_weights(load_weights(first), second)
    assert first.read_bytes() == second.read_bytes()
    assert first.read_bytes().endswith(b"}\n")


def test_malformed_layer_is_named(policy: DeepsetsPolicy, tmp_path: Path) -> None:
    doc = policy_to_document(policy)
    doc.head[0].bias.pop()
    path = tmp_path / "weights.json"
    write_document(doc, path)
    with pytest.raises(WeightFileError, match=r"head\.layers\[0\]"):
        load_weights(path)


def test_chain_mismatch_is_named(policy: DeepsetsPolicy, tmp_path: Path) -> None:
    doc = policy_to_document(policy)
    doc.self_encoder[1].weight = [row[:-1] for row in doc.self_encoder[1].weight]
    path = tmp_path / "weights.json"
    write_document(doc, path)
    with pytest.raises(WeightFileError, match="self_encoder"):
        load_weights(path)


@pytest.mark.parametrize(
    "payload",
    [
        b'{"self_encoder": [], "neighbor_mlp": [], "head": [], "surprise": 1}',
        b'{"self_encoder": [{"weight": [[NaN]], "bias": [0.0]}], "neighbor_mlp": [], "head": []}',
        b'{"self_encoder": [{"weight": [["1"]], "bias": [0.0]}], "neighbor_mlp": [], "head": []}',
        b"not json",
    ],
)
def test_invalid_weight_documents(payload: bytes, tmp_path: Path) -> None:
    path = tmp_path / "weights.json"
    path.write_bytes(payload)
    with pytest.raises(WeightFileError):
        load_weights(path)


def test_missing_weight_file(tmp_path: Path) -> None:
    with pytest.raises(WeightFileError, match="cannot read"):
        load_weights(tmp_path / "absent.json")


def test_quantized_round_trip(single_weight_policy: DeepsetsPolicy, policy: DeepsetsPolicy, tmp_path: Path) -> None:
    path = tmp_path / "quantized.json"
    save_quantized(quantize_policy(single_weight_policy, 4), path)
    loaded = load_quantized(path)
    assert loaded.format.frac_bits == 4
    assert int(loaded.self_encoder.layers[0].weight[0, 0]) == 8
    assert int(loaded.head.layers[0].weight[0, 0]) == 16

    qp = quantize_policy(policy, 12)
    save_quantized(qp, path)
    loaded = load_quantized(path)
    assert loaded.format == qp.format
    for name, mlp in qp.mlps().items():
        assert _same_mlp(mlp, loaded.mlps()[name])


def test_quantized_document_reports_cost(policy: DeepsetsPolicy) -> None:
    qp = quantize_policy(policy, 10)
    doc = quantized_to_document(qp)
    assert doc.mac_count == qp.mac_count()
    assert doc.memory_bytes == qp.memory_bytes


def test_quantized_raw_outside_word_range(single_weight_policy: DeepsetsPolicy, tmp_path: Path) -> None:
    doc = quantized_to_document(quantize_policy(single_weight_policy, 4))
    doc.head[0].weight[0][0] = 1 << 40
    path = tmp_path / "quantized.json"
    write_document(doc, path)
    with pytest.raises(WeightFileError, match=r"head\.layers\[0\]\.weight"):
        load_quantized(path)


def test_builtin_scenarios_load() -> None:
    assert builtin_scenario_names() == ["directions", "rectangle", "spiral"]
    with pytest.raises(ScenarioValidationError, match="directions, rectangle, spiral"):
        builtin_scenario("figure-eight")


def test_spiral_helix_expansion() -> None:
    spiral = builtin_scenario("spiral")
    assert len(spiral.setpoints) == 17
    assert spiral.setpoints[-1].position.tolist() == [3.25, 2.25, 0.8]
    assert spiral.setpoints[-1].dwell is None
    assert all(sp.dwell == 0.0 for sp in spiral.setpoints[:-1])
    heights = [sp.position[2] for sp in spiral.setpoints]
    assert heights == sorted(heights)


def test_scenario_round_trip(tmp_path: Path) -> None:
    rectangle = builtin_scenario("rectangle")
    path = tmp_path / "rectangle.json"
    write_document(scenario_to_document(rectangle), path)
    loaded = load_scenario(path)
    assert loaded.name == rectangle.name
    assert loaded.start.tolist() == rectangle.start.tolist()
    assert [sp.position.tolist() for sp in loaded.setpoints] == [sp.position.tolist() for sp in rectangle.setpoints]
    assert (loaded.dt, loaded.max_duration, loaded.dwell, loaded.arrival_radius) == (
        rectangle.dt,
        rectangle.max_duration,
        rectangle.dwell,
        rectangle.arrival_radius,
    )
    assert loaded.gains == rectangle.gains
    assert loaded.params.mass == rectangle.params.mass


def test_scenario_defaults_come_from_settings() -> None:
    doc = ScenarioDocument(name="hover", start=[1.0, 1.0, 1.0], setpoints=[SetpointDocument([1.0, 1.0, 1.5])])
    scn = scenario_from_document(doc)
    assert (scn.dt, scn.arrival_radius, scn.dwell, scn.max_neighbors) == (0.01, 0.1, 1.0, 0)


def test_invalid_scenario_documents(tmp_path: Path) -> None:
    outside = ScenarioDocument(name="far", start=[1.0, 1.0, 1.0], setpoints=[SetpointDocument([1.0, 1.0, 9.0])])
    with pytest.raises(ScenarioValidationError, match="setpoint 0"):
        scenario_from_document(outside)
    heavy = msgspec.json.decode(
        b'{"name": "heavy", "start": [1, 1, 1], "setpoints": [{"position": [1, 1, 1]}], "params": {"mass": -1}}',
        type=ScenarioDocument,
    )
    with pytest.raises(ScenarioValidationError, match="heavy"):
        scenario_from_document(heavy)
    path = tmp_path / "typo.json"
    path.write_bytes(b'{"name": "typo", "start": [1, 1, 1], "setpionts": []}')
    with pytest.raises(ScenarioValidationError):
        load_scenario(path)


def test_csv_round_trip(tmp_path: Path) -> None:
    scn = builtin_scenario("directions").replace(max_duration=1.0)
    log = run_closed_loop(scn)
    path = tmp_path / "trajectory.csv"
    export_csv(log, path)
    header = path.read_text().splitlines()[0].split(",")
    assert header == list(CSV_COLUMNS)
    assert len(header) == 30
    assert parse_csv(path).equals(log)


def test_csv_with_wrong_columns(tmp_path: Path) -> None:
    path = tmp_path / "trajectory.csv"
    path.write_text("t,x,y\n0.0,1.0,2.0\n")
    with pytest.raises(ScenarioValidationError, match="expected columns"):
        parse_csv(path)


def test_encode_document_is_deterministic(policy: DeepsetsPolicy) -> None:
    doc = policy_to_document(policy, {"seed": "7"})
    assert encode_document(doc) == encode_document(policy_to_document(policy, {"seed": "7"}))
    assert b'"schema_version": 1' in encode_document(doc)
