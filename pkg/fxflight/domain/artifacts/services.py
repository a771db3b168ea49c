"""Readers and writers for weight files, quantized weight files, scenario documents, reports and trajectory CSVs."""

from __future__ import annotations

from pathlib import Path
from typing import TYPE_CHECKING, Final, TypeVar

import msgspec
import numpy as np
import pandas as pd
import structlog

from fxflight.domain.artifacts.schemas import (
    BoundsDocument,
    GainsDocument,
    LayerDocument,
    ParamsDocument,
    QuantizedLayerDocument,
    QuantizedWeightFile,
    ScenarioDocument,
    SetpointDocument,
    WeightFile,
)
from fxflight.domain.dynamics.schemas import QuadrotorParams
from fxflight.domain.fixedpoint.schemas import QFormat
from fxflight.domain.network.schemas import DeepsetsPolicy, MlpLayer, MlpWeights
from fxflight.domain.quantizer.schemas import QuantizedLayer, QuantizedMlp, QuantizedPolicy
from fxflight.domain.quantizer.services import dequantize_policy
from fxflight.domain.simharness.schemas import BaselineGains, FlightArea, Scenario, Setpoint, TrajectoryLog
from fxflight.lib.exceptions import ApplicationClientError, ScenarioValidationError, WeightFileError
from fxflight.lib.schema import encode_document
from fxflight.lib.settings import get_settings

if TYPE_CHECKING:
    from fxflight.domain.artifacts.schemas import HelixDocument
    from fxflight.domain.fixedpoint.schemas import RawArray
    from fxflight.domain.network.schemas import FloatArray

__all__ = (
    "CSV_COLUMNS",
    "builtin_scenario",
    "builtin_scenario_names",
    "export_csv",
    "load_quantized",
    "load_scenario",
    "load_weights",
    "parse_csv",
    "policy_from_document",
    "policy_to_document",
    "quantized_from_document",
    "quantized_to_document",
    "save_quantized",
    "save_weights",
    "scenario_from_document",
    "scenario_to_document",
    "write_document",
)

logger = structlog.get_logger()

CSV_COLUMNS: Final = (
    "t",
    "x",
    "y",
    "z",
    "vx",
    "vy",
    "vz",
    *(f"r{i}{j}" for i in range(1, 4) for j in range(1, 4)),
    "wx",
    "wy",
    "wz",
    "sx",
    "sy",
    "sz",
    "a1",
    "a2",
    "a3",
    "a4",
    "f1",
    "f2",
    "f3",
    "f4",
)

DocT = TypeVar("DocT", bound=msgspec.Struct)


def _decode(data: bytes, doc_type: type[DocT], error: type[ApplicationClientError], source: str) -> DocT:
    try:
        return msgspec.json.decode(data, type=doc_type, strict=True)
    except msgspec.ValidationError as exc:
        msg = f"{source}: {exc}"
        raise error(msg) from exc
    except msgspec.DecodeError as exc:
        msg = f"{source} is not valid JSON: {exc}"
        raise error(msg) from exc


def _read(path: Path, error: type[ApplicationClientError]) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        msg = f"cannot read {path}: {exc.strerror}"
        raise error(msg) from exc


def write_document(doc: msgspec.Struct, path: Path) -> None:
    Path(path).write_bytes(encode_document(doc))
    logger.debug("document written", path=str(path), kind=type(doc).__name__)


# -- float weights


def _mlp_from_layers(name: str, layers: list[LayerDocument]) -> MlpWeights:
    built: list[MlpLayer] = []
    for index, layer in enumerate(layers):
        try:
            built.append(MlpLayer(np.array(layer.weight, dtype=np.float64), np.array(layer.bias), layer.activation))
        except (ApplicationClientError, ValueError) as exc:
            msg = f"{name}.layers[{index}]: {exc}"
            raise WeightFileError(msg) from exc
    try:
        return MlpWeights(tuple(built))
    except ApplicationClientError as exc:
        msg = f"{name}: {exc}"
        raise WeightFileError(msg) from exc


def policy_from_document(doc: WeightFile) -> DeepsetsPolicy:
    try:
        return DeepsetsPolicy(
            _mlp_from_layers("self_encoder", doc.self_encoder),
            _mlp_from_layers("neighbor_mlp", doc.neighbor_mlp),
            _mlp_from_layers("head", doc.head),
        )
    except WeightFileError:
        raise
    except ApplicationClientError as exc:
        raise WeightFileError(str(exc)) from exc


def _layer_documents(mlp: MlpWeights) -> list[LayerDocument]:
    return [LayerDocument(layer.weight.tolist(), layer.bias.tolist(), layer.activation) for layer in mlp.layers]


def policy_to_document(p: DeepsetsPolicy, metadata: dict[str, str] | None = None) -> WeightFile:
    return WeightFile(
        self_encoder=_layer_documents(p.self_encoder),
        neighbor_mlp=_layer_documents(p.neighbor_mlp),
        head=_layer_documents(p.head),
        metadata=dict(metadata or {}),
    )


def load_weights(path: Path) -> DeepsetsPolicy:
    """Decode a weight file; malformed JSON, unknown fields, bad shapes and non-finite numbers raise ``WeightFileError``."""
    return policy_from_document(_decode(_read(path, WeightFileError), WeightFile, WeightFileError, str(path)))


def save_weights(p: DeepsetsPolicy, path: Path, metadata: dict[str, str] | None = None) -> None:
    write_document(policy_to_document(p, metadata), path)


# -- quantized weights


def _narrowed(array: RawArray, fmt: QFormat) -> RawArray:
    return array.astype(np.int64) if fmt.narrow else array


def quantized_to_document(qp: QuantizedPolicy) -> QuantizedWeightFile:
    def _layers(mlp: QuantizedMlp) -> list[QuantizedLayerDocument]:
        return [
            QuantizedLayerDocument(
                [[int(v) for v in row] for row in layer.weight],
                [int(v) for v in layer.bias],
                layer.activation,
            )
            for layer in mlp.layers
        ]

    return QuantizedWeightFile(
        frac_bits=qp.format.frac_bits,
        word_bits=qp.format.word_bits,
        accum_bits=qp.format.accum_bits,
        self_encoder=_layers(qp.self_encoder),
        neighbor_mlp=_layers(qp.neighbor_mlp),
        head=_layers(qp.head),
        mac_count=qp.mac_count(),
        memory_bytes=qp.memory_bytes,
    )


def quantized_from_document(doc: QuantizedWeightFile) -> QuantizedPolicy:
    """Rebuild a quantized policy; shapes and word ranges are checked the way float weight files are."""
    try:
        fmt = QFormat(frac_bits=doc.frac_bits, word_bits=doc.word_bits, accum_bits=doc.accum_bits)
    except ApplicationClientError as exc:
        raise WeightFileError(str(exc)) from exc

    def _mlp(name: str, layers: list[QuantizedLayerDocument]) -> QuantizedMlp:
        built = []
        for index, layer in enumerate(layers):
            where = f"{name}.layers[{index}]"
            weight, bias = np.array(layer.weight, dtype=object), np.array(layer.bias, dtype=object)
            if weight.ndim != 2 or bias.shape != (weight.shape[0],):
                msg = f"{where}: weight {weight.shape} and bias {bias.shape} do not form a layer"
                raise WeightFileError(msg)
            for array, part in ((weight, "weight"), (bias, "bias")):
                if array.size and (array.min() < fmt.word_min or array.max() > fmt.word_max):
                    msg = f"{where}.{part}: raws exceed the {fmt.word_bits}-bit word range"
                    raise WeightFileError(msg)
            if built and built[-1].out_dim != weight.shape[1]:
                msg = f"{where} expects {weight.shape[1]} inputs but the previous layer produces {built[-1].out_dim}"
                raise WeightFileError(msg)
            built.append(QuantizedLayer(_narrowed(weight, fmt), _narrowed(bias, fmt), layer.activation))
        if not built:
            msg = f"{name} has no layers"
            raise WeightFileError(msg)
        return QuantizedMlp(tuple(built))

    qp = QuantizedPolicy(
        _mlp("self_encoder", doc.self_encoder),
        _mlp("neighbor_mlp", doc.neighbor_mlp),
        _mlp("head", doc.head),
        fmt,
    )
    # reuse the float-side structural checks on the grid values
    try:
        dequantize_policy(qp)
    except ApplicationClientError as exc:
        raise WeightFileError(str(exc)) from exc
    return qp


def save_quantized(qp: QuantizedPolicy, path: Path) -> None:
    write_document(quantized_to_document(qp), path)


def load_quantized(path: Path) -> QuantizedPolicy:
    doc = _decode(_read(path, WeightFileError), QuantizedWeightFile, WeightFileError, str(path))
    return quantized_from_document(doc)


# -- scenarios


def _helix_setpoints(helix: HelixDocument) -> list[Setpoint]:
    if helix.points < 2 or len(helix.center) != 2:
        msg = "a helix needs a 2-d center and at least 2 points"
        raise ScenarioValidationError(msg)
    # linspace pins the last sample to the stop value, so the final setpoint is exact
    radius = np.linspace(helix.radius_start, helix.radius_end, helix.points)
    angle = np.linspace(0.0, 2.0 * np.pi * helix.turns, helix.points)
    z = np.linspace(helix.z_start, helix.z_end, helix.points)
    cx, cy = helix.center
    points = np.column_stack([cx + radius * np.cos(angle), cy + radius * np.sin(angle), z])
    last = helix.points - 1
    return [Setpoint(point, dwell=None if i == last else helix.dwell) for i, point in enumerate(points)]


def scenario_from_document(doc: ScenarioDocument) -> Scenario:
    sim = get_settings().simulation
    setpoints = [Setpoint(sp.position, sp.dwell, sp.timeout) for sp in doc.setpoints]
    if doc.helix is not None:
        setpoints.extend(_helix_setpoints(doc.helix))
    params_doc = doc.params or ParamsDocument()
    gains_doc = doc.gains or GainsDocument()
    try:
        params = QuadrotorParams(
            mass=params_doc.mass,
            inertia=np.array(params_doc.inertia),
            gravity=np.array(params_doc.gravity),
            arm_length=params_doc.arm_length,
            max_motor_thrust=params_doc.max_motor_thrust,
            torque_coefficient=params_doc.torque_coefficient,
        )
        bounds = FlightArea() if doc.bounds is None else FlightArea(np.array(doc.bounds.low), np.array(doc.bounds.high))
        return Scenario(
            name=doc.name,
            start=np.array(doc.start),
            setpoints=tuple(setpoints),
            bounds=bounds,
            dt=sim.DT if doc.dt is None else doc.dt,
            max_duration=doc.max_duration,
            controller=doc.controller,
            arrival_radius=sim.ARRIVAL_RADIUS if doc.arrival_radius is None else doc.arrival_radius,
            dwell=sim.DWELL if doc.dwell is None else doc.dwell,
            max_neighbors=sim.MAX_NEIGHBORS if doc.max_neighbors is None else doc.max_neighbors,
            seed=doc.seed,
            params=params,
            gains=BaselineGains(**gains_doc.to_dict()),
        )
    except ScenarioValidationError:
        raise
    except ApplicationClientError as exc:
        msg = f"scenario {doc.name!r}: {exc}"
        raise ScenarioValidationError(msg) from exc


def scenario_to_document(scn: Scenario) -> ScenarioDocument:
    p = scn.params
    return ScenarioDocument(
        name=scn.name,
        start=scn.start.tolist(),
        setpoints=[SetpointDocument(sp.position.tolist(), sp.dwell, sp.timeout) for sp in scn.setpoints],
        bounds=BoundsDocument(scn.bounds.low.tolist(), scn.bounds.high.tolist()),
        dt=scn.dt,
        max_duration=scn.max_duration,
        controller=scn.controller,
        arrival_radius=scn.arrival_radius,
        dwell=scn.dwell,
        max_neighbors=scn.max_neighbors,
        seed=scn.seed,
        params=ParamsDocument(
            mass=p.mass,
            inertia=p.inertia_diag.tolist(),
            gravity=p.gravity.tolist(),
            arm_length=p.arm_length,
            max_motor_thrust=p.max_motor_thrust,
            torque_coefficient=p.torque_coefficient,
        ),
        gains=GainsDocument(**{name: getattr(scn.gains, name) for name in GainsDocument.__struct_fields__}),
    )


def load_scenario(path: Path) -> Scenario:
    data = _read(path, ScenarioValidationError)
    return scenario_from_document(_decode(data, ScenarioDocument, ScenarioValidationError, str(path)))


def builtin_scenario_names(fixture_path: Path | None = None) -> list[str]:
    directory = Path(fixture_path or get_settings().simulation.FIXTURE_PATH)
    return sorted(path.stem for path in directory.glob("*.json"))


def builtin_scenario(name: str, fixture_path: Path | None = None) -> Scenario:
    """Load the versioned scenario fixture ``<name>.json``."""
    directory = Path(fixture_path or get_settings().simulation.FIXTURE_PATH)
    path = directory / f"{name}.json"
    if not path.is_file():
        msg = f"unknown scenario {name!r}; built-in scenarios: {', '.join(builtin_scenario_names(directory))}"
        raise ScenarioValidationError(msg)
    return load_scenario(path)


# -- trajectory CSV


def _log_matrix(log: TrajectoryLog) -> FloatArray:
    return np.column_stack([log.times, log.states, log.setpoints, log.actions, log.motors])


def export_csv(log: TrajectoryLog, path: Path) -> None:
    """Write one row per tick; floats use the shortest text that parses back to the same double."""
    frame = pd.DataFrame(_log_matrix(log), columns=list(CSV_COLUMNS))
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.debug("trajectory written", path=str(path), rows=len(frame))


def parse_csv(path: Path) -> TrajectoryLog:
    try:
        frame = pd.read_csv(path, float_precision="round_trip", dtype=np.float64)
    except (OSError, ValueError) as exc:
        msg = f"cannot parse trajectory {path}: {exc}"
        raise ScenarioValidationError(msg) from exc
    if tuple(frame.columns) != CSV_COLUMNS:
        msg = f"{path}: expected columns {', '.join(CSV_COLUMNS)}"
        raise ScenarioValidationError(msg)
    values = frame.to_numpy(dtype=np.float64)
    return TrajectoryLog(values[:, 0], values[:, 1:19], values[:, 19:22], values[:, 22:26], values[:, 26:30])
