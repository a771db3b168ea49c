from __future__ import annotations

from dataclasses import dataclass
from enum import StrEnum
from typing import Final

import numpy as np
import numpy.typing as npt

from fxflight.lib.exceptions import DimensionMismatchError, InvalidParameterError

__all__ = (
    "ACTION_DIM",
    "NEIGHBOR_OBS_DIM",
    "SELF_OBS_DIM",
    "Activation",
    "ActionVec",
    "DeepsetsPolicy",
    "FloatArray",
    "MlpLayer",
    "MlpWeights",
    "MotorCommand",
)

FloatArray = npt.NDArray[np.float64]
ActionVec = FloatArray
"""Raw network output of length 4; unconstrained until :func:`action_to_motor` clips it."""

SELF_OBS_DIM: Final = 18
NEIGHBOR_OBS_DIM: Final = 6
ACTION_DIM: Final = 4


def _frozen(values: npt.ArrayLike) -> FloatArray:
    array = np.array(values, dtype=np.float64)
    array.flags.writeable = False
    return array


class Activation(StrEnum):
    RELU = "relu"
    NONE = "none"


@dataclass(frozen=True, slots=True)
class MlpLayer:
    """``activation(weight @ x + bias)`` with ``weight`` of shape ``(out, in)``."""

    weight: FloatArray
    bias: FloatArray
    activation: Activation = Activation.RELU

    def __post_init__(self) -> None:
        weight = _frozen(self.weight)
        bias = _frozen(self.bias)
        if weight.ndim != 2 or bias.shape != (weight.shape[0],):
            msg = f"weight {weight.shape} and bias {bias.shape} do not form a layer"
            raise DimensionMismatchError(msg)
        if not (np.all(np.isfinite(weight)) and np.all(np.isfinite(bias))):
            msg = "layer parameters must be finite"
            raise InvalidParameterError(msg)
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def in_dim(self) -> int:
        return int(self.weight.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weight.shape[0])


@dataclass(frozen=True, slots=True)
class MlpWeights:
    layers: tuple[MlpLayer, ...]

    def __post_init__(self) -> None:
        layers = tuple(self.layers)
        if not layers:
            msg = "an MLP needs at least one layer"
            raise DimensionMismatchError(msg)
        for index, (prev, layer) in enumerate(zip(layers, layers[1:], strict=False), start=1):
            if layer.in_dim != prev.out_dim:
                msg = f"layer {index} expects {layer.in_dim} inputs but layer {index - 1} produces {prev.out_dim}"
                raise DimensionMismatchError(msg)
        object.__setattr__(self, "layers", layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim


@dataclass(frozen=True, slots=True)
class DeepsetsPolicy:
    """Self encoder ``E^q``, neighbor MLP ``B`` (mean pooled into ``E^k``) and output MLP ``H``."""

    self_encoder: MlpWeights
    neighbor_mlp: MlpWeights
    head: MlpWeights

    def __post_init__(self) -> None:
        if self.self_encoder.in_dim != SELF_OBS_DIM:
            msg = f"self_encoder takes {self.self_encoder.in_dim} inputs, expected {SELF_OBS_DIM}"
            raise DimensionMismatchError(msg)
        if self.neighbor_mlp.in_dim != NEIGHBOR_OBS_DIM:
            msg = f"neighbor_mlp takes {self.neighbor_mlp.in_dim} inputs, expected {NEIGHBOR_OBS_DIM}"
            raise DimensionMismatchError(msg)
        embed = self.self_encoder.out_dim + self.neighbor_mlp.out_dim
        if self.head.in_dim != embed:
            msg = f"head takes {self.head.in_dim} inputs, encoders produce {embed}"
            raise DimensionMismatchError(msg)
        if self.head.out_dim != ACTION_DIM:
            msg = f"head produces {self.head.out_dim} outputs, expected {ACTION_DIM}"
            raise DimensionMismatchError(msg)
        if self.head.layers[-1].activation is not Activation.NONE:
            msg = "the output layer of head must not have an activation"
            raise DimensionMismatchError(msg)

    def mlps(self) -> dict[str, MlpWeights]:
        return {"self_encoder": self.self_encoder, "neighbor_mlp": self.neighbor_mlp, "head": self.head}


@dataclass(frozen=True, slots=True)
class MotorCommand:
    """Normalized per-motor thrust fractions ``f_hat``, each in ``[0, 1]``."""

    f_hat: FloatArray

    def __post_init__(self) -> None:
        f_hat = _frozen(self.f_hat)
        if f_hat.shape != (4,):
            msg = f"motor command needs 4 components, got shape {f_hat.shape}"
            raise DimensionMismatchError(msg)
        if not np.all((f_hat >= 0.0) & (f_hat <= 1.0)):
            msg = f"motor command components must lie in [0, 1], got {f_hat.tolist()}"
            raise InvalidParameterError(msg)
        object.__setattr__(self, "f_hat", f_hat)
