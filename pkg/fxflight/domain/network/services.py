from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np

from fxflight.domain.network.schemas import (
    NEIGHBOR_OBS_DIM,
    SELF_OBS_DIM,
    Activation,
    DeepsetsPolicy,
    MlpLayer,
    MlpWeights,
    MotorCommand,
)
from fxflight.lib.exceptions import DimensionMismatchError

if TYPE_CHECKING:
    from collections.abc import Sequence

    import numpy.typing as npt

    from fxflight.domain.network.schemas import ActionVec, FloatArray

__all__ = (
    "action_to_motor",
    "deepsets_forward_float",
    "deepsets_forward_float_batch",
    "mean_pool",
    "mlp_forward_float",
    "random_policy",
)

SELF_HIDDEN: tuple[int, ...] = (16, 16)
NEIGHBOR_HIDDEN: tuple[int, ...] = (8, 8)
HEAD_HIDDEN: tuple[int, ...] = (32,)


def mlp_forward_float(w: MlpWeights, x: npt.ArrayLike) -> FloatArray:
    """Affine plus activation chain over the last axis of ``x``."""
    h = np.asarray(x, dtype=np.float64)
    if h.ndim == 0 or h.shape[-1] != w.in_dim:
        msg = f"MLP expects {w.in_dim} inputs, got shape {h.shape}"
        raise DimensionMismatchError(msg)
    for layer in w.layers:
        h = h @ layer.weight.T + layer.bias
        if layer.activation is Activation.RELU:
            h = np.maximum(h, 0.0)
    return h


def mean_pool(embeddings: FloatArray) -> FloatArray:
    """Mean over axis 1 of ``(batch, k, width)``; zeros when ``k == 0``.

    Each column is summed with ``math.fsum``: the exactly rounded sum does not depend on neighbor order.
    """
    batch, k, width = embeddings.shape
    if k == 0:
        return np.zeros((batch, width), dtype=np.float64)
    return np.apply_along_axis(math.fsum, 1, embeddings) / k


def deepsets_forward_float_batch(p: DeepsetsPolicy, self_obs: npt.ArrayLike, neighbors: npt.ArrayLike) -> FloatArray:
    """Batched forward pass.

    Args:
        p: Policy weights.
        self_obs: Array of shape ``(batch, 18)``.
        neighbors: Array of shape ``(batch, k, 6)``; ``k`` may be zero.

    Returns:
        Actions of shape ``(batch, 4)``.
    """
    obs = np.asarray(self_obs, dtype=np.float64)
    nbr = np.asarray(neighbors, dtype=np.float64)
    if obs.ndim != 2 or obs.shape[1] != SELF_OBS_DIM:
        msg = f"self observations must have shape (batch, {SELF_OBS_DIM}), got {obs.shape}"
        raise DimensionMismatchError(msg)
    if nbr.ndim != 3 or nbr.shape[0] != obs.shape[0] or nbr.shape[2] != NEIGHBOR_OBS_DIM:
        msg = f"neighbor observations must have shape ({obs.shape[0]}, k, {NEIGHBOR_OBS_DIM}), got {nbr.shape}"
        raise DimensionMismatchError(msg)
    e_q = mlp_forward_float(p.self_encoder, obs)
    if nbr.shape[1]:
        e_k = mean_pool(mlp_forward_float(p.neighbor_mlp, nbr))
    else:
        e_k = np.zeros((obs.shape[0], p.neighbor_mlp.out_dim), dtype=np.float64)
    return mlp_forward_float(p.head, np.concatenate([e_q, e_k], axis=1))


def deepsets_forward_float(
    p: DeepsetsPolicy,
    self_obs: npt.ArrayLike,
    neighbors: Sequence[npt.ArrayLike] | npt.ArrayLike,
) -> ActionVec:
    nbr = np.asarray(neighbors, dtype=np.float64)
    if nbr.size == 0:
        nbr = nbr.reshape(0, NEIGHBOR_OBS_DIM)
    if nbr.ndim != 2:
        msg = f"neighbors must be a list of {NEIGHBOR_OBS_DIM}-vectors, got shape {nbr.shape}"
        raise DimensionMismatchError(msg)
    obs = np.asarray(self_obs, dtype=np.float64).reshape(1, -1)
    return deepsets_forward_float_batch(p, obs, nbr[np.newaxis])[0]


def action_to_motor(a: npt.ArrayLike) -> MotorCommand:
    """``f_hat = (clip(a, -1, 1) + 1) / 2``."""
    return MotorCommand(f_hat=(np.clip(np.asarray(a, dtype=np.float64), -1.0, 1.0) + 1.0) / 2.0)


def _random_mlp(rng: np.random.Generator, in_dim: int, hidden: Sequence[int], out_dim: int | None) -> MlpWeights:
    layers: list[MlpLayer] = []
    dims = [in_dim, *hidden]
    for fan_in, fan_out in zip(dims, dims[1:], strict=False):
        layers.append(MlpLayer(rng.uniform(-1.0, 1.0, (fan_out, fan_in)), rng.uniform(-1.0, 1.0, fan_out)))
    if out_dim is not None:
        layers.append(
            MlpLayer(rng.uniform(-1.0, 1.0, (out_dim, dims[-1])), rng.uniform(-1.0, 1.0, out_dim), Activation.NONE),
        )
    return MlpWeights(tuple(layers))


def random_policy(
    seed: int,
    *,
    self_hidden: Sequence[int] = SELF_HIDDEN,
    neighbor_hidden: Sequence[int] = NEIGHBOR_HIDDEN,
    head_hidden: Sequence[int] = HEAD_HIDDEN,
) -> DeepsetsPolicy:
    """Policy with every weight and bias drawn uniformly from ``[-1, 1]``.

    The encoders end on their last hidden layer, so ``e^q`` and ``e^k`` have the last hidden sizes.
    """
    rng = np.random.default_rng(seed)
    return DeepsetsPolicy(
        self_encoder=_random_mlp(rng, SELF_OBS_DIM, self_hidden, None),
        neighbor_mlp=_random_mlp(rng, NEIGHBOR_OBS_DIM, neighbor_hidden, None),
        head=_random_mlp(rng, self_hidden[-1] + neighbor_hidden[-1], head_hidden, 4),
    )
