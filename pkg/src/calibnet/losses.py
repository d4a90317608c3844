"""Quaternion regression losses, averaged over the batch."""

import numpy as np

from src.calibnet.config import LossConfig, LossKind
from src.exceptions import DegenerateNorm
from src.geometry.quaternion import UnitQuaternion
from src.nn.tensor import Tensor

NORM_FLOOR = 1e-8


def _targets(q: UnitQuaternion | np.ndarray, like: Tensor) -> Tensor:
    values = q.as_array() if isinstance(q, UnitQuaternion) else np.asarray(q)
    return Tensor(values.reshape(like.shape))


def _batch(q_hat: Tensor) -> Tensor:
    return q_hat.reshape(1, 4) if q_hat.ndim == 1 else q_hat


def loss_euclidean(q: UnitQuaternion | np.ndarray, q_hat: Tensor) -> Tensor:
    """Mean ``||q - q_hat||`` between labels and raw outputs."""
    q_hat = _batch(q_hat)
    diff = q_hat - _targets(q, q_hat)
    return (diff * diff).sum(axis=1).sqrt().mean()


def loss_geodesic(
    q: UnitQuaternion | np.ndarray, q_hat: Tensor, alpha: float = 0.005
) -> Tensor:
    """Mean ``1 - |q . q_hat / ||q_hat||| + alpha * |1 - ||q_hat|||``.

    The absolute dot product makes the loss invariant to the sign of
    ``q_hat``; the second term keeps the raw output near unit length.

    Raises
    ------
        DegenerateNorm: If any ``||q_hat|| <= 1e-8``
    """
    q_hat = _batch(q_hat)
    norm = (q_hat * q_hat).sum(axis=1).sqrt()
    if np.any(norm.data <= NORM_FLOOR):
        raise DegenerateNorm(
            f"prediction norm {float(norm.data.min()):.3g} is too small"
        )
    dot = (q_hat * _targets(q, q_hat)).sum(axis=1)
    per_sample = 1.0 - (dot / norm).abs() + alpha * (1.0 - norm).abs()
    return per_sample.mean()


def compute_loss(
    config: LossConfig, labels: np.ndarray, outputs: Tensor
) -> Tensor:
    """Dispatch on the configured loss kind."""
    if config.kind == LossKind.GEODESIC:
        return loss_geodesic(labels, outputs, config.alpha)
    return loss_euclidean(labels, outputs)
