"""Two-stream correction network and its losses."""

from src.calibnet.config import LossConfig, LossKind, ModelConfig
from src.calibnet.losses import compute_loss, loss_euclidean, loss_geodesic
from src.calibnet.model import CalibNet, batch_inputs, build_model, forward

__all__ = [
    "CalibNet",
    "LossConfig",
    "LossKind",
    "ModelConfig",
    "batch_inputs",
    "build_model",
    "compute_loss",
    "forward",
    "loss_euclidean",
    "loss_geodesic",
]
