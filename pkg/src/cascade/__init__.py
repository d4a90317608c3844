"""Cascaded residual training and inference."""

from src.cascade.cascade import (
    CascadeModel,
    CascadeResult,
    infer,
    infer_batch,
    temporal_refine,
    train_cascade,
)
from src.cascade.schedule import PlateauSchedule
from src.cascade.stages import (
    ConstantStage,
    CorrectionStage,
    IdentityStage,
    OracleStage,
)
from src.cascade.training import TrainConfig, TrainHistory, train_stage

__all__ = [
    "CascadeModel",
    "CascadeResult",
    "ConstantStage",
    "CorrectionStage",
    "IdentityStage",
    "OracleStage",
    "PlateauSchedule",
    "TrainConfig",
    "TrainHistory",
    "infer",
    "infer_batch",
    "temporal_refine",
    "train_cascade",
    "train_stage",
]
