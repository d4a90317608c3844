"""Coarse-to-fine cascade: training, inference and temporal refinement.

The coarse stage is trained on ``D``. Its inference-mode predictions
correct every training and validation sample, whose radar matrices are
reprojected under the corrected extrinsic and whose labels become the
remaining residual rotation (``D'``). The fine stage is trained on ``D'``.
At inference time both corrections are applied in the same order.
"""

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from src.calibnet.config import LossConfig, ModelConfig
from src.calibnet.model import build_model
from src.cascade.stages import CorrectionStage
from src.cascade.training import TrainConfig, TrainHistory, train_stage
from src.config.logging import logger
from src.dataset.sample import Sample
from src.dataset.transform import as_quaternions, correct_sample, transform_dataset
from src.exceptions import EmptyWindow, ShapeMismatch
from src.geometry.camera import CameraIntrinsics
from src.geometry.quaternion import (
    UnitQuaternion,
    geodesic_angle,
    quat_canonicalize,
    quat_mean,
    quat_mul,
)
from src.geometry.transforms import Extrinsic, recover_calibration
from src.utils.rng import STREAM_MODEL_INIT, derive_rng


@dataclass
class CascadeModel:
    """Coarse and fine correction stages sharing one configuration."""

    coarse: CorrectionStage
    fine: CorrectionStage
    model_config: ModelConfig = field(default_factory=ModelConfig)
    loss_config: LossConfig = field(default_factory=LossConfig)
    histories: list[TrainHistory] = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class CascadeResult:
    """Recovered extrinsic and the corrections that produced it."""

    h_est: Extrinsic
    q_coarse: UnitQuaternion
    q_fine: UnitQuaternion
    h_init: Extrinsic

    @property
    def h_coarse(self) -> Extrinsic:
        """Extrinsic after the coarse correction alone."""
        return recover_calibration(self.h_init, [self.q_coarse])


def train_cascade(
    train: Sequence[Sample],
    val: Sequence[Sample],
    intrinsics: CameraIntrinsics,
    model_config: ModelConfig,
    loss_config: LossConfig,
    train_config: TrainConfig,
    coarse: CorrectionStage | None = None,
) -> CascadeModel:
    """Train the coarse stage on ``D`` and the fine stage on ``D'``.

    Args:
        train: Dataset ``D``
        val: Validation split, transformed alongside ``D``
        intrinsics: Camera model for the reprojection
        model_config: Architecture of both stages
        loss_config: Loss of both stages
        train_config: Optimizer and schedule of both stages
        coarse: Fixed coarse stage; trained from scratch when omitted

    Returns
    -------
        The trained cascade with the history of every trained stage
    """
    histories: list[TrainHistory] = []
    if coarse is None:
        model = build_model(
            model_config, derive_rng(train_config.seed, STREAM_MODEL_INIT, 1)
        )
        coarse, history = train_stage(
            model, train, val, train_config, loss_config, stage=1
        )
        histories.append(history)

    train_fine = transform_dataset(train, coarse.predict(train), intrinsics)
    val_fine = transform_dataset(val, coarse.predict(val), intrinsics)
    residual = float(
        np.mean(
            [geodesic_angle(s.label, UnitQuaternion.identity()) for s in val_fine]
        )
    )
    logger.info(f"Mean residual rotation after coarse stage: {residual:.3f} deg")

    model = build_model(
        model_config, derive_rng(train_config.seed, STREAM_MODEL_INIT, 2)
    )
    fine, history = train_stage(
        model, train_fine, val_fine, train_config, loss_config, stage=2
    )
    histories.append(history)
    return CascadeModel(coarse, fine, model_config, loss_config, histories)


def _normalized(raw: np.ndarray, count: int) -> list[UnitQuaternion]:
    if raw.shape != (count, 4):
        raise ShapeMismatch(f"stage returned {raw.shape}, expected ({count}, 4)")
    return [quat_canonicalize(q) for q in as_quaternions(raw)]


def infer_batch(
    cascade: CascadeModel,
    samples: Sequence[Sample],
    intrinsics: CameraIntrinsics,
    fine_iterations: int = 1,
) -> list[CascadeResult]:
    """Run :func:`infer` on many samples with batched stage calls."""
    if fine_iterations < 1:
        raise ValueError("fine_iterations must be >= 1")
    if not samples:
        return []
    q_coarse = _normalized(cascade.coarse.predict(samples), len(samples))
    current = [
        correct_sample(s, q, intrinsics)
        for s, q in zip(samples, q_coarse, strict=True)
    ]
    q_fine = [UnitQuaternion.identity()] * len(samples)
    for iteration in range(fine_iterations):
        step = _normalized(cascade.fine.predict(current), len(samples))
        q_fine = [quat_mul(s, f) for s, f in zip(step, q_fine, strict=True)]
        if iteration + 1 < fine_iterations:
            current = [
                correct_sample(s, q, intrinsics)
                for s, q in zip(current, step, strict=True)
            ]
    return [
        CascadeResult(
            h_est=recover_calibration(s.h_init, [c, quat_canonicalize(f)]),
            q_coarse=c,
            q_fine=quat_canonicalize(f),
            h_init=s.h_init,
        )
        for s, c, f in zip(samples, q_coarse, q_fine, strict=True)
    ]


def infer(
    cascade: CascadeModel,
    sample: Sample,
    intrinsics: CameraIntrinsics,
    fine_iterations: int = 1,
) -> tuple[Extrinsic, UnitQuaternion, UnitQuaternion]:
    """Recover the extrinsic of one sample.

    The coarse prediction is normalized and applied to ``H_init``, the
    detections are reprojected under the corrected extrinsic, and the fine
    stage predicts the residual. With ``fine_iterations > 1`` the fine
    stage is applied repeatedly, each time on the sample reprojected under
    the latest estimate.

    Returns
    -------
        ``(H_est, q_coarse, q_fine)`` with ``H_est = F @ C @ H_init``
    """
    result = infer_batch(cascade, [sample], intrinsics, fine_iterations)[0]
    return result.h_est, result.q_coarse, result.q_fine


def temporal_refine(
    corrections: Sequence[tuple[UnitQuaternion, UnitQuaternion]],
    h_init: Extrinsic,
) -> Extrinsic:
    """Average the total corrections of a window and apply them once.

    Args:
        corrections: ``(q_coarse, q_fine)`` per frame
        h_init: Extrinsic shared by all frames of the window

    Returns
    -------
        The refined extrinsic

    Raises
    ------
        EmptyWindow: If ``corrections`` is empty
    """
    if not corrections:
        raise EmptyWindow("temporal refinement needs at least one frame")
    totals = [quat_mul(fine, coarse) for coarse, fine in corrections]
    return recover_calibration(h_init, [quat_mean(totals)])
