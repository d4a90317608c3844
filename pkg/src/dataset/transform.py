"""Inter-stage dataset transformation D -> D'."""

from collections.abc import Sequence
from dataclasses import replace

import numpy as np

from src.config.logging import logger
from src.dataset.radar_matrix import rasterize_detections
from src.dataset.sample import Sample
from src.exceptions import PredictionCountMismatch
from src.geometry.camera import CameraIntrinsics
from src.geometry.quaternion import UnitQuaternion, quat_mul
from src.geometry.transforms import (
    Decalibration,
    Extrinsic,
    recover_calibration,
    residual_label,
)


def as_quaternions(
    predictions: np.ndarray | Sequence[UnitQuaternion],
) -> list[UnitQuaternion]:
    """Normalize raw ``(n, 4)`` network outputs into unit quaternions."""
    if isinstance(predictions, np.ndarray):
        return [UnitQuaternion.from_array(row) for row in predictions]
    return list(predictions)


def correct_sample(
    sample: Sample, q_hat: UnitQuaternion, intrinsics: CameraIntrinsics
) -> Sample:
    """Apply one predicted correction to a sample.

    The image is shared with the input sample; the radar matrix is rebuilt
    from the raw detections under the corrected extrinsic. The stored
    decalibration becomes the residual one, so that
    ``H_init = Phi_dec @ H_gt`` still holds.
    """
    h_corrected = recover_calibration(sample.h_init, [q_hat])
    correction = Extrinsic.from_rotation(q_hat)
    residual = Decalibration(
        quat_mul(q_hat, sample.phi_dec.rotation),
        correction.R @ sample.phi_dec.translation,
    )
    matrix, _ = rasterize_detections(
        sample.detections,
        h_corrected,
        intrinsics,
        sample.radar_matrix.width,
        sample.radar_matrix.height,
    )
    return replace(
        sample,
        radar_matrix=matrix,
        label=residual_label(sample.label, q_hat),
        h_init=h_corrected,
        phi_dec=residual,
    )


def transform_dataset(
    samples: Sequence[Sample],
    predictions: np.ndarray | Sequence[UnitQuaternion],
    intrinsics: CameraIntrinsics,
) -> list[Sample]:
    """Build the residual dataset for the next cascade stage.

    Every sample is corrected with its own stage-one prediction and labelled
    with the remaining residual rotation. Samples are not filtered again, so
    ``D'`` has exactly the members of ``D``.

    Args:
        samples: Dataset ``D``
        predictions: One raw quaternion per sample (normalized here)
        intrinsics: Camera model used for reprojection

    Returns
    -------
        Dataset ``D'`` in the same order

    Raises
    ------
        PredictionCountMismatch: If the counts differ
    """
    if len(predictions) != len(samples):
        raise PredictionCountMismatch(
            f"{len(predictions)} predictions for {len(samples)} samples"
        )
    corrected = [
        correct_sample(sample, q_hat, intrinsics)
        for sample, q_hat in zip(
            samples, as_quaternions(predictions), strict=True
        )
    ]
    logger.debug(f"Transformed {len(corrected)} samples into residual form")
    return corrected
