"""Network-ready samples and the correspondence filter."""

from dataclasses import dataclass, replace

import numpy as np

from src.dataset.image import ImageStats, standardize_image
from src.dataset.radar_matrix import SparseRadarMatrix, rasterize_detections
from src.geometry.camera import CameraIntrinsics, Projections
from src.geometry.quaternion import UnitQuaternion, geodesic_angle
from src.geometry.transforms import (
    Decalibration,
    Extrinsic,
    apply_decalibration,
)
from src.simulation.rig import RigConfig

MIN_CORRESPONDENCES = 10


@dataclass(frozen=True, eq=False)
class Sample:
    """One training or evaluation record.

    ``detections`` keeps the raw radar-frame points so the radar matrix can
    be rebuilt under any other extrinsic.
    """

    image: np.ndarray
    radar_matrix: SparseRadarMatrix
    label: UnitQuaternion
    h_gt: Extrinsic
    h_init: Extrinsic
    phi_dec: Decalibration
    frame_id: str
    rig_id: str
    detections: np.ndarray


def correspondence_count(projections: Projections) -> int:
    """Count projections in front of the camera and inside the image."""
    return int(np.count_nonzero(projections.in_image))


def make_sample(
    image: np.ndarray,
    detections: np.ndarray,
    rig: RigConfig,
    d: Decalibration,
    stats: ImageStats | None = None,
    image_size: tuple[int, int] = (240, 150),
    min_correspondences: int = MIN_CORRESPONDENCES,
    frame_id: str = "",
) -> Sample | None:
    """Decalibrate a frame and build its sample.

    Args:
        image: Native-resolution uint8 render made with the rig's ``H_gt``
        detections: ``(n, 3)`` radar-frame points
        rig: Sensor rig
        d: Decalibration to apply
        stats: Image statistics; identity statistics when omitted
        image_size: Network input ``(width, height)``
        min_correspondences: Filter threshold
        frame_id: Identifier of the source frame

    Returns
    -------
        The sample, or None if fewer than ``min_correspondences``
        detections project into the image under ``H_init``
    """
    h_gt = rig.h_gt
    h_init = apply_decalibration(h_gt, d)
    points = np.asarray(detections, dtype=np.float64).reshape(-1, 3)
    width, height = image_size
    matrix, projections = rasterize_detections(
        points, h_init, rig.intrinsics, width, height
    )
    if correspondence_count(projections) < min_correspondences:
        return None
    return Sample(
        image=standardize_image(image, stats or ImageStats(), image_size),
        radar_matrix=matrix,
        label=d.label,
        h_gt=h_gt,
        h_init=h_init,
        phi_dec=d,
        frame_id=frame_id,
        rig_id=rig.rig_id,
        detections=points,
    )


def lint_sample(
    sample: Sample,
    rig: RigConfig,
    min_correspondences: int = MIN_CORRESPONDENCES,
    tol: float = 1e-9,
) -> list[str]:
    """List every violated Sample invariant (empty when the sample is valid)."""
    problems: list[str] = []
    if geodesic_angle(sample.label, sample.phi_dec.label) > 1e-6:
        problems.append("label is not the rotation of phi_dec^-1")
    if sample.label.w < 0.0:
        problems.append("label is not canonical (w < 0)")
    expected = apply_decalibration(sample.h_gt, sample.phi_dec).matrix
    if np.abs(expected - sample.h_init.matrix).max() > tol:
        problems.append("H_init differs from Phi_dec @ H_gt")
    if np.abs(rig.h_gt.matrix - sample.h_gt.matrix).max() > tol:
        problems.append("H_gt differs from the rig ground truth")
    if not sample.radar_matrix.is_valid():
        problems.append("radar matrix violates its invariants")
    width, height = sample.radar_matrix.width, sample.radar_matrix.height
    _, projections = rasterize_detections(
        sample.detections, sample.h_init, rig.intrinsics, width, height
    )
    count = correspondence_count(projections)
    if count < min_correspondences:
        problems.append(f"only {count} correspondences")
    return problems


def redecalibrate(
    sample: Sample,
    intrinsics: CameraIntrinsics,
    d: Decalibration,
    min_correspondences: int = MIN_CORRESPONDENCES,
) -> Sample | None:
    """Rebuild a stored sample under another decalibration.

    The standardized image is shared; ``H_init``, the radar matrix and the
    label follow ``d``. Returns None when the filter rejects the result.
    """
    h_init = apply_decalibration(sample.h_gt, d)
    matrix, projections = rasterize_detections(
        sample.detections,
        h_init,
        intrinsics,
        sample.radar_matrix.width,
        sample.radar_matrix.height,
    )
    if correspondence_count(projections) < min_correspondences:
        return None
    return replace(
        sample, radar_matrix=matrix, label=d.label, h_init=h_init, phi_dec=d
    )
