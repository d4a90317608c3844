"""Rotation, transform and projection algebra."""

from src.geometry.camera import (
    CameraIntrinsics,
    ProjectedDetection,
    Projections,
    project,
    project_points,
)
from src.geometry.quaternion import (
    EulerTPR,
    UnitQuaternion,
    geodesic_angle,
    quat_canonicalize,
    quat_from_euler,
    quat_invert,
    quat_mean,
    quat_mul,
    quat_to_euler,
)
from src.geometry.transforms import (
    DecalRanges,
    Decalibration,
    Extrinsic,
    apply_decalibration,
    correction_between,
    recover_calibration,
    residual_label,
    sample_decalibration,
)

__all__ = [
    "CameraIntrinsics",
    "DecalRanges",
    "Decalibration",
    "EulerTPR",
    "Extrinsic",
    "ProjectedDetection",
    "Projections",
    "UnitQuaternion",
    "apply_decalibration",
    "correction_between",
    "geodesic_angle",
    "project",
    "project_points",
    "quat_canonicalize",
    "quat_from_euler",
    "quat_invert",
    "quat_mean",
    "quat_mul",
    "quat_to_euler",
    "recover_calibration",
    "residual_label",
    "sample_decalibration",
]
