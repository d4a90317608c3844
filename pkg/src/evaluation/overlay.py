"""Projected-detection overlays for visual calibration checks."""

import cv2
import numpy as np

from src.geometry.camera import CameraIntrinsics, project_points
from src.geometry.transforms import Extrinsic

GROUND_TRUTH_COLOR = (0, 0, 255)
ESTIMATE_COLOR = (255, 255, 0)
POINT_RADIUS = 3


def overlay_points(
    k: CameraIntrinsics, h: Extrinsic, detections: np.ndarray
) -> np.ndarray:
    """Integer pixel centers ``(m, 2)`` of the in-image projections."""
    projections = project_points(k, h, detections)
    mask = projections.in_image
    u = np.floor(projections.u[mask]).astype(np.int32)
    v = np.floor(projections.v[mask]).astype(np.int32)
    return np.stack([u, v], axis=1).reshape(-1, 2)


def render_overlay(
    image: np.ndarray,
    detections: np.ndarray,
    h_gt: Extrinsic,
    h_est: Extrinsic,
    k: CameraIntrinsics,
) -> np.ndarray:
    """Draw ground-truth (blue) and estimated (yellow) projections.

    Args:
        image: RGB uint8 image matching ``k``'s resolution
        detections: ``(n, 3)`` radar-frame points
        h_gt: Ground-truth extrinsic
        h_est: Extrinsic under evaluation
        k: Intrinsics of ``image``

    Returns
    -------
        An annotated copy of ``image``
    """
    canvas = np.ascontiguousarray(image, dtype=np.uint8).copy()
    for h, color in ((h_gt, GROUND_TRUTH_COLOR), (h_est, ESTIMATE_COLOR)):
        for u, v in overlay_points(k, h, detections):
            cv2.circle(canvas, (int(u), int(v)), POINT_RADIUS, color, -1)
    return canvas
