"""Pinhole projection ``z_c [u, v, 1]^T = K H x``."""

from dataclasses import dataclass

import numpy as np

from src.exceptions import ConfigInvalid
from src.geometry.transforms import Extrinsic


@dataclass(frozen=True)
class CameraIntrinsics:
    """Zero-skew pinhole intrinsics for an image of ``width x height``."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise ConfigInvalid(
                f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}"
            )
        if not 0 < self.cx < self.width or not 0 < self.cy < self.height:
            raise ConfigInvalid(
                f"principal point ({self.cx}, {self.cy}) outside "
                f"{self.width}x{self.height} image"
            )

    @property
    def K(self) -> np.ndarray:  # noqa: N802
        """The 3x4 projection matrix."""
        return np.array(
            [
                [self.fx, 0.0, self.cx, 0.0],
                [0.0, self.fy, self.cy, 0.0],
                [0.0, 0.0, 1.0, 0.0],
            ]
        )

    def scaled(self, width: int, height: int) -> "CameraIntrinsics":
        """Intrinsics of the same camera resampled to another resolution."""
        sx = width / self.width
        sy = height / self.height
        return CameraIntrinsics(
            fx=self.fx * sx,
            fy=self.fy * sy,
            cx=self.cx * sx,
            cy=self.cy * sy,
            width=width,
            height=height,
        )


@dataclass(frozen=True)
class ProjectedDetection:
    """Pixel position and depth of a projected point."""

    u: float
    v: float
    z_c: float
    in_image: bool


@dataclass(frozen=True, eq=False)
class Projections:
    """Vectorized projection result for ``n`` points."""

    u: np.ndarray
    v: np.ndarray
    z_c: np.ndarray
    in_image: np.ndarray

    def __len__(self) -> int:
        return len(self.z_c)


def project_points(
    k: CameraIntrinsics, h: Extrinsic, points: np.ndarray
) -> Projections:
    """Project ``(n, 3)`` radar-frame points into the image.

    Points at or behind the image plane get ``in_image = False`` and
    non-finite pixel coordinates are replaced by NaN.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    homogeneous = np.hstack([points, np.ones((len(points), 1))])
    image = homogeneous @ (k.K @ h.matrix).T
    z_c = image[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(z_c > 0.0, image[:, 0] / z_c, np.nan)
        v = np.where(z_c > 0.0, image[:, 1] / z_c, np.nan)
    in_image = (
        (z_c > 0.0)
        & (u >= 0.0)
        & (u < k.width)
        & (v >= 0.0)
        & (v < k.height)
    )
    return Projections(u=u, v=v, z_c=z_c, in_image=in_image)


def project(
    k: CameraIntrinsics, h: Extrinsic, x: np.ndarray
) -> ProjectedDetection:
    """Project a single radar-frame point.

    Behind-camera points are not an error: they come back with
    ``z_c <= 0`` and ``in_image = False`` for the caller to filter.
    """
    result = project_points(k, h, np.asarray(x).reshape(1, 3))
    return ProjectedDetection(
        u=float(result.u[0]),
        v=float(result.v[0]),
        z_c=float(result.z_c[0]),
        in_image=bool(result.in_image[0]),
    )
