"""Sparse inverse-depth matrix of projected radar detections."""

from dataclasses import dataclass

import numpy as np

from src.geometry.camera import CameraIntrinsics, Projections, project_points
from src.geometry.transforms import Extrinsic


@dataclass(frozen=True, eq=False)
class SparseRadarMatrix:
    """At most one ``1/z_c`` entry per cell, sorted row-major."""

    width: int
    height: int
    rows: np.ndarray
    cols: np.ndarray
    inverse_depth: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", np.asarray(self.rows, dtype=np.uint16))
        object.__setattr__(self, "cols", np.asarray(self.cols, dtype=np.uint16))
        object.__setattr__(
            self,
            "inverse_depth",
            np.asarray(self.inverse_depth, dtype=np.float32),
        )

    def __len__(self) -> int:
        return len(self.inverse_depth)

    @classmethod
    def empty(cls, width: int = 240, height: int = 150) -> "SparseRadarMatrix":
        """Matrix without entries."""
        none = np.zeros(0)
        return cls(width, height, none, none, none)

    def to_dense(self) -> np.ndarray:
        """``(height, width)`` float32 array, zero in empty cells."""
        dense = np.zeros((self.height, self.width), dtype=np.float32)
        dense[self.rows.astype(np.intp), self.cols.astype(np.intp)] = (
            self.inverse_depth
        )
        return dense

    def is_valid(self) -> bool:
        """Check the positivity, uniqueness and ordering invariants."""
        if len(self) == 0:
            return True
        if np.any(self.inverse_depth <= 0.0):
            return False
        if np.any(self.rows >= self.height) or np.any(self.cols >= self.width):
            return False
        flat = self.rows.astype(np.int64) * self.width + self.cols
        return bool(np.all(np.diff(flat) > 0))


def rasterize(
    projections: Projections,
    native_width: int,
    native_height: int,
    width: int = 240,
    height: int = 150,
) -> SparseRadarMatrix:
    """Bin in-image projections into a ``width x height`` grid.

    Pixel coordinates from the native resolution are scaled to the grid.
    When several detections fall into one cell the nearest one (largest
    inverse depth) is kept.
    """
    mask = projections.in_image
    if not np.any(mask):
        return SparseRadarMatrix.empty(width, height)
    cols = np.floor(projections.u[mask] * width / native_width).astype(np.int64)
    rows = np.floor(projections.v[mask] * height / native_height).astype(np.int64)
    cols = np.clip(cols, 0, width - 1)
    rows = np.clip(rows, 0, height - 1)
    inverse_depth = 1.0 / projections.z_c[mask]

    flat = rows * width + cols
    # Sort by cell, nearest first, then keep the first entry of each cell.
    order = np.lexsort((-inverse_depth, flat))
    flat, inverse_depth = flat[order], inverse_depth[order]
    first = np.ones(len(flat), dtype=bool)
    first[1:] = flat[1:] != flat[:-1]
    flat, inverse_depth = flat[first], inverse_depth[first]
    return SparseRadarMatrix(
        width=width,
        height=height,
        rows=flat // width,
        cols=flat % width,
        inverse_depth=inverse_depth,
    )


def rasterize_detections(
    points: np.ndarray,
    h: Extrinsic,
    k: CameraIntrinsics,
    width: int = 240,
    height: int = 150,
) -> tuple[SparseRadarMatrix, Projections]:
    """Project radar-frame points with ``K, H`` and rasterize them."""
    projections = project_points(k, h, points)
    matrix = rasterize(projections, k.width, k.height, width, height)
    return matrix, projections
