"""Rigid transforms and the decalibration algebra.

An :class:`Extrinsic` maps radar-frame points into the camera frame
(``x_cam = R @ x_radar + t``). A decalibration acts on the camera side:
``H_init = Phi_dec @ H_gt``. Corrections predicted by the cascade are
rotation-only and are left-multiplied onto ``H_init``.
"""

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, Field

from src.exceptions import ConfigInvalid
from src.geometry.quaternion import (
    EulerTPR,
    UnitQuaternion,
    quat_canonicalize,
    quat_from_euler,
    quat_invert,
    quat_mul,
)

ORTHO_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Extrinsic:
    """Rigid transform with rotation ``R`` and translation ``t`` (meters)."""

    R: np.ndarray
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        rotation = np.array(self.R, dtype=np.float64).reshape(3, 3)
        translation = np.array(self.t, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(rotation)) or not np.all(
            np.isfinite(translation)
        ):
            raise ConfigInvalid("extrinsic contains non-finite values")
        gram_error = np.abs(rotation.T @ rotation - np.eye(3)).max()
        if gram_error > ORTHO_TOL or np.linalg.det(rotation) < 0.0:
            raise ConfigInvalid(
                f"R is not a proper rotation (|RtR - I| = {gram_error:.2e})"
            )
        rotation.setflags(write=False)
        translation.setflags(write=False)
        object.__setattr__(self, "R", rotation)
        object.__setattr__(self, "t", translation)

    @classmethod
    def identity(cls) -> "Extrinsic":
        """Return the identity transform."""
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "Extrinsic":
        """Build from a 4x4 homogeneous matrix."""
        h = np.asarray(matrix, dtype=np.float64).reshape(4, 4)
        if not np.allclose(h[3], [0.0, 0.0, 0.0, 1.0], atol=1e-12):
            raise ConfigInvalid(f"last row of H must be [0,0,0,1], got {h[3]}")
        return cls(h[:3, :3], h[:3, 3])

    @classmethod
    def from_rotation(
        cls, q: UnitQuaternion, t: Sequence[float] | np.ndarray | None = None
    ) -> "Extrinsic":
        """Build from a quaternion and an optional translation."""
        return cls(q.to_matrix(), np.zeros(3) if t is None else np.asarray(t))

    @property
    def matrix(self) -> np.ndarray:
        """The 4x4 homogeneous matrix ``H``."""
        h = np.eye(4)
        h[:3, :3] = self.R
        h[:3, 3] = self.t
        return h

    @property
    def rotation(self) -> UnitQuaternion:
        """Rotation part as a canonical quaternion."""
        return UnitQuaternion.from_matrix(self.R)

    def inverse(self) -> "Extrinsic":
        """Return ``H^-1``."""
        return Extrinsic(self.R.T, -self.R.T @ self.t)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform ``(n, 3)`` points."""
        return np.asarray(points, dtype=np.float64) @ self.R.T + self.t

    def __matmul__(self, other: "Extrinsic") -> "Extrinsic":
        return Extrinsic(self.R @ other.R, self.R @ other.t + self.t)


@dataclass(frozen=True, eq=False)
class Decalibration:
    """Error transform ``Phi_dec`` applied on top of the true calibration."""

    rotation: UnitQuaternion
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        translation = np.array(self.translation, dtype=np.float64).reshape(3)
        translation.setflags(write=False)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def identity(cls) -> "Decalibration":
        """Return the no-op decalibration."""
        return cls(UnitQuaternion.identity(), np.zeros(3))

    def to_extrinsic(self) -> Extrinsic:
        """The 4x4 transform ``Phi_dec``."""
        return Extrinsic.from_rotation(self.rotation, self.translation)

    def invert(self) -> "Decalibration":
        """Return ``Phi_dec^-1``."""
        inverse = self.to_extrinsic().inverse()
        return Decalibration(quat_invert(self.rotation), inverse.t)

    @property
    def label(self) -> UnitQuaternion:
        """Network target: canonical rotation of ``Phi_dec^-1``."""
        return quat_canonicalize(quat_invert(self.rotation))


class DecalRanges(BaseModel):
    """Sampling ranges of random decalibrations."""

    tilt_deg: float = Field(10.0, ge=0.0, description="Tilt ~ U[-v, v]")
    pan_deg: float = Field(10.0, ge=0.0, description="Pan ~ U[-v, v]")
    roll_deg: float = Field(5.0, ge=0.0, description="Roll ~ U[-v, v]")
    translation_sigma: float = Field(
        0.10,
        ge=0.0,
        description="Std of per-axis Gaussian translation noise (m)",
    )


def apply_decalibration(h_gt: Extrinsic, d: Decalibration) -> Extrinsic:
    """Compute ``H_init = Phi_dec @ H_gt``."""
    return d.to_extrinsic() @ h_gt


def recover_calibration(
    h_init: Extrinsic, corrections: Sequence[UnitQuaternion]
) -> Extrinsic:
    """Left-multiply rotation-only corrections onto ``H_init``.

    Args:
        h_init: Current extrinsic estimate
        corrections: Corrections ordered coarse-first; the last one listed
            is applied last

    Returns
    -------
        ``C_n @ ... @ C_1 @ H_init``
    """
    result = h_init
    for correction in corrections:
        result = Extrinsic.from_rotation(correction) @ result
    return result


def residual_label(
    phi_dec_inv: UnitQuaternion, phi_hat_dec_inv: UnitQuaternion
) -> UnitQuaternion:
    """Label of the residual after a stage-one correction.

    Args:
        phi_dec_inv: True correction
        phi_hat_dec_inv: Correction predicted by the previous stage

    Returns
    -------
        Canonical ``phi_dec_inv * phi_hat_dec_inv^-1``
    """
    return quat_canonicalize(quat_mul(phi_dec_inv, quat_invert(phi_hat_dec_inv)))


def sample_decalibration(
    ranges: DecalRanges, rng: np.random.Generator
) -> Decalibration:
    """Draw a random decalibration.

    Tilt, pan and roll are drawn uniformly from their symmetric ranges,
    in that order, and combined with :func:`quat_from_euler`; the three
    translation components are i.i.d. Gaussian.
    """
    tilt = rng.uniform(-ranges.tilt_deg, ranges.tilt_deg)
    pan = rng.uniform(-ranges.pan_deg, ranges.pan_deg)
    roll = rng.uniform(-ranges.roll_deg, ranges.roll_deg)
    translation = rng.normal(0.0, ranges.translation_sigma, size=3)
    return Decalibration(
        quat_from_euler(EulerTPR(float(tilt), float(pan), float(roll))),
        translation,
    )


def correction_between(h_from: Extrinsic, h_to: Extrinsic) -> UnitQuaternion:
    """Rotation ``C`` such that ``C @ R_from = R_to``."""
    return UnitQuaternion.from_matrix(h_to.R @ h_from.R.T)
