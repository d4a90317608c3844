"""Sensor rig: gantry-mounted camera and radar with a known extrinsic."""

from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field

from src.geometry.camera import CameraIntrinsics
from src.geometry.quaternion import EulerTPR, quat_from_euler
from src.geometry.text_format import (
    format_extrinsic,
    format_intrinsics,
    parse_block,
    parse_extrinsic,
    parse_intrinsics,
)
from src.geometry.transforms import Extrinsic

# Columns are the camera axes (x-right, y-down, z-forward) expressed in the
# road frame (x-forward, y-left, z-up).
CAMERA_BASE = np.array(
    [
        [0.0, 0.0, 1.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
    ]
)


class IntrinsicsSpec(BaseModel):
    """Pinhole intrinsics at the native render resolution."""

    fx: float = Field(600.0, gt=0.0)
    fy: float = Field(600.0, gt=0.0)
    cx: float = Field(240.0, gt=0.0)
    cy: float = Field(150.0, gt=0.0)
    width: int = Field(480, gt=0)
    height: int = Field(300, gt=0)

    def build(self) -> CameraIntrinsics:
        """Create the intrinsics value object."""
        return CameraIntrinsics(
            self.fx, self.fy, self.cx, self.cy, self.width, self.height
        )


class RigSpec(BaseModel):
    """Mounting parameters of a gantry measurement point."""

    rig_id: str = Field("primary", description="Name of the measurement point")
    gantry_height: float = Field(7.0, gt=0.0, description="Camera height (m)")
    lateral_offset: float = Field(
        0.0, description="Camera offset from the road centerline (m)"
    )
    camera_pitch_deg: float = Field(
        12.0, description="Downward pitch of the optical axis (deg)"
    )
    camera_yaw_deg: float = Field(
        0.0, description="Camera yaw relative to the road (deg)"
    )
    camera_roll_deg: float = Field(0.0, description="Camera roll (deg)")
    radar_offset: tuple[float, float, float] = Field(
        (0.2, -0.4, -0.3),
        description="Radar position relative to the camera, road frame (m)",
    )
    radar_yaw_deg: float = Field(
        1.5, description="Radar yaw relative to the road (deg)"
    )
    radar_pitch_deg: float = Field(
        -1.0, description="Radar pitch relative to the road (deg)"
    )
    intrinsics: IntrinsicsSpec = Field(default_factory=IntrinsicsSpec)


PRIMARY_RIG = RigSpec()
SECONDARY_RIG = RigSpec(
    rig_id="secondary",
    gantry_height=8.5,
    lateral_offset=2.0,
    camera_pitch_deg=10.0,
    camera_yaw_deg=4.0,
    camera_roll_deg=-1.0,
    radar_offset=(0.1, 0.5, -0.5),
    radar_yaw_deg=-2.0,
    radar_pitch_deg=0.5,
)
RIG_PRESETS = {spec.rig_id: spec for spec in (PRIMARY_RIG, SECONDARY_RIG)}


@dataclass(frozen=True, eq=False)
class RigConfig:
    """Poses of both sensors in the road frame plus the camera model.

    ``H_gt`` is derived from the poses, so the rig is consistent by
    construction.
    """

    rig_id: str
    intrinsics: CameraIntrinsics
    radar_pose_world: Extrinsic
    camera_pose_world: Extrinsic

    @property
    def h_gt(self) -> Extrinsic:
        """Camera-from-radar ground-truth extrinsic."""
        return self.camera_pose_world.inverse() @ self.radar_pose_world

    @property
    def h_cam_world(self) -> Extrinsic:
        """Camera-from-road transform."""
        return self.camera_pose_world.inverse()

    def to_text(self) -> str:
        """Serialize in the geometry key-value text format."""
        lines = [
            f"rig_id = {self.rig_id}",
            format_extrinsic("H_gt", self.h_gt),
            format_intrinsics("K", self.intrinsics),
            format_extrinsic("radar_pose_world", self.radar_pose_world),
            format_extrinsic("camera_pose_world", self.camera_pose_world),
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RigConfig":
        """Parse the text written by :meth:`to_text`."""
        entries = parse_block(text)
        return cls(
            rig_id=" ".join(entries.get("rig_id", ["primary"])),
            intrinsics=parse_intrinsics(entries["K"], "K"),
            radar_pose_world=parse_extrinsic(
                entries["radar_pose_world"], "radar_pose_world"
            ),
            camera_pose_world=parse_extrinsic(
                entries["camera_pose_world"], "camera_pose_world"
            ),
        )


def build_rig(spec: RigSpec) -> RigConfig:
    """Turn mounting parameters into sensor poses.

    Args:
        spec: Gantry mounting parameters

    Returns
    -------
        The rig with both sensor poses in the road frame
    """
    camera_offset = quat_from_euler(
        EulerTPR(
            tilt=-spec.camera_pitch_deg,
            pan=spec.camera_yaw_deg,
            roll=spec.camera_roll_deg,
        )
    )
    camera_position = np.array([0.0, spec.lateral_offset, spec.gantry_height])
    camera_pose = Extrinsic(
        CAMERA_BASE @ camera_offset.to_matrix(), camera_position
    )
    # Radar axes follow the road frame; yaw turns about z, pitch about y.
    radar_rotation = quat_from_euler(
        EulerTPR(tilt=0.0, pan=spec.radar_pitch_deg, roll=spec.radar_yaw_deg)
    )
    radar_pose = Extrinsic(
        radar_rotation.to_matrix(),
        camera_position + np.asarray(spec.radar_offset, dtype=np.float64),
    )
    return RigConfig(
        rig_id=spec.rig_id,
        intrinsics=spec.intrinsics.build(),
        radar_pose_world=radar_pose,
        camera_pose_world=camera_pose,
    )
