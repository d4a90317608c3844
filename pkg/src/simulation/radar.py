"""Radar measurement model."""

import math
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, Field

from src.simulation.rig import RigConfig
from src.simulation.scene import Scene

FALSE_POSITIVE_HEIGHT = 0.75


class RadarModel(BaseModel):
    """Noise, dropout and clutter parameters of the traffic radar."""

    position_noise_sigma: float = Field(
        0.3, ge=0.0, description="Per-axis Gaussian position noise (m)"
    )
    dropout_prob: float = Field(
        0.1, ge=0.0, le=1.0, description="Probability a vehicle is missed"
    )
    false_positive_rate: float = Field(
        0.5, ge=0.0, description="Expected spurious detections per frame"
    )
    multi_detection_length_threshold: float = Field(
        8.0,
        gt=0.0,
        description="Vehicles longer than this produce two detections (m)",
    )
    field_of_view: float = Field(
        80.0, gt=0.0, le=360.0, description="Full azimuth field of view (deg)"
    )


@dataclass(frozen=True, eq=False)
class RadarDetection:
    """A radar measurement in the radar frame."""

    x: np.ndarray
    is_false_positive: bool = False
    vehicle_id: int | None = None


def in_field_of_view(point: np.ndarray, fov_deg: float) -> bool:
    """Tell whether a radar-frame point lies inside the azimuth cone."""
    if point[0] <= 0.0:
        return False
    azimuth = math.degrees(math.atan2(point[1], point[0]))
    return abs(azimuth) <= fov_deg / 2.0


def simulate_radar(
    scene: Scene,
    rig: RigConfig,
    model: RadarModel,
    rng: np.random.Generator,
) -> list[RadarDetection]:
    """Simulate one radar frame.

    Every vehicle inside the field of view is missed with
    ``dropout_prob``; otherwise it yields its rear-axle point, plus its
    front-axle point when it is longer than the multi-detection threshold.
    Each point gets i.i.d. Gaussian noise per axis. A Poisson number of
    false positives is scattered uniformly over the observed road area.

    Args:
        scene: Traffic snapshot
        rig: Sensor rig (radar pose)
        model: Measurement model
        rng: Random generator owned by the caller

    Returns
    -------
        Detections in the radar frame, vehicle detections first
    """
    to_radar = rig.radar_pose_world.inverse()
    detections: list[RadarDetection] = []
    for vehicle in scene.vehicles:
        reference = to_radar.apply(vehicle.position[None])[0]
        if not in_field_of_view(reference, model.field_of_view):
            continue
        if rng.random() < model.dropout_prob:
            continue
        points = [reference]
        if vehicle.length > model.multi_detection_length_threshold:
            points.append(to_radar.apply(vehicle.front_point[None])[0])
        for point in points:
            noise = rng.normal(0.0, model.position_noise_sigma, size=3)
            detections.append(
                RadarDetection(
                    x=point + noise, vehicle_id=vehicle.vehicle_id
                )
            )

    cfg = scene.config
    near, far = cfg.observation_range
    for _ in range(int(rng.poisson(model.false_positive_rate))):
        x = rng.uniform(near, far)
        lateral = rng.uniform(-cfg.road_half_width, cfg.road_half_width)
        world = np.array(
            [x, cfg.centerline_offset(x) + lateral, FALSE_POSITIVE_HEIGHT]
        )
        detections.append(
            RadarDetection(
                x=to_radar.apply(world[None])[0], is_false_positive=True
            )
        )
    return detections


def detections_to_array(detections: list[RadarDetection]) -> np.ndarray:
    """Stack detection positions into an ``(n, 3)`` array."""
    if not detections:
        return np.zeros((0, 3), dtype=np.float64)
    return np.stack([d.x for d in detections]).astype(np.float64)
