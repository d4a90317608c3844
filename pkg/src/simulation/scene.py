"""Synthetic highway scenes.

The road frame has x along the road, y to the left and z up, with the road
surface at z = 0. The road centerline is ``y = curvature * x**2 / 2``.
"""

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from pydantic import BaseModel, Field, model_validator

from src.config.logging import logger
from src.exceptions import Unsatisfiable

CAR_LENGTH = (3.8, 5.2)
CAR_WIDTH = (1.7, 2.0)
CAR_HEIGHT = (1.4, 1.7)
TRUCK_LENGTH = (12.0, 18.0)
TRUCK_WIDTH = (2.45, 2.55)
TRUCK_HEIGHT = (3.0, 4.0)
MAX_VEHICLE_LENGTH = TRUCK_LENGTH[1]
LATERAL_JITTER = 0.3
# The reference point sits on the rear axle, a quarter length ahead of the
# rear face, at mid-body height.
REAR_AXLE_FRACTION = 0.25
TRUCK_PALETTE = (
    (225, 225, 220),
    (200, 205, 210),
    (180, 40, 35),
    (40, 70, 140),
    (235, 190, 60),
)


class VehicleClass(str, Enum):
    """Vehicle categories produced by the simulator."""

    CAR = "car"
    TRUCK = "truck"


class SceneConfig(BaseModel):
    """Parameters of the simulated road and traffic."""

    lane_count: int = Field(8, ge=1, description="Number of traffic lanes")
    lane_width: float = Field(3.5, gt=0.0, description="Lane width (m)")
    observation_range: tuple[float, float] = Field(
        (15.0, 200.0),
        description="Longitudinal [near, far] extent of the traffic (m)",
    )
    vehicle_count_range: tuple[int, int] = Field(
        (16, 48), description="Inclusive [min, max] vehicles per scene"
    )
    truck_fraction: float = Field(
        0.15, ge=0.0, le=1.0, description="Probability a vehicle is a truck"
    )
    min_headway: float = Field(
        4.0, ge=0.0, description="Minimum bumper gap within a lane (m)"
    )
    road_curvature: float = Field(
        0.0, description="Curvature of the road centerline (1/m)"
    )
    rng_seed: int = Field(
        0, description="Seed used when no generator is supplied"
    )

    @model_validator(mode="after")
    def check_ranges(self) -> "SceneConfig":
        """Validate interval fields."""
        near, far = self.observation_range
        if not 0.0 <= near < far:
            raise ValueError(
                f"observation_range needs 0 <= near < far, got {near}, {far}"
            )
        low, high = self.vehicle_count_range
        if not 0 <= low <= high:
            raise ValueError(
                f"vehicle_count_range needs 0 <= min <= max, got {low}, {high}"
            )
        return self

    @property
    def road_half_width(self) -> float:
        """Half of the paved width (m)."""
        return self.lane_count * self.lane_width / 2.0

    def centerline_offset(self, x: np.ndarray | float) -> np.ndarray | float:
        """Lateral offset of the centerline at longitudinal position x."""
        return 0.5 * self.road_curvature * np.square(x)

    def heading(self, x: float) -> float:
        """Direction of travel (rad) at longitudinal position x."""
        return math.atan(self.road_curvature * x)

    def lane_center(self, lane: int) -> float:
        """Lateral offset of a lane center from the road centerline."""
        return (lane - (self.lane_count - 1) / 2.0) * self.lane_width

    def lane_capacity(self) -> int:
        """Vehicles that always fit in one lane, whatever their lengths."""
        near, far = self.observation_range
        return int((far - near + self.min_headway) // (MAX_VEHICLE_LENGTH + self.min_headway))


@dataclass(frozen=True, eq=False)
class Vehicle:
    """A vehicle cuboid standing on the road."""

    vehicle_id: int
    position: np.ndarray
    length: float
    width: float
    height: float
    vehicle_class: VehicleClass
    color: tuple[int, int, int]
    yaw: float = 0.0
    lane: int = 0

    @property
    def forward(self) -> np.ndarray:
        """Unit heading vector in the road frame."""
        return np.array([math.cos(self.yaw), math.sin(self.yaw), 0.0])

    @property
    def center(self) -> np.ndarray:
        """Center of the cuboid."""
        offset = (0.5 - REAR_AXLE_FRACTION) * self.length
        return self.position + offset * self.forward

    @property
    def front_point(self) -> np.ndarray:
        """Front axle point at mid-body height."""
        offset = (1.0 - 2.0 * REAR_AXLE_FRACTION) * self.length
        return self.position + offset * self.forward

    def corners(self) -> np.ndarray:
        """The eight cuboid corners, bottom face first."""
        forward = self.forward
        left = np.array([-forward[1], forward[0], 0.0])
        up = np.array([0.0, 0.0, 1.0])
        center = self.center
        corners = []
        for dz in (-0.5, 0.5):
            for dx, dy in ((-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)):
                corners.append(
                    center
                    + dx * self.length * forward
                    + dy * self.width * left
                    + dz * self.height * up
                )
        return np.array(corners)


@dataclass(frozen=True, eq=False)
class Scene:
    """One traffic snapshot."""

    config: SceneConfig
    vehicles: tuple[Vehicle, ...] = field(default_factory=tuple)


def _draw_vehicle_shape(
    rng: np.random.Generator, truck: bool
) -> tuple[float, float, float, tuple[int, int, int]]:
    if truck:
        length = rng.uniform(*TRUCK_LENGTH)
        width = rng.uniform(*TRUCK_WIDTH)
        height = rng.uniform(*TRUCK_HEIGHT)
        color = TRUCK_PALETTE[int(rng.integers(len(TRUCK_PALETTE)))]
    else:
        length = rng.uniform(*CAR_LENGTH)
        width = rng.uniform(*CAR_WIDTH)
        height = rng.uniform(*CAR_HEIGHT)
        rgb = rng.integers(30, 231, size=3)
        color = (int(rgb[0]), int(rgb[1]), int(rgb[2]))
    return float(length), float(width), float(height), color


def generate_scene(
    cfg: SceneConfig, rng: np.random.Generator | None = None
) -> Scene:
    """Place vehicles on the lanes without longitudinal overlap.

    Vehicles are spread over the lanes as evenly as possible (the lanes
    receiving the remainder are drawn at random). Within a lane the free
    road length is split at sorted uniform cut points so consecutive
    vehicles are always at least ``min_headway`` apart.

    Args:
        cfg: Scene parameters
        rng: Random generator; defaults to one seeded with ``cfg.rng_seed``

    Returns
    -------
        The generated scene

    Raises
    ------
        Unsatisfiable: If the maximum vehicle count cannot be guaranteed
            to fit in the observation range
    """
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    low, high = cfg.vehicle_count_range
    per_lane_needed = math.ceil(high / cfg.lane_count)
    capacity = cfg.lane_capacity()
    if per_lane_needed > capacity:
        raise Unsatisfiable(
            f"{high} vehicles need {per_lane_needed} per lane but only "
            f"{capacity} fit in observation_range {cfg.observation_range}"
        )

    count = int(rng.integers(low, high + 1))
    lane_counts = np.full(cfg.lane_count, count // cfg.lane_count)
    lane_counts[rng.permutation(cfg.lane_count)[: count % cfg.lane_count]] += 1

    near, far = cfg.observation_range
    vehicles: list[Vehicle] = []
    for lane, lane_count in enumerate(lane_counts):
        if lane_count == 0:
            continue
        trucks = rng.random(lane_count) < cfg.truck_fraction
        shapes = [_draw_vehicle_shape(rng, bool(t)) for t in trucks]
        lengths = np.array([s[0] for s in shapes])
        free = far - near - lengths.sum() - (lane_count - 1) * cfg.min_headway
        cuts = np.sort(rng.uniform(0.0, free, size=lane_count))
        jitter = rng.uniform(-LATERAL_JITTER, LATERAL_JITTER, size=lane_count)
        for i in range(lane_count):
            rear_face = near + cuts[i] + lengths[:i].sum() + i * cfg.min_headway
            length, width, height, color = shapes[i]
            x_ref = rear_face + REAR_AXLE_FRACTION * length
            y_ref = (
                cfg.centerline_offset(x_ref) + cfg.lane_center(lane) + jitter[i]
            )
            vehicles.append(
                Vehicle(
                    vehicle_id=len(vehicles),
                    position=np.array([x_ref, y_ref, height / 2.0]),
                    length=length,
                    width=width,
                    height=height,
                    vehicle_class=(
                        VehicleClass.TRUCK if trucks[i] else VehicleClass.CAR
                    ),
                    color=color,
                    yaw=cfg.heading(x_ref),
                    lane=lane,
                )
            )
    logger.trace(f"Generated scene with {count} vehicles")
    return Scene(config=cfg, vehicles=tuple(vehicles))


def lane_gaps(scene: Scene) -> list[float]:
    """Bumper-to-bumper gaps between consecutive vehicles of each lane."""
    gaps: list[float] = []
    for lane in range(scene.config.lane_count):
        in_lane = sorted(
            (v for v in scene.vehicles if v.lane == lane),
            key=lambda v: v.position[0],
        )
        for behind, ahead in zip(in_lane, in_lane[1:], strict=False):
            rear_ahead = ahead.position[0] - REAR_AXLE_FRACTION * ahead.length
            front_behind = behind.position[0] + (
                1.0 - REAR_AXLE_FRACTION
            ) * behind.length
            gaps.append(float(rear_ahead - front_behind))
    return gaps
