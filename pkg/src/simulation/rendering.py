"""Flat-shaded camera image rendering."""

import cv2
import numpy as np

from src.geometry.camera import CameraIntrinsics
from src.simulation.rig import RigConfig
from src.simulation.scene import Scene, SceneConfig

SKY = (150, 190, 230)
GRASS = (70, 110, 60)
ASPHALT = (90, 90, 95)
MARKING = (235, 235, 235)
MARKING_HALF_WIDTH = 0.075
DASH_PERIOD = 12.0
DASH_LENGTH = 4.0
SHOULDER = 0.75
MIN_DEPTH = 0.1
SUBPIXEL_SHIFT = 4
SIDE_SHADE = 0.7

RING = ((0, 1), (1, 2), (2, 3), (3, 0))
BODY_EDGES = (
    *RING,
    *((a + 4, b + 4) for a, b in RING),
    *((i, i + 4) for i in range(4)),
)


def render_background(
    road: SceneConfig, rig: RigConfig
) -> np.ndarray:
    """Ray-cast the static road, lane markings, grass and sky.

    Each pixel center is cast from the camera onto the plane z = 0; rays
    that never hit the ground are sky.

    Returns
    -------
        ``(height, width, 3)`` uint8 RGB image
    """
    k: CameraIntrinsics = rig.intrinsics
    cols, rows = np.meshgrid(
        np.arange(k.width) + 0.5, np.arange(k.height) + 0.5
    )
    rays_cam = np.stack(
        [(cols - k.cx) / k.fx, (rows - k.cy) / k.fy, np.ones_like(cols)],
        axis=-1,
    )
    rays = rays_cam @ rig.camera_pose_world.R.T
    origin = rig.camera_pose_world.t

    image = np.empty((k.height, k.width, 3), dtype=np.uint8)
    image[:] = SKY
    hits = rays[..., 2] < -1e-9
    scale = np.where(hits, -origin[2] / np.where(hits, rays[..., 2], -1.0), 0.0)
    ground_x = origin[0] + scale * rays[..., 0]
    ground_y = origin[1] + scale * rays[..., 1]
    lateral = ground_y - road.centerline_offset(ground_x)

    half = road.road_half_width
    image[hits] = GRASS
    paved = hits & (np.abs(lateral) <= half + SHOULDER)
    image[paved] = ASPHALT

    dashed = np.mod(ground_x, DASH_PERIOD) < DASH_LENGTH
    for boundary in range(road.lane_count + 1):
        offset = -half + boundary * road.lane_width
        on_line = paved & (np.abs(lateral - offset) < MARKING_HALF_WIDTH)
        if 0 < boundary < road.lane_count:
            on_line &= dashed
        image[on_line] = MARKING
    return image


def _fill(image: np.ndarray, pixels: np.ndarray, color: tuple[int, ...]) -> None:
    # Pixel i covers [i, i + 1); cv2 treats integer coordinates as centers.
    points = np.round((pixels - 0.5) * (1 << SUBPIXEL_SHIFT)).astype(np.int32)
    hull = cv2.convexHull(points)
    cv2.fillConvexPoly(image, hull, color, lineType=cv2.LINE_8, shift=SUBPIXEL_SHIFT)


def clip_to_near_plane(
    corners: np.ndarray, edges: tuple[tuple[int, int], ...]
) -> np.ndarray:
    """Cut a convex solid at ``z = MIN_DEPTH`` in camera coordinates.

    Returns the corners in front of the plane plus the points where
    ``edges`` cross it. Their convex hull is the visible part of the solid.
    """
    depth = corners[:, 2]
    kept = [corners[depth > MIN_DEPTH]]
    for a, b in edges:
        za, zb = depth[a], depth[b]
        if (za > MIN_DEPTH) != (zb > MIN_DEPTH):
            s = (MIN_DEPTH - za) / (zb - za)
            kept.append((corners[a] + s * (corners[b] - corners[a]))[None])
    return np.concatenate(kept)


def _project(k: CameraIntrinsics, points: np.ndarray) -> np.ndarray:
    return np.stack(
        [
            k.fx * points[:, 0] / points[:, 2] + k.cx,
            k.fy * points[:, 1] / points[:, 2] + k.cy,
        ],
        axis=-1,
    )


def render_image(scene: Scene, rig: RigConfig) -> np.ndarray:
    """Render the scene as seen by the rig's camera.

    Vehicles are drawn as projected cuboid silhouettes, far to near, over
    the ray-cast background. Vehicles crossing the camera plane are clipped
    to their visible part; only those entirely behind it are skipped.

    Args:
        scene: Traffic snapshot
        rig: Sensor rig providing the camera pose and intrinsics

    Returns
    -------
        ``(height, width, 3)`` uint8 RGB image
    """
    image = render_background(scene.config, rig)
    k = rig.intrinsics
    to_camera = rig.h_cam_world
    drawable = []
    for vehicle in scene.vehicles:
        corners = to_camera.apply(vehicle.corners())
        if np.all(corners[:, 2] <= MIN_DEPTH):
            continue
        depth = float(to_camera.apply(vehicle.center[None])[0, 2])
        drawable.append((depth, vehicle.vehicle_id, vehicle, corners))

    drawable.sort(key=lambda item: (-item[0], item[1]))
    for _, _, vehicle, corners in drawable:
        side = tuple(int(c * SIDE_SHADE) for c in vehicle.color)
        _fill(image, _project(k, clip_to_near_plane(corners, BODY_EDGES)), side)
        top = clip_to_near_plane(corners[4:], RING)
        if len(top) >= 3:
            _fill(image, _project(k, top), tuple(int(c) for c in vehicle.color))
    return image
