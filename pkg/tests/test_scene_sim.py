from dataclasses import replace

import numpy as np
import pytest
from pydantic import ValidationError

from src.exceptions import Unsatisfiable
from src.geometry.camera import project_points
from src.simulation.frames import read_detections, simulate_frame, write_frames
from src.simulation.radar import RadarModel, detections_to_array, simulate_radar
from src.simulation.rendering import (
    RING,
    SIDE_SHADE,
    clip_to_near_plane,
    render_image,
)
from src.simulation.rig import SECONDARY_RIG, RigConfig, build_rig
from src.simulation.scene import (
    Scene,
    SceneConfig,
    Vehicle,
    VehicleClass,
    generate_scene,
    lane_gaps,
)
from src.utils.image_io import read_ppm

NOISELESS = RadarModel(
    position_noise_sigma=0.0, dropout_prob=0.0, false_positive_rate=0.0
)


def single_vehicle_scene(length: float) -> Scene:
    vehicle_class = VehicleClass.TRUCK if length > 8.0 else VehicleClass.CAR
    vehicle = Vehicle(
        vehicle_id=0,
        position=np.array([50.0, 0.0, 1.0]),
        length=length,
        width=2.0,
        height=2.0,
        vehicle_class=vehicle_class,
        color=(200, 30, 30),
    )
    return Scene(config=SceneConfig(), vehicles=(vehicle,))


def test_scene_is_deterministic():
    cfg = SceneConfig()
    first = generate_scene(cfg, np.random.default_rng(3))
    second = generate_scene(cfg, np.random.default_rng(3))
    assert len(first.vehicles) == len(second.vehicles)
    for a, b in zip(first.vehicles, second.vehicles, strict=True):
        np.testing.assert_array_equal(a.position, b.position)
        assert (a.length, a.color) == (b.length, b.color)


def test_scene_respects_counts_and_headway():
    cfg = SceneConfig(road_curvature=0.002)
    rng = np.random.default_rng(11)
    for _ in range(20):
        scene = generate_scene(cfg, rng)
        low, high = cfg.vehicle_count_range
        assert low <= len(scene.vehicles) <= high
        assert all(gap >= cfg.min_headway - 1e-9 for gap in lane_gaps(scene))
        near, far = cfg.observation_range
        for v in scene.vehicles:
            assert 0 <= v.lane < cfg.lane_count
            assert near <= v.position[0] <= far


def test_scene_unsatisfiable_density():
    cfg = SceneConfig(lane_count=1, vehicle_count_range=(100, 100))
    with pytest.raises(Unsatisfiable):
        generate_scene(cfg, np.random.default_rng(0))


def test_scene_config_validation():
    with pytest.raises(ValidationError):
        SceneConfig(lane_count=0)
    with pytest.raises(ValidationError):
        SceneConfig(vehicle_count_range=(10, 5))
    with pytest.raises(ValidationError):
        SceneConfig(observation_range=(50.0, 20.0))


def test_empty_scene_config_is_allowed():
    scene = generate_scene(
        SceneConfig(vehicle_count_range=(0, 0)), np.random.default_rng(0)
    )
    assert scene.vehicles == ()


def test_radar_full_dropout_gives_no_detections(rig):
    scene = generate_scene(SceneConfig(), np.random.default_rng(5))
    model = RadarModel(dropout_prob=1.0, false_positive_rate=0.0)
    detections = simulate_radar(scene, rig, model, np.random.default_rng(1))
    assert detections == []
    assert detections_to_array(detections).shape == (0, 3)


def test_long_vehicles_give_two_detections(rig):
    for length, expected in ((4.5, 1), (15.0, 2)):
        scene = single_vehicle_scene(length)
        detections = simulate_radar(
            scene, rig, NOISELESS, np.random.default_rng(0)
        )
        assert len(detections) == expected
        assert all(d.vehicle_id == 0 for d in detections)
        world = rig.radar_pose_world.apply(detections[0].x[None])[0]
        np.testing.assert_allclose(
            world, scene.vehicles[0].position, atol=1e-9
        )


def test_false_positives_are_flagged(rig):
    model = RadarModel(dropout_prob=1.0, false_positive_rate=20.0)
    scene = generate_scene(SceneConfig(), np.random.default_rng(2))
    detections = simulate_radar(scene, rig, model, np.random.default_rng(4))
    assert detections
    assert all(d.is_false_positive for d in detections)
    assert all(d.vehicle_id is None for d in detections)


def test_ground_truth_is_consistent_with_poses(rig):
    points = np.array([[40.0, 3.0, 1.0], [120.0, -5.0, 0.5]])
    radar_points = rig.radar_pose_world.inverse().apply(points)
    np.testing.assert_allclose(
        rig.h_gt.apply(radar_points),
        rig.h_cam_world.apply(points),
        atol=1e-9,
    )


def test_render_shape_and_vehicle_pixels(rig):
    empty = render_image(Scene(config=SceneConfig()), rig)
    assert empty.shape == (300, 480, 3)
    assert empty.dtype == np.uint8
    with_truck = render_image(single_vehicle_scene(15.0), rig)
    assert np.any(with_truck != empty)


def car_and_truck(car_first: bool) -> Scene:
    car = Vehicle(
        vehicle_id=0,
        position=np.array([40.0, 0.0, 0.75]),
        length=4.5,
        width=1.8,
        height=1.5,
        vehicle_class=VehicleClass.CAR,
        color=(20, 200, 40),
    )
    truck = Vehicle(
        vehicle_id=1,
        position=np.array([50.0, 0.0, 3.0]),
        length=15.0,
        width=2.5,
        height=6.0,
        vehicle_class=VehicleClass.TRUCK,
        color=(40, 40, 220),
    )
    vehicles = (car, truck) if car_first else (truck, car)
    return Scene(config=SceneConfig(), vehicles=vehicles)


def pixel_of(rig, world_point) -> tuple[int, int]:
    projected = project_points(
        rig.intrinsics, rig.h_cam_world, np.asarray(world_point)[None]
    )
    assert projected.in_image[0]
    return int(projected.v[0]), int(projected.u[0])


def test_render_draws_near_vehicles_over_far_ones(rig):
    scene = car_and_truck(car_first=True)
    car, truck = scene.vehicles
    image = render_image(scene, rig)
    np.testing.assert_array_equal(
        image, render_image(car_and_truck(car_first=False), rig)
    )
    car_roof = car.center + np.array([0.0, 0.0, car.height / 2])
    row, col = pixel_of(rig, car_roof)
    assert tuple(image[row, col]) == car.color

    truck_only = render_image(replace(scene, vehicles=(truck,)), rig)
    shade = tuple(int(c * SIDE_SHADE) for c in truck.color)
    assert tuple(truck_only[row, col]) in (truck.color, shade)


def test_render_clips_vehicles_crossing_the_camera_plane(rig):
    background = render_image(Scene(config=SceneConfig()), rig)
    trailer = Vehicle(
        vehicle_id=0,
        position=np.array([-5.0, 0.0, 1.0]),
        length=40.0,
        width=2.5,
        height=2.0,
        vehicle_class=VehicleClass.TRUCK,
        color=(200, 30, 30),
    )
    corners = rig.h_cam_world.apply(trailer.corners())
    assert corners[:, 2].min() < 0.0 < corners[:, 2].max()
    image = render_image(Scene(SceneConfig(), (trailer,)), rig)
    row, col = pixel_of(rig, [15.0, 0.0, 2.0])
    assert tuple(image[row, col]) == trailer.color

    behind = replace(trailer, position=np.array([-40.0, 0.0, 1.0]), length=4.5)
    assert np.all(rig.h_cam_world.apply(behind.corners())[:, 2] < 0.0)
    np.testing.assert_array_equal(
        render_image(Scene(SceneConfig(), (behind,)), rig), background
    )


def test_clip_to_near_plane_keeps_front_points():
    square = np.array(
        [[-1.0, 0.0, -1.0], [1.0, 0.0, -1.0], [1.0, 0.0, 1.0], [-1.0, 0.0, 1.0]]
    )
    clipped = clip_to_near_plane(square, RING)
    assert len(clipped) == 4
    np.testing.assert_allclose(np.sort(clipped[:, 2]), [0.1, 0.1, 1.0, 1.0])
    assert len(clip_to_near_plane(square - [0.0, 0.0, 5.0], RING)) == 0


def test_noiseless_detections_land_on_vehicle_pixels(rig):
    scene = generate_scene(SceneConfig(), np.random.default_rng(5))
    background = render_image(Scene(config=scene.config), rig)
    vehicles = np.any(render_image(scene, rig) != background, axis=-1)
    detections = simulate_radar(
        scene, rig, NOISELESS, np.random.default_rng(0)
    )
    projected = project_points(
        rig.intrinsics, rig.h_gt, detections_to_array(detections)
    )
    assert projected.in_image.sum() >= 5
    for u, v in zip(
        projected.u[projected.in_image],
        projected.v[projected.in_image],
        strict=True,
    ):
        row, col = int(v), int(u)
        window = vehicles[
            max(row - 2, 0) : row + 3, max(col - 2, 0) : col + 3
        ]
        assert window.any(), f"detection at ({u:.1f}, {v:.1f}) off vehicles"


def test_radar_noise_has_the_configured_spread(rig):
    scene = single_vehicle_scene(4.5)
    exact = simulate_radar(scene, rig, NOISELESS, np.random.default_rng(0))
    noisy_model = NOISELESS.model_copy(update={"position_noise_sigma": 0.5})
    rng = np.random.default_rng(8)
    offsets = np.array(
        [
            simulate_radar(scene, rig, noisy_model, rng)[0].x - exact[0].x
            for _ in range(10_000)
        ]
    )
    np.testing.assert_allclose(offsets.mean(axis=0), 0.0, atol=0.03)
    np.testing.assert_allclose(offsets.std(axis=0), 0.5, rtol=0.05)


def test_simulate_frame_is_deterministic(rig):
    args = (SceneConfig(), RadarModel(), rig, 42)
    first = simulate_frame("a", *args, key=(3, 0))
    second = simulate_frame("a", *args, key=(3, 0))
    other = simulate_frame("b", *args, key=(3, 1))
    np.testing.assert_array_equal(first.image, second.image)
    np.testing.assert_array_equal(
        detections_to_array(first.detections),
        detections_to_array(second.detections),
    )
    assert not np.array_equal(first.image, other.image)


def test_write_and_read_frames(tmp_path, rig):
    frames = [
        simulate_frame(
            f"{i:06d}", SceneConfig(), RadarModel(), rig, 9, key=(3, i)
        )
        for i in range(2)
    ]
    assert write_frames(frames, rig, tmp_path) == 2
    detections = read_detections(tmp_path / "detections.jsonl")
    assert list(detections) == ["000000", "000001"]
    for frame in frames:
        np.testing.assert_allclose(
            detections_to_array(detections[frame.frame_id]),
            detections_to_array(frame.detections),
        )
        np.testing.assert_array_equal(
            read_ppm(tmp_path / "images" / f"{frame.frame_id}.ppm"),
            frame.image,
        )
    assert (tmp_path / "scenes.jsonl").read_text().count("\n") == 2
    restored = RigConfig.from_text((tmp_path / "rig.txt").read_text())
    np.testing.assert_allclose(restored.h_gt.matrix, rig.h_gt.matrix)


def test_rig_presets_differ(rig):
    secondary = build_rig(SECONDARY_RIG)
    assert secondary.rig_id == "secondary"
    assert not np.allclose(secondary.h_gt.matrix, rig.h_gt.matrix)
    restored = RigConfig.from_text(secondary.to_text())
    assert restored.rig_id == "secondary"
    assert restored.intrinsics == secondary.intrinsics
