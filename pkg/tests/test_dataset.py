from dataclasses import replace

import numpy as np
import pytest

from conftest import tiny_dataset_config
from src.dataset.generator import generate_dataset
from src.dataset.image import (
    ImageStats,
    ImageStatsAccumulator,
    destandardize_image,
    resize_image,
    standardize_image,
)
from src.dataset.radar_matrix import SparseRadarMatrix, rasterize
from src.dataset.sample import lint_sample, make_sample, redecalibrate
from src.dataset.storage import (
    SPLITS,
    decode_sample,
    encode_sample,
    lint_dataset,
    read_manifest,
    sample_path,
)
from src.dataset.transform import transform_dataset
from src.exceptions import (
    ArtifactVersionMismatch,
    InsufficientFrames,
    PredictionCountMismatch,
)
from src.geometry.camera import Projections
from src.geometry.quaternion import (
    EulerTPR,
    UnitQuaternion,
    geodesic_angle,
    quat_from_euler,
)
from src.geometry.transforms import DecalRanges, Decalibration
from src.simulation.radar import RadarModel
from src.simulation.scene import SceneConfig


def road_points(rig, count: int) -> np.ndarray:
    """Radar-frame points spread over the visible road."""
    x = np.linspace(30.0, 120.0, count)
    y = np.tile([-3.0, 0.0, 3.0], count)[:count]
    world = np.stack([x, y, np.ones(count)], axis=1)
    return rig.radar_pose_world.inverse().apply(world)


def blank_image() -> np.ndarray:
    return np.full((300, 480, 3), 128, dtype=np.uint8)


def test_rasterize_keeps_nearest_detection_per_cell():
    projections = Projections(
        u=np.array([100.0, 10.2, 10.4]),
        v=np.array([50.0, 5.0, 5.1]),
        z_c=np.array([5.0, 20.0, 10.0]),
        in_image=np.array([True, True, True]),
    )
    matrix = rasterize(projections, 480, 300, 240, 150)
    assert matrix.is_valid()
    assert len(matrix) == 2
    np.testing.assert_array_equal(matrix.rows, [2, 25])
    np.testing.assert_array_equal(matrix.cols, [5, 50])
    np.testing.assert_allclose(matrix.inverse_depth, [0.1, 0.2])
    dense = matrix.to_dense()
    assert dense.shape == (150, 240)
    assert dense[2, 5] == pytest.approx(0.1)
    assert np.count_nonzero(dense) == 2


def test_rasterize_ignores_points_outside_image():
    projections = Projections(
        u=np.array([np.nan, 600.0]),
        v=np.array([np.nan, 10.0]),
        z_c=np.array([-3.0, 10.0]),
        in_image=np.array([False, False]),
    )
    matrix = rasterize(projections, 480, 300)
    assert len(matrix) == 0
    assert matrix.is_valid()
    assert not np.any(matrix.to_dense())


def test_radar_matrix_validity_checks():
    unsorted = SparseRadarMatrix(240, 150, [3, 1], [0, 0], [0.1, 0.2])
    assert not unsorted.is_valid()
    duplicate = SparseRadarMatrix(240, 150, [1, 1], [4, 4], [0.1, 0.2])
    assert not duplicate.is_valid()
    negative = SparseRadarMatrix(240, 150, [1], [4], [-0.1])
    assert not negative.is_valid()


def test_make_sample_filters_on_correspondences(rig):
    points = road_points(rig, 12)
    identity = Decalibration.identity()
    assert (
        make_sample(blank_image(), points[:3], rig, identity) is None
    )
    sample = make_sample(
        blank_image(), points, rig, identity, frame_id="x/000001"
    )
    assert sample is not None
    assert sample.image.shape == (150, 240, 3)
    assert len(sample.radar_matrix) > 0
    assert lint_sample(sample, rig) == []
    assert geodesic_angle(sample.label, UnitQuaternion.identity()) == 0.0


def test_lint_sample_reports_broken_invariants(rig):
    sample = make_sample(
        blank_image(),
        road_points(rig, 12),
        rig,
        Decalibration(UnitQuaternion.identity(), np.zeros(3)),
    )
    assert sample is not None
    other = Decalibration(
        UnitQuaternion.from_array([0.99, 0.05, 0.0, 0.0]), np.zeros(3)
    )
    broken = replace(sample, label=other.label)
    problems = lint_sample(broken, rig)
    assert any("label" in p for p in problems)
    assert lint_sample(sample, rig, min_correspondences=1000)


def test_stats_accumulator_matches_numpy(rng):
    images = [rng.uniform(0, 255, size=(7, 9, 3)) for _ in range(3)]
    accumulator = ImageStatsAccumulator()
    for image in images:
        accumulator.add(image)
    stats = accumulator.finalize()
    pixels = np.concatenate([i.reshape(-1, 3) for i in images])
    np.testing.assert_allclose(stats.mean, pixels.mean(axis=0))
    np.testing.assert_allclose(stats.std, pixels.std(axis=0))
    empty = ImageStatsAccumulator().finalize()
    np.testing.assert_array_equal(empty.mean, np.zeros(3))
    np.testing.assert_array_equal(empty.std, np.ones(3))


def test_standardization_is_invertible(rng):
    image = rng.integers(0, 256, size=(300, 480, 3), dtype=np.uint8)
    stats = ImageStats(mean=[100.0, 110.0, 120.0], std=[50.0, 40.0, 30.0])
    standardized = standardize_image(image, stats, (240, 150))
    assert standardized.dtype == np.float32
    np.testing.assert_allclose(
        destandardize_image(standardized, stats),
        resize_image(image, (240, 150)),
        atol=1e-3,
    )


def test_sample_codec(tiny_splits):
    sample = tiny_splits["test"][0]
    raw = encode_sample(sample)
    decoded = decode_sample(raw, (32, 20))
    np.testing.assert_array_equal(decoded.image, sample.image)
    np.testing.assert_array_equal(
        decoded.radar_matrix.to_dense(), sample.radar_matrix.to_dense()
    )
    np.testing.assert_array_equal(decoded.h_init.matrix, sample.h_init.matrix)
    np.testing.assert_array_equal(decoded.detections, sample.detections)
    assert decoded.frame_id == sample.frame_id
    assert decoded.rig_id == "primary"
    with pytest.raises(ArtifactVersionMismatch):
        decode_sample(b"XXXXX" + raw[5:], (32, 20))
    with pytest.raises(ArtifactVersionMismatch):
        decode_sample(raw[:100], (32, 20))


def test_tiny_dataset_is_valid(tiny_dataset, tiny_splits):
    assert lint_dataset(tiny_dataset) == []
    manifest = read_manifest(tiny_dataset)
    assert manifest.counts.train == 8
    assert manifest.image_size == (32, 20)
    ids = {split: {s.frame_id for s in tiny_splits[split]} for split in SPLITS}
    assert len(ids["train"]) == 8
    assert not ids["train"] & ids["val"]
    assert not ids["train"] & ids["test"]
    assert not ids["val"] & ids["test"]
    for split in SPLITS:
        assert all(i.startswith(f"{split}/") for i in ids[split])


def test_training_split_is_standardized(tiny_splits):
    pixels = np.concatenate(
        [s.image.reshape(-1, 3) for s in tiny_splits["train"]]
    ).astype(np.float64)
    np.testing.assert_allclose(pixels.mean(axis=0), 0.0, atol=1e-3)
    np.testing.assert_allclose(pixels.std(axis=0), 1.0, atol=1e-3)


def test_generation_does_not_depend_on_threads(tmp_path, tiny_dataset, rig):
    generate_dataset(
        tmp_path,
        SceneConfig(),
        RadarModel(),
        rig,
        DecalRanges(),
        tiny_dataset_config(),
        seed=7,
        threads=1,
    )
    for split, count in (("train", 8), ("val", 4), ("test", 6)):
        for index in range(count):
            assert (
                sample_path(tmp_path, split, index).read_bytes()
                == sample_path(tiny_dataset, split, index).read_bytes()
            )


def test_read_manifest_missing(tmp_path):
    with pytest.raises(ArtifactVersionMismatch):
        read_manifest(tmp_path)


def test_oracle_transform_leaves_identity_residuals(tiny_splits, rig):
    samples = tiny_splits["val"]
    oracle = [s.label for s in samples]
    corrected = transform_dataset(samples, oracle, rig.intrinsics)
    assert len(corrected) == len(samples)
    for before, after in zip(samples, corrected, strict=True):
        assert geodesic_angle(after.label, UnitQuaternion.identity()) < 1e-6
        np.testing.assert_allclose(after.h_init.R, after.h_gt.R, atol=1e-9)
        assert after.image is before.image
    raw = np.array([s.label.as_array() * 3.0 for s in samples])
    scaled = transform_dataset(samples, raw, rig.intrinsics)
    for after in scaled:
        assert geodesic_angle(after.label, UnitQuaternion.identity()) < 1e-6


def test_transform_rejects_count_mismatch(tiny_splits, rig):
    samples = tiny_splits["val"]
    with pytest.raises(PredictionCountMismatch):
        transform_dataset(samples, np.zeros((1, 4)) + 1.0, rig.intrinsics)


def test_redecalibrate_with_identity(tiny_splits, rig):
    sample = tiny_splits["test"][0]
    redone = redecalibrate(
        sample, rig.intrinsics, Decalibration.identity(), 0
    )
    assert redone is not None
    np.testing.assert_allclose(redone.h_init.matrix, sample.h_gt.matrix)
    assert geodesic_angle(redone.label, UnitQuaternion.identity()) == 0.0
    assert redone.image is sample.image
    assert (
        redecalibrate(sample, rig.intrinsics, Decalibration.identity(), 10**6)
        is None
    )


def test_transformed_samples_stay_lint_clean(tiny_splits, rig):
    samples = tiny_splits["val"]
    correction = quat_from_euler(EulerTPR(1.0, -2.0, 0.5))
    corrected = transform_dataset(
        samples, [correction] * len(samples), rig.intrinsics
    )
    for after in corrected:
        assert lint_sample(after, rig, min_correspondences=0) == []
        assert geodesic_angle(after.label, after.phi_dec.label) < 1e-6
    oracle = transform_dataset(
        samples, [s.label for s in samples], rig.intrinsics
    )
    for after in oracle:
        assert lint_sample(after, rig, min_correspondences=0) == []
        np.testing.assert_allclose(
            after.phi_dec.to_extrinsic().R, np.eye(3), atol=1e-9
        )


def test_generation_fails_when_every_frame_is_filtered(tmp_path, rig):
    config = tiny_dataset_config().model_copy(
        update={"min_correspondences": 10**6, "max_decal_attempts": 2}
    )
    with pytest.raises(InsufficientFrames):
        generate_dataset(
            tmp_path,
            SceneConfig(),
            RadarModel(),
            rig,
            DecalRanges(),
            config,
            seed=7,
        )
