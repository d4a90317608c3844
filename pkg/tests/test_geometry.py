import math

import numpy as np
import pytest
from scipy.linalg import logm
from scipy.spatial.transform import Rotation
from scipy.stats import kstest

from src.exceptions import ConfigInvalid, DegenerateNorm, EmptyInput, GimbalLock
from src.geometry.camera import CameraIntrinsics, project, project_points
from src.geometry.quaternion import (
    EulerTPR,
    UnitQuaternion,
    geodesic_angle,
    quat_canonicalize,
    quat_from_euler,
    quat_invert,
    quat_mean,
    quat_mul,
    quat_to_euler,
)
from src.geometry.text_format import (
    format_extrinsic,
    format_intrinsics,
    parse_block,
    parse_extrinsic,
    parse_intrinsics,
)
from src.geometry.transforms import (
    DecalRanges,
    Decalibration,
    Extrinsic,
    apply_decalibration,
    correction_between,
    recover_calibration,
    residual_label,
    sample_decalibration,
)

K = CameraIntrinsics(600.0, 600.0, 240.0, 150.0, 480, 300)


def random_quaternion(rng: np.random.Generator) -> UnitQuaternion:
    return UnitQuaternion.from_array(rng.standard_normal(4))


def random_euler(rng: np.random.Generator) -> EulerTPR:
    return EulerTPR(
        float(rng.uniform(-170, 170)),
        float(rng.uniform(-85, 85)),
        float(rng.uniform(-170, 170)),
    )


def random_extrinsic(rng: np.random.Generator) -> Extrinsic:
    return Extrinsic.from_rotation(random_quaternion(rng), rng.normal(size=3))


def test_euler_matches_independent_rotation(rng):
    for _ in range(200):
        e = random_euler(rng)
        expected = Rotation.from_euler(
            "ZYX", [e.roll, e.pan, e.tilt], degrees=True
        ).as_matrix()
        np.testing.assert_allclose(
            quat_from_euler(e).to_matrix(), expected, atol=1e-12
        )


def test_euler_round_trip(rng):
    for _ in range(500):
        e = random_euler(rng)
        back = quat_to_euler(quat_from_euler(e))
        np.testing.assert_allclose(back.as_array(), e.as_array(), atol=1e-9)


def test_single_axis_angles():
    assert quat_to_euler(quat_from_euler(EulerTPR(10, 0, 0))).tilt == (
        pytest.approx(10.0)
    )
    pan = quat_from_euler(EulerTPR(0, 10, 0))
    np.testing.assert_allclose(
        quat_to_euler(pan).as_array(), [0, 10, 0], atol=1e-12
    )
    assert geodesic_angle(pan, UnitQuaternion.identity()) == pytest.approx(10)


def test_from_euler_is_canonical(rng):
    for _ in range(200):
        assert quat_from_euler(random_euler(rng)).w >= 0.0
    flipped = quat_from_euler(EulerTPR(0.0, 0.0, 180.0))
    assert flipped.w == pytest.approx(0.0, abs=1e-15)
    assert quat_canonicalize(-flipped).as_array() == pytest.approx(
        flipped.as_array()
    )


def test_gimbal_lock_at_pan_limit():
    with pytest.raises(GimbalLock):
        quat_to_euler(quat_from_euler(EulerTPR(0.0, 90.0, 0.0)))
    with pytest.raises(GimbalLock):
        quat_to_euler(quat_from_euler(EulerTPR(5.0, -90.0, 3.0)))
    assert quat_to_euler(quat_from_euler(EulerTPR(0.0, 89.0, 0.0))).pan == (
        pytest.approx(89.0)
    )


def test_tilt_sign_follows_camera_x_axis():
    q = quat_from_euler(EulerTPR(15.0, 0.0, 0.0))
    # Positive tilt turns the optical axis (z) toward -y.
    axis = q.to_matrix() @ np.array([0.0, 0.0, 1.0])
    assert axis[1] < 0.0
    assert quat_to_euler(q).tilt == pytest.approx(15.0)


def test_product_matches_matrix_product(rng):
    for _ in range(200):
        a, b = random_quaternion(rng), random_quaternion(rng)
        np.testing.assert_allclose(
            quat_mul(a, b).to_matrix(),
            a.to_matrix() @ b.to_matrix(),
            atol=1e-12,
        )
        product = quat_mul(a, quat_invert(a))
        assert geodesic_angle(product, UnitQuaternion.identity()) < 1e-6


def test_matrix_round_trip_canonical(rng):
    for _ in range(200):
        q = quat_canonicalize(random_quaternion(rng))
        back = UnitQuaternion.from_matrix(q.to_matrix())
        np.testing.assert_allclose(back.as_array(), q.as_array(), atol=1e-12)


def test_degenerate_quaternion():
    with pytest.raises(DegenerateNorm):
        UnitQuaternion.from_array([0.0, 0.0, 0.0, 0.0])


def test_geodesic_angle_matches_matrix_log(rng):
    for _ in range(100):
        a = random_quaternion(rng)
        offset = quat_from_euler(EulerTPR(*rng.uniform(-40, 40, size=3)))
        b = quat_mul(a, offset)
        relative = a.to_matrix().T @ b.to_matrix()
        log = np.real(logm(relative))
        oracle = math.degrees(
            np.linalg.norm([log[2, 1], log[0, 2], log[1, 0]])
        )
        assert geodesic_angle(a, b) == pytest.approx(oracle, abs=1e-6)
        assert geodesic_angle(a, -b) == pytest.approx(geodesic_angle(a, b))


def test_geodesic_angle_is_a_metric(rng):
    for _ in range(500):
        a, b, c = (random_quaternion(rng) for _ in range(3))
        assert geodesic_angle(a, a) < 1e-6
        assert geodesic_angle(a, b) == pytest.approx(geodesic_angle(b, a))
        assert geodesic_angle(a, c) <= (
            geodesic_angle(a, b) + geodesic_angle(b, c) + 1e-9
        )


def test_quat_mean():
    q = quat_from_euler(EulerTPR(3.0, -2.0, 1.0))
    assert geodesic_angle(quat_mean([q, -q, q]), q) < 1e-9
    a = quat_from_euler(EulerTPR(0.0, 4.0, 0.0))
    b = quat_from_euler(EulerTPR(0.0, -4.0, 0.0))
    assert geodesic_angle(quat_mean([a, b]), UnitQuaternion.identity()) < (
        1e-9
    )
    with pytest.raises(EmptyInput):
        quat_mean([])


def test_extrinsic_algebra(rng):
    for _ in range(100):
        h = random_extrinsic(rng)
        np.testing.assert_allclose(
            (h @ h.inverse()).matrix, np.eye(4), atol=1e-12
        )
        points = rng.normal(size=(5, 3))
        np.testing.assert_allclose(
            h.inverse().apply(h.apply(points)), points, atol=1e-12
        )


def test_extrinsic_rejects_non_rotation():
    with pytest.raises(ConfigInvalid):
        Extrinsic(np.diag([1.0, 1.0, 2.0]))
    with pytest.raises(ConfigInvalid):
        Extrinsic(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(ConfigInvalid):
        Extrinsic.from_matrix(np.ones((4, 4)))


def test_label_recovers_ground_truth_rotation(rng):
    for _ in range(100):
        h_gt = random_extrinsic(rng)
        d = sample_decalibration(DecalRanges(), rng)
        h_init = apply_decalibration(h_gt, d)
        np.testing.assert_allclose(
            h_init.matrix, d.to_extrinsic().matrix @ h_gt.matrix, atol=1e-12
        )
        recovered = recover_calibration(h_init, [d.label])
        np.testing.assert_allclose(recovered.R, h_gt.R, atol=1e-9)
        assert d.label.w >= 0.0


def test_two_stage_recovery_composes(rng):
    for _ in range(100):
        h_gt = random_extrinsic(rng)
        d = sample_decalibration(DecalRanges(), rng)
        h_init = apply_decalibration(h_gt, d)
        phi_hat = quat_from_euler(EulerTPR(*rng.uniform(-3, 3, size=3)))
        phi_hat = quat_mul(phi_hat, d.label)
        residual = residual_label(d.label, phi_hat)
        recovered = recover_calibration(h_init, [phi_hat, residual])
        np.testing.assert_allclose(recovered.R, h_gt.R, atol=1e-9)
        assert residual.w >= 0.0


def test_correction_between(rng):
    a, b = random_extrinsic(rng), random_extrinsic(rng)
    c = correction_between(a, b)
    np.testing.assert_allclose(c.to_matrix() @ a.R, b.R, atol=1e-12)


def test_decalibration_distribution(rng):
    draws = [sample_decalibration(DecalRanges(), rng) for _ in range(20000)]
    angles = np.array([quat_to_euler(d.rotation).as_array() for d in draws])
    for column, limit in enumerate((10.0, 10.0, 5.0)):
        values = angles[:, column]
        assert np.all(np.abs(values) <= limit + 1e-9)
        statistic = kstest(values, "uniform", args=(-limit, 2 * limit))
        assert statistic.statistic < 0.02
    translations = np.array([d.translation for d in draws])
    np.testing.assert_allclose(translations.std(axis=0), 0.10, rtol=0.05)


def test_decalibration_inverse(rng):
    d = sample_decalibration(DecalRanges(), rng)
    both = d.to_extrinsic() @ d.invert().to_extrinsic()
    np.testing.assert_allclose(both.matrix, np.eye(4), atol=1e-12)
    identity = Decalibration.identity()
    assert geodesic_angle(identity.label, UnitQuaternion.identity()) == 0.0


def test_projection_matches_matrix_oracle(rng):
    for _ in range(50):
        h = Extrinsic.from_rotation(
            quat_from_euler(EulerTPR(*rng.uniform(-20, 20, size=3))),
            rng.normal(size=3),
        )
        points = rng.uniform([-30, -10, -20], [30, 10, 80], size=(200, 3))
        result = project_points(K, h, points)
        homogeneous = np.hstack([points, np.ones((200, 1))])
        image = (K.K @ h.matrix @ homogeneous.T).T
        front = image[:, 2] > 0
        np.testing.assert_allclose(
            result.u[front], image[front, 0] / image[front, 2], atol=1e-9
        )
        np.testing.assert_allclose(
            result.v[front], image[front, 1] / image[front, 2], atol=1e-9
        )
        np.testing.assert_allclose(result.z_c, image[:, 2], atol=1e-9)
        assert not np.any(result.in_image[result.z_c <= 0.0])


def test_projection_of_optical_axis_and_behind_camera():
    on_axis = project(K, Extrinsic.identity(), np.array([0.0, 0.0, 10.0]))
    assert (on_axis.u, on_axis.v) == (240.0, 150.0)
    assert on_axis.in_image
    behind = project(K, Extrinsic.identity(), np.array([0.0, 0.0, -10.0]))
    assert not behind.in_image
    assert behind.z_c < 0.0
    assert math.isnan(behind.u)


def test_intrinsics_validation_and_scaling():
    with pytest.raises(ConfigInvalid):
        CameraIntrinsics(0.0, 600.0, 240.0, 150.0, 480, 300)
    with pytest.raises(ConfigInvalid):
        CameraIntrinsics(600.0, 600.0, 500.0, 150.0, 480, 300)
    half = K.scaled(240, 150)
    assert (half.fx, half.cx, half.cy) == (300.0, 120.0, 75.0)


def test_text_format_round_trip(rng):
    h = random_extrinsic(rng)
    text = format_extrinsic("H_gt", h) + "\n" + format_intrinsics("K", K)
    entries = parse_block("# rig\n" + text + "\n\n")
    np.testing.assert_array_equal(
        parse_extrinsic(entries["H_gt"], "H_gt").matrix, h.matrix
    )
    assert parse_intrinsics(entries["K"]) == K
    with pytest.raises(ConfigInvalid):
        parse_extrinsic(["1.0"] * 15)
    with pytest.raises(ConfigInvalid):
        parse_block("no separator here")
