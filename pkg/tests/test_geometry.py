import numpy as np
import pytest
from scipy.linalg import logm

from ironreg.errors import (
    DegenerateTriadError,
    DegenerateWeightsError,
    NormalizationError,
    ShapeError,
)
from ironreg.geometry import (
    SimilarityTransform,
    apply_transform,
    exp_map_so3,
    geodesic_error,
    is_rotation,
    pi_matrices,
    quat_to_rot,
    rot_to_quat,
    triad_rotation,
    weighted_centroid_demean,
)
from util import (
    random_rotation,
    random_transform,
    random_unit_quaternions,
    rotation_angle_between,
)


def rz(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


class TestWeightedCentroidDemean:
    def test_symmetric_pair(self):
        centroid, demeaned = weighted_centroid_demean(
            [(1, 0, 0), (-1, 0, 0)], [1.0, 1.0]
        )
        assert np.allclose(centroid, 0.0)
        assert np.allclose(demeaned, [[1, 0, 0], [-1, 0, 0]])

    def test_weighted_mean_by_hand(self):
        centroid, _ = weighted_centroid_demean([(1, 0, 0), (0, 0, 0)], [3.0, 1.0])
        assert np.allclose(centroid, [0.75, 0, 0])

    def test_weighted_demeaned_sums_to_zero(self):
        # oracle: direct summation
        rng = np.random.default_rng(0)
        pts = rng.normal(size=(100, 3))
        w = rng.uniform(size=100)
        centroid, demeaned = weighted_centroid_demean(pts, w)
        assert np.allclose((w[:, None] * demeaned).sum(axis=0), 0.0, atol=1e-10)
        assert np.allclose(centroid, (w[:, None] * pts).sum(axis=0) / w.sum())

    def test_zero_weights_rejected(self):
        with pytest.raises(DegenerateWeightsError):
            weighted_centroid_demean([(1, 2, 3)], [0.0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            weighted_centroid_demean([(1, 2, 3), (4, 5, 6)], [1.0])


class TestTriadRotation:
    def test_identity(self):
        axes = np.eye(3)
        assert np.allclose(triad_rotation(axes, axes), np.eye(3))

    def test_rotation_about_z(self):
        src = np.eye(3)
        dst = src @ rz(np.pi / 2).T
        R = triad_rotation(src, dst)
        assert np.allclose(R, rz(np.pi / 2), atol=1e-12)
        # the constructed frame vectors map src directions onto dst directions
        for i in range(3):
            for j in range(i + 1, 3):
                m = src[j] - src[i]
                n = dst[j] - dst[i]
                assert np.allclose(R @ m, n, atol=1e-12)

    def test_colinear_rejected(self):
        pts = np.array([[0, 0, 0], [1, 1, 1], [2, 2, 2]], dtype=float)
        with pytest.raises(DegenerateTriadError):
            triad_rotation(pts, np.eye(3))

    def test_output_always_a_rotation(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            src = rng.normal(size=(3, 3))
            dst = rng.normal(size=(3, 3))
            R = triad_rotation(src, dst)
            assert is_rotation(R, tol=1e-9)

    def test_recovers_rotation_under_any_similarity(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            src = rng.normal(size=(3, 3))
            T = random_transform(rng, scale_range=(0.1, 10.0), t_max=5.0)
            dst = T.apply(src)
            R = triad_rotation(src, dst)
            assert rotation_angle_between(R, T.R) < 1e-9


class TestQuaternionConversions:
    def test_identity_quaternion(self):
        assert np.allclose(quat_to_rot([0, 0, 0, 1]), np.eye(3))
        assert np.allclose(rot_to_quat(np.eye(3)), [0, 0, 0, 1])

    def test_z_rotation(self):
        q = np.array([0, 0, np.sin(np.pi / 4), np.cos(np.pi / 4)])
        assert np.allclose(quat_to_rot(q), rz(np.pi / 2), atol=1e-12)

    def test_round_trip_1000_random(self):
        rng = np.random.default_rng(3)
        for q in random_unit_quaternions(rng, 1000):
            q2 = rot_to_quat(quat_to_rot(q))
            assert min(np.linalg.norm(q2 - q), np.linalg.norm(q2 + q)) < 1e-10

    def test_non_unit_rejected(self):
        with pytest.raises(NormalizationError):
            quat_to_rot([0, 0, 0, 1.001])


class TestPiMatrices:
    def test_identity_quaternion_gives_identity_matrices(self):
        pi1, pi2 = pi_matrices([0, 0, 0, 1])
        assert np.allclose(pi1, np.eye(4))
        assert np.allclose(pi2, np.eye(4))

    def test_bilinearity(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            v, w = rng.normal(size=4), rng.normal(size=4)
            pi1_v, _ = pi_matrices(v)
            _, pi2_w = pi_matrices(w)
            assert np.allclose(pi1_v @ w, pi2_w @ v, atol=1e-12)

    def test_sandwich_matches_rotation(self):
        rng = np.random.default_rng(5)
        for q in random_unit_quaternions(rng, 100):
            p = rng.normal(size=3)
            pi1, pi2 = pi_matrices(q)
            lhs = pi2.T @ pi1 @ np.r_[p, 0.0]
            assert np.allclose(lhs, np.r_[quat_to_rot(q) @ p, 0.0], atol=1e-12)


class TestGeodesicError:
    def test_identity(self):
        assert geodesic_error(np.eye(3), np.eye(3)) == 0.0

    def test_quarter_turn(self):
        assert abs(geodesic_error(np.eye(3), rz(np.pi / 2)) - np.pi / 2) < 1e-12

    def test_exp_map_offset(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            R = random_rotation(rng)
            axis = rng.normal(size=3)
            axis /= np.linalg.norm(axis)
            assert abs(geodesic_error(R, R @ exp_map_so3(0.1 * axis)) - 0.1) < 1e-9

    def test_symmetry_and_range(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            R1, R2 = random_rotation(rng), random_rotation(rng)
            e = geodesic_error(R1, R2)
            assert 0.0 <= e <= np.pi
            assert abs(e - geodesic_error(R2, R1)) < 1e-12


class TestExpMap:
    def test_zero(self):
        assert np.allclose(exp_map_so3([0, 0, 0]), np.eye(3))

    def test_z_axis(self):
        assert np.allclose(exp_map_so3([0, 0, np.pi / 2]), rz(np.pi / 2), atol=1e-12)

    def test_log_round_trip(self):
        # oracle: matrix logarithm
        rng = np.random.default_rng(8)
        for _ in range(50):
            w = rng.normal(size=3)
            w = w / np.linalg.norm(w) * rng.uniform(0.01, np.pi - 0.01)
            R = exp_map_so3(w)
            log = logm(R)
            w_back = np.array([log[2, 1], log[0, 2], log[1, 0]]).real
            assert np.allclose(w_back, w, atol=1e-9)

    def test_tiny_angle_series(self):
        R = exp_map_so3([1e-14, 0, 0])
        assert is_rotation(R, tol=1e-12)


class TestApplyTransform:
    def test_identity(self):
        pts = np.random.default_rng(9).normal(size=(10, 3))
        assert np.allclose(apply_transform(SimilarityTransform.identity(), pts), pts)

    def test_by_hand(self):
        T = SimilarityTransform(2.0, np.eye(3), [1, 0, 0])
        assert np.allclose(T.apply([(1, 1, 1)]), [[3, 2, 2]])

    def test_inverse_round_trip(self):
        rng = np.random.default_rng(10)
        for _ in range(20):
            T = random_transform(rng)
            cloud = rng.normal(size=(30, 3))
            back = T.inverse().apply(T.apply(cloud))
            assert np.allclose(back, cloud, atol=1e-9)

    def test_invalid_scale_rejected(self):
        with pytest.raises(ShapeError):
            SimilarityTransform(-1.0, np.eye(3), np.zeros(3))
