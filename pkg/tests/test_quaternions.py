import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_unit_quaternion
from dockopt import quaternions as quat


def unit_quaternions():
    return (
        st.lists(st.floats(-1.0, 1.0), min_size=4, max_size=4)
        .map(np.array)
        .filter(lambda q: np.linalg.norm(q) > 1e-2)
        .map(lambda q: q / np.linalg.norm(q))
    )


class TestMul:
    def test_identity(self, rng):
        for _ in range(20):
            q = random_unit_quaternion(rng)
            np.testing.assert_allclose(quat.quat_mul(quat.IDENTITY, q), q, atol=1e-15)

    def test_hand_expanded_product(self):
        # (0,0,1,0) (x) (0,0,1,0): w = -(j . j) = -1, vector part zero.
        j = np.array([0.0, 0.0, 1.0, 0.0])
        np.testing.assert_allclose(
            quat.quat_mul(j, j), np.array([-1.0, 0.0, 0.0, 0.0]), atol=1e-15
        )

    def test_inverse_property(self, rng):
        for _ in range(100):
            q = random_unit_quaternion(rng)
            np.testing.assert_allclose(
                quat.quat_mul(q, quat.conj(q)), quat.IDENTITY, atol=1e-12
            )

    @settings(max_examples=60, deadline=None)
    @given(unit_quaternions(), unit_quaternions(), unit_quaternions())
    def test_associative(self, a, b, c):
        left = quat.mul(quat.mul(a, b), c)
        right = quat.mul(a, quat.mul(b, c))
        np.testing.assert_allclose(left, right, atol=1e-12)


class TestRotate:
    def test_identity(self):
        np.testing.assert_allclose(
            quat.rotate(quat.IDENTITY, [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0]
        )

    def test_quarter_turn_about_z(self):
        q = quat.from_axis_angle([0, 0, 1], np.pi / 2)
        np.testing.assert_allclose(quat.rotate(q, [1, 0, 0]), [0, 1, 0], atol=1e-15)

    def test_isometry(self, rng):
        for _ in range(50):
            q = random_unit_quaternion(rng)
            u = rng.normal(size=3)
            v = rng.normal(size=3)
            ru, rv = quat.rotate(q, u), quat.rotate(q, v)
            assert abs(np.linalg.norm(ru) - np.linalg.norm(u)) < 1e-12
            assert abs(ru @ rv - u @ v) < 1e-12

    def test_matches_rotation_matrix(self, rng):
        for _ in range(20):
            q = random_unit_quaternion(rng)
            u = rng.normal(size=3)
            np.testing.assert_allclose(
                quat.rotate(q, u), quat.rotation_matrix(q) @ u, atol=1e-13
            )


class TestProductMatrices:
    def test_right_product_matrix_on_identity_returns_q(self, rng):
        for _ in range(20):
            q = random_unit_quaternion(rng)
            np.testing.assert_allclose(
                quat.right_product_matrix(q) @ quat.IDENTITY, q, atol=1e-15
            )

    def test_left_right_consistency(self, rng):
        for _ in range(20):
            a = random_unit_quaternion(rng)
            b = random_unit_quaternion(rng)
            np.testing.assert_allclose(
                quat.left_product_matrix(a) @ b, quat.mul(a, b), atol=1e-14
            )
            np.testing.assert_allclose(
                quat.right_product_matrix(b) @ a, quat.mul(a, b), atol=1e-14
            )


class TestErrorQuat:
    def test_same_attitude(self, rng):
        q = random_unit_quaternion(rng)
        dq = quat.error_quat(q, q)
        np.testing.assert_allclose(np.abs(dq[0]), 1.0, atol=1e-12)

    def test_from_identity(self):
        qf = np.array([0.0, 0.0, 1.0, 0.0])
        np.testing.assert_allclose(quat.error_quat(quat.IDENTITY, qf), qf, atol=1e-15)

    def test_scalar_part_via_product_matrix(self, rng):
        # Oracle: e1' [q_f](x) q* picks the scalar part of q* (x) q_f.
        e1 = np.array([1.0, 0.0, 0.0, 0.0])
        for _ in range(50):
            q = random_unit_quaternion(rng)
            qf = random_unit_quaternion(rng)
            oracle = e1 @ quat.right_product_matrix(qf) @ quat.conj(q)
            assert abs(quat.error_quat(q, qf)[0] - oracle) < 1e-12


class TestSlerp:
    def test_endpoints(self, rng):
        for _ in range(20):
            q0 = random_unit_quaternion(rng)
            qf = random_unit_quaternion(rng)
            np.testing.assert_allclose(quat.slerp(q0, qf, 0.0), q0, atol=1e-9)
            np.testing.assert_allclose(quat.slerp(q0, qf, 1.0), qf, atol=1e-9)

    def test_halfway_against_axis_angle_oracle(self):
        q0 = quat.IDENTITY
        qf = quat.from_axis_angle([0, 0, 1], np.pi)
        expected = quat.from_axis_angle([0, 0, 1], np.pi / 2)
        np.testing.assert_allclose(quat.slerp(q0, qf, 0.5), expected, atol=1e-12)

    def test_angle_grows_linearly(self, rng):
        for _ in range(10):
            q0 = random_unit_quaternion(rng)
            qf = random_unit_quaternion(rng)
            total = quat.relative_rotation(q0, qf).angle
            for f in (0.25, 0.5, 0.75):
                qf_f = quat.slerp(q0, qf, f)
                partial = quat.relative_rotation(q0, qf_f).angle
                assert abs(partial - f * total) < 1e-9

    @settings(max_examples=50, deadline=None)
    @given(unit_quaternions(), unit_quaternions(), st.floats(0.0, 1.0))
    def test_unit_norm(self, q0, qf, f):
        assert abs(np.linalg.norm(quat.slerp(q0, qf, f)) - 1.0) < 1e-12

    def test_antipodal_pair_flagged_and_deterministic(self):
        q0 = quat.IDENTITY
        qf = -q0
        with pytest.warns(UserWarning, match="antipodal"):
            a = quat.slerp(q0, qf, 0.5)
        with pytest.warns(UserWarning):
            b = quat.slerp(q0, qf, 0.5)
        np.testing.assert_array_equal(a, b)
        with pytest.warns(UserWarning):
            np.testing.assert_allclose(quat.slerp(q0, qf, 1.0), qf, atol=1e-12)

    def test_fraction_out_of_range(self):
        with pytest.raises(ValueError):
            quat.slerp(quat.IDENTITY, quat.IDENTITY, 1.5)


class TestTaitBryan:
    def test_identity(self):
        angles = quat.to_tait_bryan(quat.IDENTITY)
        assert angles == (0.0, 0.0, 0.0, False)

    def test_sixty_degree_roll(self):
        q = quat.from_axis_angle([1, 0, 0], np.deg2rad(60.0))
        angles = quat.to_tait_bryan(q)
        assert abs(angles.roll - 60.0 * np.pi / 180.0) < 1e-12
        assert abs(angles.pitch) < 1e-12 and abs(angles.yaw) < 1e-12

    def test_round_trip(self, rng):
        for _ in range(1000):
            q = random_unit_quaternion(rng)
            a = quat.to_tait_bryan(q)
            if a.gimbal_lock:
                continue
            back = quat.from_tait_bryan(a.roll, a.pitch, a.yaw)
            if back @ q < 0:
                back = -back
            np.testing.assert_allclose(back, q, atol=1e-9)

    def test_gimbal_lock_flagged(self):
        q = quat.from_axis_angle([0, 1, 0], np.pi / 2)
        angles = quat.to_tait_bryan(q)
        assert angles.gimbal_lock and angles.yaw == 0.0
        # composed lock case keeps roll information consistent
        q2 = quat.quat_mul(q, quat.from_axis_angle([1, 0, 0], 0.3))
        a2 = quat.to_tait_bryan(q2)
        assert a2.gimbal_lock
        back = quat.from_tait_bryan(a2.roll, a2.pitch, a2.yaw)
        if back @ q2 < 0:
            back = -back
        np.testing.assert_allclose(back, q2, atol=1e-6)


class TestConstructors:
    def test_unit_quaternion_normalizes(self):
        q = quat.unit_quaternion([2.0, 0.0, 0.0, 0.0])
        np.testing.assert_allclose(q, quat.IDENTITY)
        with pytest.raises(ValueError):
            quat.unit_quaternion([0.0, 0.0, 0.0, 0.0])

    def test_canonicalize(self):
        q = np.array([-0.5, 0.5, 0.5, 0.5])
        assert quat.canonicalize(q)[0] > 0
        assert quat.canonicalize(-q)[0] > 0
