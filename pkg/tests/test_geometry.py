import numpy as np
import pytest
from scipy.spatial.transform import Rotation, Slerp

from duvio import geometry as geo


def random_quat(rng):
    q = rng.normal(size=4)
    return geo.quat_normalize(q)


def test_quat_mat_round_trip(rng):
    for _ in range(50):
        q = random_quat(rng)
        r = geo.quat_to_mat(q)
        q2 = geo.mat_to_quat(r)
        # q and -q are the same rotation
        assert min(np.linalg.norm(q - q2), np.linalg.norm(q + q2)) < 1e-12


def test_quat_to_mat_matches_scipy(rng):
    for _ in range(50):
        q = random_quat(rng)
        ours = geo.quat_to_mat(q)
        ref = Rotation.from_quat([q[1], q[2], q[3], q[0]]).as_matrix()
        assert np.allclose(ours, ref, atol=1e-12)


def test_euler_xyz_matches_scipy(rng):
    for _ in range(50):
        phi = rng.uniform(-1.0, 1.0, 3)
        ours = geo.euler_xyz_to_mat(phi)
        ref = Rotation.from_euler("XYZ", phi).as_matrix()
        assert np.allclose(ours, ref, atol=1e-12)
        back = geo.mat_to_euler_xyz(ours)
        assert np.allclose(back, phi, atol=1e-12)


def test_slerp_midpoint_identity_to_90deg_about_z():
    q0 = np.array([1.0, 0.0, 0.0, 0.0])
    q1 = np.array([np.cos(np.pi / 4), 0.0, 0.0, np.sin(np.pi / 4)])  # 90 deg about z
    mid = geo.slerp(q0, q1, 0.5)
    expected = np.array([np.cos(np.pi / 8), 0.0, 0.0, np.sin(np.pi / 8)])  # 45 deg
    assert np.allclose(mid, expected, atol=1e-12)


def test_slerp_matches_scipy(rng):
    for _ in range(25):
        q0, q1 = random_quat(rng), random_quat(rng)
        rots = Rotation.from_quat([[q0[1], q0[2], q0[3], q0[0]],
                                   [q1[1], q1[2], q1[3], q1[0]]])
        ref = Slerp([0.0, 1.0], rots)
        for u in (0.0, 0.17, 0.5, 0.93, 1.0):
            ours = geo.quat_to_mat(geo.slerp(q0, q1, u))
            assert np.allclose(ours, ref([u]).as_matrix()[0], atol=1e-9), u


def test_slerp_exact_at_endpoints(rng):
    q0, q1 = random_quat(rng), random_quat(rng)
    assert np.array_equal(geo.slerp(q0, q1, 0.0), q0)
    assert np.array_equal(geo.slerp(q0, q1, 1.0), q1)


def test_relative_pose_then_compose_is_identity(rng):
    for _ in range(25):
        qa, qb = random_quat(rng), random_quat(rng)
        ta, tb = rng.normal(size=3), rng.normal(size=3)
        v, phi = geo.relative_pose(qa, ta, qb, tb)
        q2, t2 = geo.compose_pose(qa, ta, v, phi)
        assert np.allclose(t2, tb, atol=1e-12)
        assert np.allclose(geo.quat_to_mat(q2), geo.quat_to_mat(qb), atol=1e-12)


def test_relative_pose_identity_when_equal(rng):
    q, t = random_quat(rng), rng.normal(size=3)
    v, phi = geo.relative_pose(q, t, q, t)
    assert np.allclose(v, 0.0, atol=1e-12)
    assert np.allclose(phi, 0.0, atol=1e-12)


def test_rotation_angle():
    r = geo.euler_xyz_to_mat([0.0, 0.0, 0.3])
    assert geo.rotation_angle(r) == pytest.approx(0.3, abs=1e-12)
    assert geo.rotation_angle(np.eye(3)) == pytest.approx(0.0, abs=1e-8)
