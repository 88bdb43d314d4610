"""Rotation and pose helpers.

Conventions used throughout the package:

* quaternions are unit, scalar-first ``(w, x, y, z)``, body-to-world;
* Euler angles are intrinsic XYZ, i.e. ``R = Rx(a) @ Ry(b) @ Rz(c)``;
* an absolute pose ``(R, t)`` maps body coordinates into the world;
* the relative pose of b w.r.t. a is ``inv(T_a) * T_b``: rotation
  ``R_a^T R_b`` and translation ``R_a^T (t_b - t_a)`` expressed in a's
  body frame.
"""

import numpy as np

_EPS = 1e-12


def quat_normalize(q):
    q = np.asarray(q, dtype=np.float64)
    return q / np.linalg.norm(q)


def quat_mul(q1, q2):
    w1, x1, y1, z1 = q1
    w2, x2, y2, z2 = q2
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_mat(q):
    w, x, y, z = quat_normalize(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def mat_to_quat(r):
    r = np.asarray(r, dtype=np.float64)
    tr = np.trace(r)
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array([0.25 * s,
                      (r[2, 1] - r[1, 2]) / s,
                      (r[0, 2] - r[2, 0]) / s,
                      (r[1, 0] - r[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(r)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(r[i, i] - r[j, j] - r[k, k] + 1.0, 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (r[k, j] - r[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (r[j, i] + r[i, j]) / s
        q[1 + k] = (r[k, i] + r[i, k]) / s
    if q[0] < 0:
        q = -q
    return quat_normalize(q)


def slerp(q0, q1, u):
    """Spherical linear interpolation along the shorter arc; exact at u=0,1."""
    q0 = np.asarray(q0, dtype=np.float64)
    q1 = np.asarray(q1, dtype=np.float64)
    if u <= 0.0:
        return q0.copy()
    if u >= 1.0:
        return q1.copy()
    dot = float(np.dot(q0, q1))
    if dot < 0.0:
        q1 = -q1
        dot = -dot
    dot = min(dot, 1.0)
    if dot > 1.0 - 1e-10:
        return quat_normalize(q0 + u * (q1 - q0))
    theta = np.arccos(dot)
    s = np.sin(theta)
    return quat_normalize((np.sin((1.0 - u) * theta) / s) * q0
                          + (np.sin(u * theta) / s) * q1)


def euler_xyz_to_mat(phi):
    """Intrinsic XYZ Euler angles (rad) to rotation matrix Rx @ Ry @ Rz."""
    a, b, c = np.asarray(phi, dtype=np.float64)
    ca, sa = np.cos(a), np.sin(a)
    cb, sb = np.cos(b), np.sin(b)
    cc, sc = np.cos(c), np.sin(c)
    rx = np.array([[1, 0, 0], [0, ca, -sa], [0, sa, ca]])
    ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    rz = np.array([[cc, -sc, 0], [sc, cc, 0], [0, 0, 1]])
    return rx @ ry @ rz


def mat_to_euler_xyz(r):
    """Inverse of euler_xyz_to_mat; gimbal fallback at |pitch| = pi/2."""
    r = np.asarray(r, dtype=np.float64)
    b = np.arcsin(np.clip(r[0, 2], -1.0, 1.0))
    if np.abs(np.cos(b)) > 1e-9:
        a = np.arctan2(-r[1, 2], r[2, 2])
        c = np.arctan2(-r[0, 1], r[0, 0])
    else:
        a = np.arctan2(r[2, 1], r[1, 1])
        c = 0.0
    return np.array([a, b, c])


def rotation_angle(r):
    """Geodesic angle of a rotation matrix in [0, pi]."""
    c = (np.trace(r) - 1.0) * 0.5
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def relative_pose(q_a, t_a, q_b, t_b):
    """Relative pose of b in a's body frame -> (v (3,), phi XYZ-Euler (3,))."""
    r_a = quat_to_mat(q_a)
    r_b = quat_to_mat(q_b)
    r_rel = r_a.T @ r_b
    v = r_a.T @ (np.asarray(t_b, dtype=np.float64) - np.asarray(t_a, dtype=np.float64))
    return v, mat_to_euler_xyz(r_rel)


def compose_pose(q, t, v, phi):
    """Apply a body-frame delta (v, phi) to pose (q, t)."""
    r = quat_to_mat(q)
    r_next = r @ euler_xyz_to_mat(phi)
    t_next = np.asarray(t, dtype=np.float64) + r @ np.asarray(v, dtype=np.float64)
    return mat_to_quat(r_next), t_next
