"""Quaternion and SO(3) helpers for the floating-base manifold arithmetic.

Quaternions are stored as (w, x, y, z) numpy arrays of shape (4,).
Rotation deltas are rotation vectors (so(3)), applied on the right of the
base quaternion: q_new = q * exp(delta).
"""

import numpy as np

_EPS = 1e-12


def skew(v):
    """3x3 cross-product matrix: skew(v) @ u == cross(v, u)."""
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def quat_normalize(q):
    return q / np.linalg.norm(q)


def quat_mul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_to_rot(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_exp(w):
    """Exponential map so(3) -> unit quaternion for rotation vector w."""
    angle = np.linalg.norm(w)
    if angle < 1e-8:
        # sin(a/2)/a ~ 1/2 - a^2/48
        s = 0.5 - angle * angle / 48.0
        return quat_normalize(np.array([1.0 - angle * angle / 8.0, s * w[0], s * w[1], s * w[2]]))
    half = 0.5 * angle
    s = np.sin(half) / angle
    return np.array([np.cos(half), s * w[0], s * w[1], s * w[2]])


def quat_log(q):
    """Logarithm map unit quaternion -> rotation vector, angle in [0, pi)."""
    if q[0] < 0.0:
        q = -q
    vn = np.linalg.norm(q[1:])
    if vn < 1e-12:
        return 2.0 * q[1:]  # small-angle: w ~ 1, vec ~ delta/2
    angle = 2.0 * np.arctan2(vn, q[0])
    return (angle / vn) * q[1:]


def rotvec_to_rot(w):
    """Rodrigues formula."""
    angle = np.linalg.norm(w)
    K = skew(w)
    if angle < 1e-8:
        return np.eye(3) + K + 0.5 * (K @ K)
    return np.eye(3) + (np.sin(angle) / angle) * K + ((1 - np.cos(angle)) / angle**2) * (K @ K)


def so3_right_jacobian(w):
    """Right Jacobian J_r of SO(3): exp(w + d) ~ exp(w) exp(J_r(w) d)."""
    angle = np.linalg.norm(w)
    K = skew(w)
    if angle < 1e-6:
        return np.eye(3) - 0.5 * K + (1.0 / 6.0) * (K @ K)
    a2 = angle * angle
    return (np.eye(3)
            - ((1 - np.cos(angle)) / a2) * K
            + ((angle - np.sin(angle)) / (a2 * angle)) * (K @ K))


def rot_to_rpy(R, gimbal_tol=1e-3):
    """Roll/pitch/yaw with R = Rz(yaw) @ Ry(pitch) @ Rx(roll).

    Raises ValueError near the pitch singularity; walking feet stay far from it.
    """
    sp = -R[2, 0]
    sp = np.clip(sp, -1.0, 1.0)
    pitch = np.arcsin(sp)
    if abs(pitch) > np.pi / 2 - gimbal_tol:
        raise ValueError(f"rpy extraction near gimbal lock (pitch={pitch:.4f} rad)")
    roll = np.arctan2(R[2, 1], R[2, 2])
    yaw = np.arctan2(R[1, 0], R[0, 0])
    return roll, pitch, yaw


def rpy_rate_matrix_inv(roll, pitch, yaw):
    """E^{-1} with [droll, dpitch, dyaw] = E^{-1} @ omega_world for ZYX Euler."""
    cp, tp = np.cos(pitch), np.tan(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    return np.array([
        [cy / cp, sy / cp, 0.0],
        [-sy, cy, 0.0],
        [cy * tp, sy * tp, 1.0],
    ])
