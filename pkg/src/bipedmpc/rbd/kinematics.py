"""Configuration arithmetic and forward kinematics.

Conventions (fixed once for the whole package):

* Configuration: base position (world), base quaternion (w,x,y,z), joint angles.
* Tangent/velocity layout: ``[linear(3), angular(3), joints(nj)]``.
* Base linear and angular velocity are expressed in the *body* frame; the
  tangent delta uses the same local convention, with the rotation delta a
  rotation vector applied on the right of the base quaternion and the
  translation delta expressed in the anchor configuration's body axes.
* Public frame Jacobians are world-aligned at the frame origin: ``J @ v``
  is the stacked world linear/angular velocity of the frame.
"""

from dataclasses import dataclass

import numpy as np

from .so3 import (quat_mul, quat_conj, quat_exp, quat_log, quat_to_rot,
                  quat_normalize, rotvec_to_rot, skew, so3_right_jacobian,
                  rot_to_rpy, rpy_rate_matrix_inv)


def _cross(a, b):
    """3-vector cross product without np.cross's dispatch overhead."""
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


@dataclass
class Configuration:
    base_pos: np.ndarray    # (3,)
    base_quat: np.ndarray   # (4,) w,x,y,z, unit
    joints: np.ndarray      # (nj,)

    def copy(self):
        return Configuration(self.base_pos.copy(), self.base_quat.copy(), self.joints.copy())

    def check(self, tol=1e-9):
        if abs(np.linalg.norm(self.base_quat) - 1.0) > tol:
            raise ValueError("base quaternion not unit-norm")
        return self


def neutral_configuration(model):
    return Configuration(np.zeros(3), np.array([1.0, 0, 0, 0]), np.zeros(model.nj))


def plus(q0: Configuration, delta: np.ndarray) -> Configuration:
    """Manifold update q0 (+) delta with the local-frame tangent convention."""
    R0 = quat_to_rot(q0.base_quat)
    pos = q0.base_pos + R0 @ delta[0:3]
    quat = quat_normalize(quat_mul(q0.base_quat, quat_exp(delta[3:6])))
    return Configuration(pos, quat, q0.joints + delta[6:])


def minus(q: Configuration, q0: Configuration) -> np.ndarray:
    """Tangent delta with plus(q0, minus(q, q0)) == q; rotation must stay < pi."""
    R0 = quat_to_rot(q0.base_quat)
    dq = quat_mul(quat_conj(q0.base_quat), q.base_quat)
    w = abs(dq[0])
    angle = 2.0 * np.arccos(min(w, 1.0))
    if angle >= np.pi - 1e-6:
        raise ValueError(f"relative rotation {angle:.6f} rad too close to pi")
    out = np.empty(6 + len(q.joints))
    out[0:3] = R0.T @ (q.base_pos - q0.base_pos)
    out[3:6] = quat_log(dq)
    out[6:] = q.joints - q0.joints
    return out


@dataclass
class FootKinematics:
    world_rot: np.ndarray   # (3,3)
    world_pos: np.ndarray   # (3,)
    height: float           # world z of the foot origin
    roll: float             # world rpy
    pitch: float
    yaw_body: float         # yaw of the base-relative foot rotation
    pos_body: np.ndarray    # (3,) foot origin in base frame
    y_hip_dist: float       # base-frame y offset of the foot from its hip


@dataclass
class KinematicsData:
    """One FK pass; base-frame quantities feed Jacobians and dynamics."""

    q: Configuration
    R_wb: np.ndarray
    # per link, in base frame
    R_bl: list
    p_bl: list
    # per revolute joint, in base frame
    axis_b: np.ndarray      # (nj,3)
    origin_b: np.ndarray    # (nj,3)
    feet: dict              # side -> FootKinematics

    def world_link_pose(self, link):
        return self.R_wb @ self.R_bl[link], self.q.base_pos + self.R_wb @ self.p_bl[link]


def _joint_rot(joint, angle):
    R = rotvec_to_rot(joint.axis * angle)
    if np.any(joint.rpy):
        r, p, y = joint.rpy
        Rfix = (rotvec_to_rot(np.array([0, 0, y])) @ rotvec_to_rot(np.array([0, p, 0]))
                @ rotvec_to_rot(np.array([r, 0, 0])))
        return Rfix @ R
    return R


def forward_kinematics(model, q: Configuration) -> KinematicsData:
    """Compose joint transforms root-to-leaf; extract per-foot quantities."""
    n = len(model.links)
    R_bl = [None] * n
    p_bl = [None] * n
    R_bl[model.root] = np.eye(3)
    p_bl[model.root] = np.zeros(3)
    axis_b = np.zeros((model.nj, 3))
    origin_b = np.zeros((model.nj, 3))

    for j, jnt in enumerate(model.joints):
        Rp, pp = R_bl[jnt.parent], p_bl[jnt.parent]
        origin_b[j] = pp + Rp @ jnt.origin
        Rj = Rp @ _joint_rot(jnt, q.joints[j])
        axis_b[j] = Rj @ jnt.axis
        R_bl[jnt.child] = Rj
        p_bl[jnt.child] = origin_b[j]

    R_wb = quat_to_rot(q.base_quat)
    feet = {}
    for side, foot in model.feet.items():
        R_bf = R_bl[foot.link]
        p_bf = p_bl[foot.link] + R_bf @ foot.offset
        R_wf = R_wb @ R_bf
        p_wf = q.base_pos + R_wb @ p_bf
        roll, pitch, _ = rot_to_rpy(R_wf)
        _, _, yaw_b = rot_to_rpy(R_bf)
        hip = model.foot_hip_joint(side)
        feet[side] = FootKinematics(
            world_rot=R_wf, world_pos=p_wf, height=p_wf[2],
            roll=roll, pitch=pitch, yaw_body=yaw_b,
            pos_body=p_bf, y_hip_dist=p_bf[1] - origin_b[hip][1])
    return KinematicsData(q=q, R_wb=R_wb, R_bl=R_bl, p_bl=p_bl,
                          axis_b=axis_b, origin_b=origin_b, feet=feet)


def _frame_base_quantities(model, data, frame):
    """Base-frame origin position and joint path of a named frame."""
    if frame == "base":
        return np.zeros(3), []
    if frame in model.feet:
        foot = model.feet[frame]
        p = data.p_bl[foot.link] + data.R_bl[foot.link] @ foot.offset
        return p, model.joint_path[foot.link]
    link = model.link_index(frame)
    return data.p_bl[link], model.joint_path[link]


def frame_jacobian(model, q, frame, data=None):
    """6 x (nj+6) world-aligned Jacobian at the frame origin (linear over angular)."""
    if data is None:
        data = forward_kinematics(model, q)
    r_b, path = _frame_base_quantities(model, data, frame)
    R = data.R_wb
    J = np.zeros((6, model.nv))
    J[0:3, 0:3] = R
    J[0:3, 3:6] = -R @ skew(r_b)
    J[3:6, 3:6] = R
    for j in path:
        J[0:3, 6 + j] = R @ _cross(data.axis_b[j], r_b - data.origin_b[j])
        J[3:6, 6 + j] = R @ data.axis_b[j]
    return J


def delta_chain_factor(delta: np.ndarray, nj: int) -> np.ndarray:
    """T with d(F(q0 (+) delta))/d(delta) = J_geometric(q) @ T.

    Accounts for the tangent parametrization being anchored at q0: the
    translation block rotates by exp(delta_rot)^T and the rotation block is
    the SO(3) right Jacobian at delta_rot.
    """
    T = np.eye(6 + nj)
    w = delta[3:6]
    T[0:3, 0:3] = rotvec_to_rot(w).T
    T[3:6, 3:6] = so3_right_jacobian(w)
    return T


def foot_residual_rows(model, q, side, data=None):
    """Geometric Jacobian rows of the per-foot scalar outputs at q.

    Returns a dict of 1x(nj+6) rows (w.r.t. the local velocity at q) for:
    ``height``, ``roll``, ``pitch``, ``yaw_body``, ``y_hip_dist``, plus the
    3x(nj+6) ``pos_body`` block. Multiply by :func:`delta_chain_factor` to get
    derivatives w.r.t. a tangent delta anchored elsewhere.
    """
    if data is None:
        data = forward_kinematics(model, q)
    fk = data.feet[side]
    J = frame_jacobian(model, q, side, data)
    rows = {"height": J[2:3, :].copy()}

    _, _, yaw_w = rot_to_rpy(fk.world_rot)
    Einv = rpy_rate_matrix_inv(fk.roll, fk.pitch, yaw_w)
    rates = Einv @ J[3:6, :]
    rows["roll"] = rates[0:1, :]
    rows["pitch"] = rates[1:2, :]

    # base-relative yaw: angular velocity of the relative rotation in base axes
    Jb = frame_jacobian(model, q, "base", data)
    rel = data.R_wb.T @ (J[3:6, :] - Jb[3:6, :])
    foot = model.feet[side]
    r_rel, p_rel, y_rel = rot_to_rpy(data.R_bl[foot.link])
    rows["yaw_body"] = (rpy_rate_matrix_inv(r_rel, p_rel, y_rel) @ rel)[2:3, :]

    # body-frame foot position: joints only
    pos = np.zeros((3, model.nv))
    r_b = fk.pos_body
    for j in model.joint_path[foot.link]:
        pos[:, 6 + j] = _cross(data.axis_b[j], r_b - data.origin_b[j])
    rows["pos_body"] = pos
    rows["y_hip_dist"] = pos[1:2, :]
    return rows


def foot_velocity_and_jacobians(model, q, v, side, data=None):
    """World foot linear velocity and its Jacobians w.r.t. (delta, v).

    The velocity is ``J_lin(q) v``; the state Jacobian needs the second-order
    kinematics term d(J v)/d(delta), assembled from the open-chain identities
    (ancestor pairs contract to single cross products).
    Returns (pdot, G_dq, G_dv) with shapes (3,), (3, nv), (3, nv); G_dq is
    w.r.t. a tangent delta anchored at q itself (right-multiply by
    :func:`delta_chain_factor` for other anchors).
    """
    if data is None:
        data = forward_kinematics(model, q)
    foot = model.feet[side]
    path = model.joint_path[foot.link]
    r = data.feet[side].pos_body
    R = data.R_wb
    vlin, omega, thdot = v[0:3], v[3:6], v[6:]

    c = {j: _cross(data.axis_b[j], r - data.origin_b[j]) for j in path}
    u = vlin + _cross(omega, r) + sum((thdot[j] * c[j] for j in path), np.zeros(3))
    pdot = R @ u

    G_dv = np.zeros((3, model.nv))
    G_dv[:, 0:3] = R
    G_dv[:, 3:6] = -R @ skew(r)
    for j in path:
        G_dv[:, 6 + j] = R @ c[j]

    G_dq = np.zeros((3, model.nv))
    G_dq[:, 3:6] = -R @ skew(u)   # base orientation perturbation (local)
    depth = {j: k for k, j in enumerate(path)}
    for j in path:
        col = _cross(omega, c[j])
        for l in path:
            if depth[j] < depth[l]:
                col += thdot[l] * _cross(data.axis_b[j], c[l])
            else:
                col += thdot[l] * _cross(data.axis_b[l], c[j])
        G_dq[:, 6 + j] = R @ col
    return pdot, G_dq, G_dv


def foot_velocity(model, q, v, side, data=None):
    """World foot linear velocity only (cost evaluation fast path)."""
    if data is None:
        data = forward_kinematics(model, q)
    foot = model.feet[side]
    path = model.joint_path[foot.link]
    r = data.feet[side].pos_body
    u = v[0:3] + _cross(v[3:6], r)
    for j in path:
        u = u + v[6 + j] * _cross(data.axis_b[j], r - data.origin_b[j])
    return data.R_wb @ u
