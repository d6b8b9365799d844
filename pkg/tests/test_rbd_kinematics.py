import numpy as np
import pytest

from bipedmpc.rbd import (Configuration, plus, minus, forward_kinematics,
                          frame_jacobian, delta_chain_factor, foot_residual_rows,
                          foot_velocity_and_jacobians, neutral_configuration)
from bipedmpc.rbd.so3 import quat_exp, quat_to_rot

from conftest import random_configuration, random_velocity
from oracles import tangent_fd, frame_velocity_fd


def test_plus_identity(model, standing):
    q = plus(standing, np.zeros(model.nv))
    assert np.allclose(q.base_pos, standing.base_pos)
    assert np.allclose(q.base_quat, standing.base_quat)
    assert np.allclose(q.joints, standing.joints)


def test_plus_pure_yaw(model):
    q0 = neutral_configuration(model)
    d = np.zeros(model.nv)
    d[5] = np.pi / 2
    q = plus(q0, d)
    assert np.allclose(q.base_quat, [np.cos(np.pi / 4), 0, 0, np.sin(np.pi / 4)], atol=1e-12)


def test_minus_self_and_translation(model, standing):
    assert np.allclose(minus(standing, standing), 0.0, atol=1e-12)
    q = standing.copy()
    q.base_pos = q.base_pos + np.array([0.3, -0.2, 0.1])
    d = minus(q, standing)
    assert np.allclose(d[0:3], [0.3, -0.2, 0.1], atol=1e-12)  # identity base orientation
    assert np.allclose(d[3:], 0.0, atol=1e-12)


def test_plus_minus_roundtrip(model):
    rng = np.random.default_rng(7)
    for _ in range(100):
        q0 = random_configuration(model, rng)
        d = rng.uniform(-1.0, 1.0, model.nv)
        d[3:6] = rng.uniform(-1, 1, 3) * (2.9 / np.sqrt(3))  # rotation below pi
        q1 = plus(q0, d)
        err = minus(q1, q0) - d
        assert np.linalg.norm(err) <= 1e-9


def test_minus_rejects_pi_rotation(model, standing):
    q = standing.copy()
    q.base_quat = quat_exp(np.array([0, 0, np.pi - 1e-9]))
    with pytest.raises(ValueError):
        minus(q, standing)


def test_fk_base_translation_shifts_world_frames(model, standing):
    d = np.array([1.0, 2.0, 3.0])
    q = standing.copy()
    q.base_pos = q.base_pos + d
    a = forward_kinematics(model, standing)
    b = forward_kinematics(model, q)
    for side in ("left", "right"):
        assert np.allclose(b.feet[side].world_pos - a.feet[side].world_pos, d, atol=1e-12)
        assert np.allclose(b.feet[side].pos_body, a.feet[side].pos_body, atol=1e-12)
        assert b.feet[side].yaw_body == a.feet[side].yaw_body
        assert b.feet[side].height == pytest.approx(a.feet[side].height + 3.0)


def test_fk_single_rigid_body(srb_model):
    q = neutral_configuration(srb_model)
    data = forward_kinematics(srb_model, q)
    assert data.feet == {}
    R, p = data.world_link_pose(0)
    assert np.allclose(R, np.eye(3))
    assert np.allclose(p, 0.0)


def test_srb_base_jacobian_identity(srb_model):
    q = neutral_configuration(srb_model)
    J = frame_jacobian(srb_model, q, "base")
    assert np.allclose(J, np.eye(6))


def test_frame_jacobian_vs_finite_differences(model):
    rng = np.random.default_rng(3)
    for _ in range(20):
        q = random_configuration(model, rng)
        for frame in ("left", "right", "l_shank", "base"):
            J = frame_jacobian(model, q, frame)
            Jfd = frame_velocity_fd(model, q, frame, model.nv)
            assert np.abs(J - Jfd).max() <= 1e-5


def test_frame_jacobian_unknown_frame(model, standing):
    with pytest.raises(Exception):
        frame_jacobian(model, standing, "no_such_frame")


def test_locked_leg_columns_zero(model, standing):
    # joints of the other leg never move a foot
    J = frame_jacobian(model, standing, "left")
    right_cols = [6 + j for j in model.joint_path[model.feet["right"].link]]
    assert np.allclose(J[:, right_cols], 0.0)


def test_foot_residual_rows_vs_fd(model):
    rng = np.random.default_rng(11)
    for _ in range(10):
        q = random_configuration(model, rng)
        data = forward_kinematics(model, q)
        for side in ("left", "right"):
            rows = foot_residual_rows(model, q, side, data)

            def outputs(qq):
                fk = forward_kinematics(model, qq).feet[side]
                return np.array([fk.height, fk.roll, fk.pitch, fk.yaw_body, fk.y_hip_dist])

            fd = tangent_fd(outputs, q, model.nv)
            analytic = np.vstack([rows["height"], rows["roll"], rows["pitch"],
                                  rows["yaw_body"], rows["y_hip_dist"]])
            assert np.abs(analytic - fd).max() <= 1e-5

            fd_pos = tangent_fd(lambda qq: forward_kinematics(model, qq).feet[side].pos_body,
                                q, model.nv)
            assert np.abs(rows["pos_body"] - fd_pos).max() <= 1e-5


def test_delta_chain_factor_vs_fd(model):
    rng = np.random.default_rng(5)
    q0 = random_configuration(model, rng)
    delta = rng.uniform(-0.3, 0.3, model.nv)
    q = plus(q0, delta)
    data = forward_kinematics(model, q)
    T = delta_chain_factor(delta, model.nj)
    rows = foot_residual_rows(model, q, "left", data)

    def height_of_delta(d):
        return np.array([forward_kinematics(model, plus(q0, d)).feet["left"].height])

    from oracles import jacobian_fd
    fd = jacobian_fd(height_of_delta, delta)
    assert np.abs(rows["height"] @ T - fd).max() <= 1e-5


def test_foot_velocity_jacobians_vs_fd(model):
    rng = np.random.default_rng(13)
    for _ in range(10):
        q = random_configuration(model, rng)
        v = random_velocity(model, rng)
        for side in ("left", "right"):
            pdot, G_dq, G_dv = foot_velocity_and_jacobians(model, q, v, side)
            J = frame_jacobian(model, q, side)
            assert np.allclose(pdot, J[0:3] @ v, atol=1e-12)
            assert np.allclose(G_dv, J[0:3], atol=1e-12)

            def vel_of_tangent(qq):
                return frame_jacobian(model, qq, side)[0:3] @ v

            fd = tangent_fd(vel_of_tangent, q, model.nv)
            assert np.abs(G_dq - fd).max() <= 1e-5
