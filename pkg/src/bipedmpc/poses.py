"""Reference poses for the canonical biped."""

import importlib.resources

import numpy as np

from .rbd import Configuration, forward_kinematics


def canonical_model_path():
    """Path to the packaged 12-joint biped model file."""
    return str(importlib.resources.files("bipedmpc").joinpath("data/biped12.rbd"))


def standing_configuration(model, base_height):
    """Symmetric flat-foot standing pose at the given base height.

    Solves the planar hip/knee/ankle pitch closed form per leg (hip pitch
    -a, knee 2a, ankle pitch -a keeps the ankle under the hip and the sole
    level); yaw/roll joints stay zero.
    """
    joints = np.zeros(model.nj)
    for side in ("left", "right"):
        hip = model.joints[model.foot_hip_joint(side)]
        chain = model.joint_path[model.feet[side].link]
        names = [model.joints[j].name for j in chain]
        lengths = [np.linalg.norm(model.joints[j].origin) for j in chain]
        # thigh/shank lengths are the knee and ankle-pitch joint offsets
        thigh = lengths[names.index(next(n for n in names if "knee" in n))]
        shank = lengths[names.index(next(n for n in names if "ankle_pitch" in n))]
        sole = abs(model.feet[side].offset[2])
        drop = base_height - abs(hip.origin[2]) - sole
        reach = thigh + shank
        if not 0 < drop < reach:
            raise ValueError(f"base height {base_height} outside leg reach (max {reach})")
        a = np.arccos(drop / reach)
        for j in chain:
            name = model.joints[j].name
            if "hip_pitch" in name:
                joints[j] = -a
            elif "knee" in name:
                joints[j] = 2 * a
            elif "ankle_pitch" in name:
                joints[j] = -a
    q = Configuration(np.array([0.0, 0.0, base_height]),
                      np.array([1.0, 0.0, 0.0, 0.0]), joints)
    data = forward_kinematics(model, q)
    for side in ("left", "right"):
        if abs(data.feet[side].height) > 1e-6:
            raise RuntimeError(f"standing pose inconsistent: {side} foot at "
                               f"{data.feet[side].height:.2e} m")
    return q
