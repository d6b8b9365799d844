"""Tracking references for both horizon phases."""

import numpy as np

from ..rbd import Configuration, minus
from ..poses import standing_configuration
from .types import ReferenceSet, WbRef, SrbRef, SIDES

_standing_cache = {}


def _standing_joints(model, height):
    key = (id(model), round(height, 9))
    if key not in _standing_cache:
        _standing_cache[key] = standing_configuration(model, height).joints
    return _standing_cache[key]


def build_references(model, params, q0, schedule, config, weights):
    """Per-node references: hold target base height and upright attitude,
    track the target forward speed in body x, follow the swing arcs.

    Base x/y stay untracked (zero weights); the attitude reference restores
    zero roll/pitch/yaw so the controller always has an upright restoring
    term. Joint references are the standing pose.
    """
    joints_ref = _standing_joints(model, params.target_base_height)
    q_ref = Configuration(
        np.array([q0.base_pos[0], q0.base_pos[1], params.target_base_height]),
        np.array([1.0, 0.0, 0.0, 0.0]), joints_ref)
    dq_ref = minus(q_ref, q0)
    v_ref = np.zeros(model.nv)
    v_ref[0] = params.target_velocity

    n_wb_nodes = config.n_wb + 1
    wb_refs = []
    for k in range(n_wb_nodes):
        st = schedule[k]
        foot_vel = {}
        foot_w = {}
        for side in SIDES:
            foot_vel[side] = np.array([0.0, 0.0, st.dheight_ref[side]])
            foot_w[side] = np.array(weights.foot_vel_approach if st.approach[side]
                                    else weights.foot_vel_swing)
        wb_refs.append(WbRef(dq_ref=dq_ref.copy(), v_ref=v_ref.copy(),
                             foot_height=dict(st.height_ref),
                             foot_vel=foot_vel, foot_vel_weight=foot_w))

    hip_y = {side: model.joints[model.foot_hip_joint(side)].origin[1] for side in SIDES}
    p_ref = {side: np.array([0.0, hip_y[side], -params.target_base_height])
             for side in SIDES}
    srb_refs = []
    for j in range(config.n_srb + 1):
        st = schedule[config.n_wb + j]
        srb_refs.append(SrbRef(dqb_ref=dq_ref[0:6].copy(), vb_ref=v_ref[0:6].copy(),
                               p_ref={s: p_ref[s].copy() for s in SIDES},
                               foot_height=dict(st.height_ref)))
    return ReferenceSet(wb=wb_refs, srb=srb_refs)
