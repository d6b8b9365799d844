"""Problem data containers for the two-phase optimal control problem."""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..rbd import (forward_kinematics, frame_jacobian, mass_matrix,
                   nonlinear_effects, com_and_locked_inertia)

SIDES = ("left", "right")


@dataclass(frozen=True)
class HorizonConfig:
    n_wb: int = 5
    n_srb: int = 5
    dt_wb: float = 0.02
    dt_srb: float = 0.1

    def __post_init__(self):
        if self.n_wb < 1 or self.n_srb < 0:
            raise ValueError("need n_wb >= 1 and n_srb >= 0")
        if self.dt_wb <= 0 or self.dt_srb <= 0:
            raise ValueError("step sizes must be positive")

    @property
    def alpha(self):
        return self.n_wb / (self.n_wb + self.n_srb)

    @property
    def horizon_time(self):
        return self.n_wb * self.dt_wb + self.n_srb * self.dt_srb

    def node_times(self):
        """Start-time offsets of every horizon node (near stages, handover,
        far stages, terminal); the handover node and the first far stage share
        a time instant."""
        t_tr = self.n_wb * self.dt_wb
        wb = [k * self.dt_wb for k in range(self.n_wb)]
        srb = [t_tr + j * self.dt_srb for j in range(self.n_srb)]
        return wb + [t_tr] + srb + [t_tr + self.n_srb * self.dt_srb]

    @classmethod
    def from_alpha(cls, alpha, n_total=10, dt_wb=0.02, dt_srb=0.1):
        n_wb = max(1, int(round(alpha * n_total)))
        return cls(n_wb=n_wb, n_srb=n_total - n_wb, dt_wb=dt_wb, dt_srb=dt_srb)


@dataclass
class Weights:
    """Diagonal cost weights; defaults are the hand-tuned walking set."""

    wb_base_pos: tuple = (0.0, 0.0, 50.0)
    wb_base_ori: tuple = (10.0, 10.0, 1.0)
    wb_joint_pos: float = 1e-8
    wb_base_linvel: tuple = (40.0, 40.0, 10.0)
    wb_base_angvel: tuple = (10.0, 10.0, 1.0)
    wb_joint_vel: float = 0.05
    foot_height: float = 10.0
    foot_roll: float = 30.0
    foot_pitch: float = 30.0
    foot_yaw: float = 60.0
    foot_hip_y: float = 10.0
    foot_vel_swing: tuple = (1.0, 1.0, 1.0)
    foot_vel_approach: tuple = (10.0, 10.0, 30.0)
    torque_reg: float = 1e-13
    wrench_reg: float = 1e-8
    srb_base_pos: tuple = (0.0, 0.0, 50.0)
    srb_base_ori: tuple = (10.0, 10.0, 1.0)
    srb_base_linvel: tuple = (40.0, 40.0, 10.0)
    srb_base_angvel: tuple = (10.0, 10.0, 1.0)
    srb_foot_pos_xy: float = 100.0
    srb_foot_height: float = 10.0
    srb_foot_vel: float = 2.0
    srb_wrench_reg: float = 1e-8
    soft_penalty: float = 1e4

    def wb_state_diag(self, nj):
        return np.concatenate([self.wb_base_pos, self.wb_base_ori,
                               np.full(nj, self.wb_joint_pos),
                               self.wb_base_linvel, self.wb_base_angvel,
                               np.full(nj, self.wb_joint_vel)])

    def wb_input_diag(self, nj):
        return np.concatenate([np.full(nj, self.torque_reg), np.full(12, self.wrench_reg)])

    def srb_base_diag(self):
        return np.concatenate([self.srb_base_pos, self.srb_base_ori,
                               self.srb_base_linvel, self.srb_base_angvel])

    def validate(self):
        import dataclasses
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            arr = np.atleast_1d(np.asarray(v, dtype=float))
            if np.any(arr < 0):
                raise ValueError(f"weight {f.name} must be nonnegative")
        return self


@dataclass
class Bounds:
    fz_max: float = 3.0 * 22.0 * 9.81
    h_max: float = 0.10
    reach_x: float = 0.35
    reach_z_halfspan: float = 0.25
    reach_z_center: float = -0.65
    reach_y_inner: float = 0.02
    reach_y_outer: float = 0.30

    def __post_init__(self):
        if self.fz_max <= 0:
            raise ValueError("fz_max must be positive")

    def foot_box(self, side):
        """Per-foot reachability box (lo, up) in the body frame; the lateral
        bounds are side-dependent so feet cannot swap."""
        lo = np.array([-self.reach_x,
                       self.reach_y_inner if side == "left" else -self.reach_y_outer,
                       self.reach_z_center - self.reach_z_halfspan])
        up = np.array([self.reach_x,
                       self.reach_y_outer if side == "left" else -self.reach_y_inner,
                       self.reach_z_center + self.reach_z_halfspan])
        return lo, up

    @classmethod
    def for_model(cls, model, **kw):
        kw.setdefault("fz_max", 3.0 * model.total_mass * np.linalg.norm(model.gravity))
        return cls(**kw)


@dataclass
class FrozenTerms:
    """Dynamics quantities evaluated once per solve at the measured state."""

    q0: object
    v0: np.ndarray
    M: np.ndarray
    M_chol: object
    n: np.ndarray
    J: dict                 # side -> 6 x nv world-aligned contact Jacobian
    R_wb: np.ndarray        # base-to-world rotation at q0
    I_srb: np.ndarray
    I_srb_inv: np.ndarray
    p_c: np.ndarray
    mass: float
    gravity: np.ndarray     # world-frame gravity acceleration
    data0: object           # KinematicsData at q0

    def minv(self, rhs):
        return cho_solve(self.M_chol, rhs)


def freeze_terms(model, q0, v0) -> FrozenTerms:
    data0 = forward_kinematics(model, q0)
    M = mass_matrix(model, q0)
    try:
        chol = cho_factor(M, lower=True)
    except np.linalg.LinAlgError as e:
        raise ValueError("mass matrix not positive definite (corrupt model?)") from e
    n = nonlinear_effects(model, q0, v0)
    J = {side: frame_jacobian(model, q0, side, data0) for side in model.feet}
    p_c, I, mass = com_and_locked_inertia(model, q0, data0)
    I_inv = np.linalg.inv(I)
    return FrozenTerms(q0=q0, v0=v0, M=M, M_chol=chol, n=n, J=J,
                       R_wb=data0.R_wb, I_srb=I, I_srb_inv=I_inv,
                       p_c=p_c, mass=mass, gravity=model.gravity.copy(), data0=data0)


@dataclass
class WbRef:
    dq_ref: np.ndarray          # (nv,)
    v_ref: np.ndarray           # (nv,)
    foot_height: dict           # side -> m
    foot_vel: dict              # side -> (3,) world frame
    foot_vel_weight: dict       # side -> (3,) swing/approach selection


@dataclass
class SrbRef:
    dqb_ref: np.ndarray         # (6,)
    vb_ref: np.ndarray          # (6,)
    p_ref: dict                 # side -> (3,) body frame
    foot_height: dict           # side -> m (world z)


@dataclass
class ReferenceSet:
    """One entry per horizon node, aligned with the schedule."""

    wb: list                    # WbRef, length n_wb + 1 (stages + handover node)
    srb: list                   # SrbRef, length n_srb + 1 (stages + terminal)
