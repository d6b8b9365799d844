"""Stage dynamics, costs and constraints of both phases, with their
Gauss-Newton linearizations.

Node classes wrap the free functions into the uniform interface consumed by
the SQP solver: ``evaluate`` for values and ``linearize`` for the quadratic
cost model, dynamics Jacobians and constraint rows. Hard rows are returned
with absolute bounds; the contact-kinematics rows (foot height in the near
phase, world foot height in the far phase) are soft with an L2 penalty, and
the roll/pitch contact equalities enter the cost directly as contact-gated
quadratic penalties (exact L2 relaxation of an equality).
"""

from dataclasses import dataclass

import numpy as np

from ..rbd import (plus, forward_kinematics, delta_chain_factor,
                   foot_residual_rows, foot_velocity_and_jacobians)
from ..rbd.kinematics import foot_velocity, _cross
from ..rbd.so3 import skew
from .types import SIDES
from .wrench_cone import wrench_cone_rows

NEG_INF = -np.inf
POS_INF = np.inf


# ---------------------------------------------------------------- dynamics

class WbDynamics:
    """Affine near-horizon dynamics blocks, fixed by the frozen terms."""

    def __init__(self, model, ft, dt):
        nv, nj = model.nv, model.nj
        self.nx = 2 * nv
        self.nu = nj + 6 * len(model.feet)
        B_sel = np.vstack([np.zeros((6, nj)), np.eye(nj)])
        U = np.hstack([B_sel] + [ft.J[s].T for s in sorted(ft.J)])
        if not ft.J:
            U = B_sel
        MinvU = ft.minv(U)
        Minv_n = ft.minv(ft.n)
        self.A = np.eye(self.nx)
        self.A[0:nv, nv:] = dt * np.eye(nv)
        self.B = np.vstack([np.zeros((nv, self.nu)), dt * MinvU])
        self.c = np.concatenate([np.zeros(nv), -dt * Minv_n])

    def step(self, x, u):
        return self.A @ x + self.B @ u + self.c


def wb_dynamics(x, u, model, ft, dt):
    """Forward-Euler whole-body step with dynamics frozen at (q0, v0)."""
    return WbDynamics(model, ft, dt).step(x, u)


def srb_dynamics(x, u, ft, dt):
    """Forward-Euler single-rigid-body step; body-frame acceleration."""
    dqb, vb, pl, pr = x[0:6], x[6:12], x[12:15], x[15:18]
    wl, wr = u[0:6], u[6:12]
    dpl, dpr = u[12:15], u[15:18]
    a_lin = (wl[0:3] + wr[0:3]) / ft.mass + ft.R_wb.T @ ft.gravity
    torque = (_cross(pl - ft.p_c, wl[0:3]) + wl[3:6]
              + _cross(pr - ft.p_c, wr[0:3]) + wr[3:6])
    a_ang = ft.I_srb_inv @ torque
    out = np.empty(18)
    out[0:6] = dqb + dt * vb
    out[6:9] = vb[0:3] + dt * a_lin
    out[9:12] = vb[3:6] + dt * a_ang
    out[12:15] = pl + dt * dpl
    out[15:18] = pr + dt * dpr
    return out


def srb_dynamics_jacobians(x, u, ft, dt):
    """A, B of the far-horizon step at the iterate (the lever-arm torque is
    bilinear in foot position and force, so A and B are iterate-dependent)."""
    wl, wr = u[0:6], u[6:12]
    pl, pr = x[12:15], x[15:18]
    A = np.eye(18)
    A[0:6, 6:12] = dt * np.eye(6)
    Iinv = ft.I_srb_inv
    A[9:12, 12:15] = dt * Iinv @ (-skew(wl[0:3]))
    A[9:12, 15:18] = dt * Iinv @ (-skew(wr[0:3]))
    B = np.zeros((18, 18))
    B[6:9, 0:3] = (dt / ft.mass) * np.eye(3)
    B[6:9, 6:9] = (dt / ft.mass) * np.eye(3)
    B[9:12, 0:3] = dt * Iinv @ skew(pl - ft.p_c)
    B[9:12, 3:6] = dt * Iinv
    B[9:12, 6:9] = dt * Iinv @ skew(pr - ft.p_c)
    B[9:12, 9:12] = dt * Iinv
    B[12:15, 12:15] = dt * np.eye(3)
    B[15:18, 15:18] = dt * np.eye(3)
    return A, B


def transition_map(x_wb, model, ft):
    """Project the terminal near-phase state onto the far-phase state."""
    nv = model.nv
    dq, v = x_wb[0:nv], x_wb[nv:]
    q_n = plus(ft.q0, dq)
    data = forward_kinematics(model, q_n)
    out = np.empty(18)
    out[0:6] = dq[0:6]
    out[6:12] = v[0:6]
    out[12:15] = data.feet["left"].pos_body
    out[15:18] = data.feet["right"].pos_body
    return out


def transition_jacobian(model, ft, dq, data=None, T=None):
    """18 x (2 nv) Jacobian of the projection at the iterate."""
    nv = model.nv
    q_n = plus(ft.q0, dq)
    if data is None:
        data = forward_kinematics(model, q_n)
    if T is None:
        T = delta_chain_factor(dq, model.nj)
    A = np.zeros((18, 2 * nv))
    A[0:6, 0:6] = np.eye(6)
    A[6:12, nv:nv + 6] = np.eye(6)
    for i, side in enumerate(SIDES):
        rows = foot_residual_rows(model, q_n, side, data)["pos_body"]
        A[12 + 3 * i:15 + 3 * i, 0:nv] = rows @ T
    return A


# ------------------------------------------------------------ quad builder

class QuadAccumulator:
    """Weighted least-squares accumulation: cost = sum w r^2 (no 1/2)."""

    def __init__(self, nz):
        self.H = np.zeros((nz, nz))
        self.g = np.zeros(nz)
        self.cost = 0.0

    def add(self, r, J, w):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        w = np.broadcast_to(np.asarray(w, dtype=float), r.shape)
        J = np.atleast_2d(J)
        wJ = J * w[:, None]
        self.cost += float(w @ (r * r))
        self.g += 2.0 * (wJ.T @ r)
        self.H += 2.0 * (wJ.T @ J)

    def add_diag(self, r, sl, w):
        """Residual r = z[sl] - ref with identity Jacobian on slice sl."""
        r = np.asarray(r, dtype=float)
        w = np.broadcast_to(np.asarray(w, dtype=float), r.shape)
        self.cost += float(w @ (r * r))
        self.g[sl] += 2.0 * w * r
        idx = np.arange(self.H.shape[0])[sl]
        self.H[idx, idx] += 2.0 * w


@dataclass
class ConstraintBlock:
    vals: np.ndarray
    jac: np.ndarray       # rows over the stage variable z = (x, u)
    lo: np.ndarray
    up: np.ndarray

    @staticmethod
    def empty(nz):
        return ConstraintBlock(np.zeros(0), np.zeros((0, nz)), np.zeros(0), np.zeros(0))

    @staticmethod
    def stack(nz, blocks):
        blocks = [b for b in blocks if b.vals.size]
        if not blocks:
            return ConstraintBlock.empty(nz)
        return ConstraintBlock(
            np.concatenate([b.vals for b in blocks]),
            np.vstack([b.jac for b in blocks]),
            np.concatenate([b.lo for b in blocks]),
            np.concatenate([b.up for b in blocks]))


@dataclass
class NodeLinearization:
    cost: float
    H: np.ndarray
    g: np.ndarray
    hard: ConstraintBlock
    soft: ConstraintBlock
    soft_weight: float
    A: np.ndarray = None
    B: np.ndarray = None
    f_val: np.ndarray = None   # dynamics value at the iterate


def soft_violation_cost(block: ConstraintBlock, weight):
    v = np.maximum(block.lo - block.vals, 0.0) + np.maximum(block.vals - block.up, 0.0)
    return float(weight * (v @ v))


# ------------------------------------------------------------- WB stage

class WbStageNode:
    """One near-horizon stage: full state/input, frozen-dynamics step."""

    kind = "wb"

    def __init__(self, model, ft, dyn: WbDynamics, stage, ref, weights, bounds,
                 is_first=False, next_nx=None):
        self.model, self.ft, self.dyn = model, ft, dyn
        self.stage, self.ref, self.w, self.bounds = stage, ref, weights, bounds
        self.is_first = is_first
        self.nx, self.nu = dyn.nx, dyn.nu
        self.nz = self.nx + self.nu
        nj = model.nj
        self._cone = {s: wrench_cone_rows(model.feet[s].half_length,
                                          model.feet[s].half_width,
                                          model.feet[s].friction) for s in SIDES}
        self._jlim = model.joint_limits()
        self._u_w = weights.wb_input_diag(nj)
        self._x_w = weights.wb_state_diag(nj)

    # --- pieces shared by cost/constraints -------------------------------
    def _fk(self, x):
        nv = self.model.nv
        dq = x[0:nv]
        q_k = plus(self.ft.q0, dq)
        data = forward_kinematics(self.model, q_k)
        T = delta_chain_factor(dq, self.model.nj)
        return q_k, data, T

    def dynamics(self, x, u):
        return self.dyn.step(x, u)

    def cost(self, x, u):
        return self._cost_quad(x, u, want_quad=False)[0]

    def _cost_quad(self, x, u, want_quad=True):
        model, ft, w = self.model, self.ft, self.w
        nv, nj = model.nv, model.nj
        nz = self.nz
        q_k, data, T = self._fk(x)
        acc = QuadAccumulator(nz if want_quad else 1)
        if not want_quad:
            acc = _CostOnly()
        acc.add_diag(x[0:nv] - self.ref.dq_ref, slice(0, nv), self._x_w[0:nv])
        acc.add_diag(x[nv:2 * nv] - self.ref.v_ref, slice(nv, 2 * nv), self._x_w[nv:])
        acc.add_diag(u, slice(2 * nv, nz), self._u_w)

        v = x[nv:2 * nv]
        pen = w.soft_penalty
        for side in SIDES:
            fk = data.feet[side]
            c = self.stage.contact[side]
            rows = foot_residual_rows(model, q_k, side, data)

            def xrow(r):
                out = np.zeros((r.shape[0], nz))
                out[:, 0:nv] = r @ T
                return out

            acc.add([fk.height - self.ref.foot_height[side]], xrow(rows["height"]),
                    [w.foot_height])
            acc.add([fk.roll], xrow(rows["roll"]), [w.foot_roll + pen * c])
            acc.add([fk.pitch], xrow(rows["pitch"]), [w.foot_pitch + pen * c])
            acc.add([fk.yaw_body], xrow(rows["yaw_body"]), [w.foot_yaw])
            acc.add([fk.y_hip_dist], xrow(rows["y_hip_dist"]), [w.foot_hip_y])

            if want_quad:
                pdot, G_dq, G_dv = foot_velocity_and_jacobians(model, q_k, v, side,
                                                               data)
                Jv = np.zeros((3, nz))
                Jv[:, 0:nv] = G_dq @ T
                Jv[:, nv:2 * nv] = G_dv
            else:
                pdot, Jv = foot_velocity(model, q_k, v, side, data), None
            acc.add(pdot - self.ref.foot_vel[side], Jv, self.ref.foot_vel_weight[side])
        if want_quad:
            return acc.cost, acc.H, acc.g
        return acc.cost, None, None

    def constraints(self, x, u):
        """Hard constraint rows (values, Jacobian, lo, up) at (x, u).

        A swing foot's cone plus zero-force schedule bound pin the whole
        wrench to zero; that set is emitted directly as six equality rows,
        which is the same feasible set without a degenerate vertex.
        """
        model, ft = self.model, self.ft
        nv, nj = model.nv, model.nj
        nz = self.nz
        blocks = []
        for i, side in enumerate(SIDES):
            w_sl = slice(2 * nv + nj + 6 * i, 2 * nv + nj + 6 * (i + 1))
            w_side = u[nj + 6 * i: nj + 6 * (i + 1)]
            c = self.stage.contact[side]
            if c:
                F = self._cone[side]
                J = np.zeros((16, nz))
                J[:, w_sl] = F
                blocks.append(ConstraintBlock(F @ w_side, J,
                                              np.full(16, NEG_INF), np.zeros(16)))
                Jf = np.zeros((1, nz))
                Jf[0, 2 * nv + nj + 6 * i + 2] = 1.0
                blocks.append(ConstraintBlock(np.array([w_side[2]]), Jf, np.zeros(1),
                                              np.array([c * self.bounds.fz_max])))
                if not self.is_first:
                    Jns = np.zeros((6, nz))
                    Jns[:, nv:2 * nv] = ft.J[side]
                    blocks.append(ConstraintBlock(ft.J[side] @ x[nv:2 * nv], Jns,
                                                  np.zeros(6), np.zeros(6)))
            else:
                Jw = np.zeros((6, nz))
                Jw[:, w_sl] = np.eye(6)
                blocks.append(ConstraintBlock(w_side.copy(), Jw,
                                              np.zeros(6), np.zeros(6)))
        lo, hi, vmax, tmax = self._jlim
        if not self.is_first:
            Jq = np.zeros((nj, nz))
            Jq[:, 6:nv] = np.eye(nj)
            blocks.append(ConstraintBlock(ft.q0.joints + x[6:nv], Jq, lo, hi))
            Jv = np.zeros((nj, nz))
            Jv[:, nv + 6:2 * nv] = np.eye(nj)
            blocks.append(ConstraintBlock(x[nv + 6:2 * nv], Jv, -vmax, vmax))
        Jt = np.zeros((nj, nz))
        Jt[:, 2 * nv:2 * nv + nj] = np.eye(nj)
        blocks.append(ConstraintBlock(u[0:nj], Jt, -tmax, tmax))
        return ConstraintBlock.stack(nz, blocks)

    def soft_constraints(self, x, u, data=None, T=None):
        if self.is_first:
            return ConstraintBlock.empty(self.nz)
        model = self.model
        nv = model.nv
        if data is None:
            q_k, data, T = self._fk(x)
        else:
            q_k = data.q
        blocks = []
        for side in SIDES:
            c = self.stage.contact[side]
            rows = foot_residual_rows(model, q_k, side, data)["height"]
            J = np.zeros((1, self.nz))
            J[:, 0:nv] = rows @ T
            blocks.append(ConstraintBlock(
                np.array([data.feet[side].height]), J, np.zeros(1),
                np.array([(1 - c) * self.bounds.h_max])))
        return ConstraintBlock.stack(self.nz, blocks)

    def linearize(self, x, u, x_next):
        cost, H, g = self._cost_quad(x, u)
        hard = self.constraints(x, u)
        soft = self.soft_constraints(x, u)
        return NodeLinearization(cost=cost, H=H, g=g, hard=hard, soft=soft,
                                 soft_weight=self.w.soft_penalty,
                                 A=self.dyn.A, B=self.dyn.B,
                                 f_val=self.dyn.step(x, u))


class _CostOnly:
    """Cheap cost-only accumulator (no Jacobians evaluated)."""

    def __init__(self):
        self.cost = 0.0

    def add(self, r, J, w):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        w = np.broadcast_to(np.asarray(w, dtype=float), r.shape)
        self.cost += float(w @ (r * r))

    def add_diag(self, r, sl, w):
        self.add(r, None, w)


# ---------------------------------------------------------- transition node

class TransitionNode:
    """Terminal near-phase node: state-only cost/constraints plus the
    projection onto the far-phase state (absent when n_srb == 0)."""

    kind = "transition"

    def __init__(self, model, ft, stage, ref, weights, bounds, has_successor):
        self.model, self.ft = model, ft
        self.stage, self.ref, self.w, self.bounds = stage, ref, weights, bounds
        self.nx = 2 * model.nv
        self.nu = 0
        self.nz = self.nx
        self.has_successor = has_successor
        self._jlim = model.joint_limits()
        self._x_w = weights.wb_state_diag(model.nj)

    def _fk(self, x):
        nv = self.model.nv
        dq = x[0:nv]
        q_k = plus(self.ft.q0, dq)
        data = forward_kinematics(self.model, q_k)
        return q_k, data, delta_chain_factor(dq, self.model.nj)

    def dynamics(self, x, u=None):
        return transition_map(x, self.model, self.ft)

    def cost(self, x, u=None):
        return self._cost_quad(x, want_quad=False)[0]

    def _cost_quad(self, x, want_quad=True):
        model, w = self.model, self.w
        nv = model.nv
        q_k, data, T = self._fk(x)
        acc = QuadAccumulator(self.nz) if want_quad else _CostOnly()
        acc.add_diag(x[0:nv] - self.ref.dq_ref, slice(0, nv), self._x_w[0:nv])
        acc.add_diag(x[nv:2 * nv] - self.ref.v_ref, slice(nv, 2 * nv), self._x_w[nv:])
        pen = w.soft_penalty
        for side in SIDES:
            fk = data.feet[side]
            c = self.stage.contact[side]
            rows = foot_residual_rows(model, q_k, side, data)

            def xrow(r):
                out = np.zeros((r.shape[0], self.nz))
                out[:, 0:nv] = r @ T
                return out

            acc.add([fk.height - self.ref.foot_height[side]], xrow(rows["height"]),
                    [w.foot_height])
            acc.add([fk.roll], xrow(rows["roll"]), [w.foot_roll + pen * c])
            acc.add([fk.pitch], xrow(rows["pitch"]), [w.foot_pitch + pen * c])
            acc.add([fk.yaw_body], xrow(rows["yaw_body"]), [w.foot_yaw])
            acc.add([fk.y_hip_dist], xrow(rows["y_hip_dist"]), [w.foot_hip_y])
        if want_quad:
            return acc.cost, acc.H, acc.g
        return acc.cost, None, None

    def constraints(self, x, u=None):
        nj = self.model.nj
        nv = self.model.nv
        lo, hi, _, _ = self._jlim
        Jq = np.zeros((nj, self.nz))
        Jq[:, 6:nv] = np.eye(nj)
        return ConstraintBlock(self.ft.q0.joints + x[6:nv], Jq, lo, hi)

    def soft_constraints(self, x, u=None):
        model = self.model
        nv = model.nv
        q_k, data, T = self._fk(x)
        blocks = []
        for side in SIDES:
            c = self.stage.contact[side]
            rows = foot_residual_rows(model, q_k, side, data)["height"]
            J = np.zeros((1, self.nz))
            J[:, 0:nv] = rows @ T
            blocks.append(ConstraintBlock(
                np.array([data.feet[side].height]), J, np.zeros(1),
                np.array([(1 - c) * self.bounds.h_max])))
        return ConstraintBlock.stack(self.nz, blocks)

    def linearize(self, x, u, x_next):
        cost, H, g = self._cost_quad(x)
        hard = self.constraints(x)
        soft = self.soft_constraints(x)
        A = f_val = None
        if self.has_successor:
            nv = self.model.nv
            dq = x[0:nv]
            A = transition_jacobian(self.model, self.ft, dq)
            f_val = transition_map(x, self.model, self.ft)
        return NodeLinearization(cost=cost, H=H, g=g, hard=hard, soft=soft,
                                 soft_weight=self.w.soft_penalty,
                                 A=A, B=np.zeros((18, 0)) if A is not None else None,
                                 f_val=f_val)


# ------------------------------------------------------------- SRB stage

class SrbStageNode:
    kind = "srb"

    def __init__(self, model, ft, stage, ref, weights, bounds, dt, terminal=False):
        self.model, self.ft = model, ft
        self.stage, self.ref, self.w, self.bounds = stage, ref, weights, bounds
        self.dt = dt
        self.terminal = terminal
        self.nx = 18
        self.nu = 0 if terminal else 18
        self.nz = self.nx + self.nu
        self._cone = {s: wrench_cone_rows(model.feet[s].half_length,
                                          model.feet[s].half_width,
                                          model.feet[s].friction) for s in SIDES}

    def dynamics(self, x, u):
        return srb_dynamics(x, u, self.ft, self.dt)

    def _world_z_row(self):
        """[w p_i]_z = p0_z + R0[2] (dq_trans + p_i), affine in the state."""
        return self.ft.R_wb[2, :]

    def cost(self, x, u=None):
        return self._cost_quad(x, u, want_quad=False)[0]

    def _cost_quad(self, x, u, want_quad=True):
        w, ft = self.w, self.ft
        acc = QuadAccumulator(self.nz) if want_quad else _CostOnly()
        acc.add_diag(x[0:6] - self.ref.dqb_ref, slice(0, 6), w.srb_base_diag()[0:6])
        acc.add_diag(x[6:12] - self.ref.vb_ref, slice(6, 12), w.srb_base_diag()[6:12])
        zrow = self._world_z_row()
        p0z = ft.q0.base_pos[2]
        for i, side in enumerate(SIDES):
            sl = slice(12 + 3 * i, 15 + 3 * i)
            acc.add_diag(x[sl] - self.ref.p_ref[side], sl,
                         np.array([w.srb_foot_pos_xy, w.srb_foot_pos_xy, 0.0]))
            wp_z = p0z + zrow @ (x[0:3] + x[sl])
            Jz = np.zeros((1, self.nz))
            Jz[0, 0:3] = zrow
            Jz[0, sl] = zrow
            acc.add([wp_z - self.ref.foot_height[side]], Jz, [w.srb_foot_height])
        if not self.terminal:
            u_w = np.concatenate([np.full(12, w.srb_wrench_reg), np.full(6, w.srb_foot_vel)])
            acc.add_diag(u, slice(18, 36), u_w)
        if want_quad:
            return acc.cost, acc.H, acc.g
        return acc.cost, None, None

    def constraints(self, x, u=None):
        blocks = []
        nz = self.nz
        for i, side in enumerate(SIDES):
            sl = slice(12 + 3 * i, 15 + 3 * i)
            Jp = np.zeros((3, nz))
            Jp[:, sl] = np.eye(3)
            lo, up = self.bounds.foot_box(side)
            blocks.append(ConstraintBlock(x[sl].copy(), Jp, lo, up))
        if not self.terminal:
            for i, side in enumerate(SIDES):
                w_side = u[6 * i:6 * (i + 1)]
                c = self.stage.contact[side]
                if c:
                    F = self._cone[side]
                    J = np.zeros((16, nz))
                    J[:, 18 + 6 * i:18 + 6 * (i + 1)] = F
                    blocks.append(ConstraintBlock(F @ w_side, J,
                                                  np.full(16, NEG_INF), np.zeros(16)))
                    Jf = np.zeros((1, nz))
                    Jf[0, 18 + 6 * i + 2] = 1.0
                    blocks.append(ConstraintBlock(np.array([w_side[2]]), Jf, np.zeros(1),
                                                  np.array([c * self.bounds.fz_max])))
                    Jns = np.zeros((3, nz))
                    Jns[:, 6:9] = np.eye(3)
                    Jns[:, 30 + 3 * i:33 + 3 * i] = np.eye(3)
                    blocks.append(ConstraintBlock(x[6:9] + u[12 + 3 * i:15 + 3 * i],
                                                  Jns, np.zeros(3), np.zeros(3)))
                else:
                    Jw = np.zeros((6, nz))
                    Jw[:, 18 + 6 * i:18 + 6 * (i + 1)] = np.eye(6)
                    blocks.append(ConstraintBlock(w_side.copy(), Jw,
                                                  np.zeros(6), np.zeros(6)))
        return ConstraintBlock.stack(nz, blocks)

    def soft_constraints(self, x, u=None):
        zrow = self._world_z_row()
        p0z = self.ft.q0.base_pos[2]
        blocks = []
        for i, side in enumerate(SIDES):
            sl = slice(12 + 3 * i, 15 + 3 * i)
            c = self.stage.contact[side]
            J = np.zeros((1, self.nz))
            J[0, 0:3] = zrow
            J[0, sl] = zrow
            blocks.append(ConstraintBlock(
                np.array([p0z + zrow @ (x[0:3] + x[sl])]), J, np.zeros(1),
                np.array([(1 - c) * self.bounds.h_max])))
        return ConstraintBlock.stack(self.nz, blocks)

    def linearize(self, x, u, x_next):
        cost, H, g = self._cost_quad(x, u)
        hard = self.constraints(x, u)
        soft = self.soft_constraints(x, u)
        A = B = f_val = None
        if not self.terminal:
            A, B = srb_dynamics_jacobians(x, u, self.ft, self.dt)
            f_val = self.dynamics(x, u)
        return NodeLinearization(cost=cost, H=H, g=g, hard=hard, soft=soft,
                                 soft_weight=self.w.soft_penalty,
                                 A=A, B=B, f_val=f_val)
