"""Independent numerical oracles shared by the test suite.

Everything here deliberately avoids the analytic code paths it is used to
check: finite differences, quaternion-log comparisons, brute-force cone
membership, per-link energy sums, dense QP solves.
"""

import numpy as np

from bipedmpc.rbd import plus, forward_kinematics
from bipedmpc.rbd.so3 import quat_log, quat_mul, quat_conj


def tangent_fd(func, q, nv, h=1e-6):
    """Central finite differences of func(Configuration) w.r.t. the tangent at q.

    func returns an array; the result has shape (*func_shape, nv).
    """
    cols = []
    for i in range(nv):
        e = np.zeros(nv)
        e[i] = h
        hi = np.asarray(func(plus(q, e)), dtype=float)
        lo = np.asarray(func(plus(q, -e)), dtype=float)
        cols.append((hi - lo) / (2 * h))
    return np.stack(cols, axis=-1)


def frame_velocity_fd(model, q, frame, nv, h=1e-6):
    """6 x nv world-aligned frame Jacobian by differentiating FK poses."""

    def pose(qq):
        data = forward_kinematics(model, qq)
        if frame in model.feet:
            fk = data.feet[frame]
            return fk.world_rot, fk.world_pos
        if frame == "base":
            import bipedmpc.rbd.so3 as so3
            return so3.quat_to_rot(qq.base_quat), qq.base_pos
        idx = model.link_index(frame)
        return data.world_link_pose(idx)

    J = np.zeros((6, nv))
    for i in range(nv):
        e = np.zeros(nv)
        e[i] = h
        R1, p1 = pose(plus(q, e))
        R0, p0 = pose(plus(q, -e))
        J[0:3, i] = (p1 - p0) / (2 * h)
        W = R1 @ R0.T  # world-frame relative rotation
        angle_axis = _rot_log(W)
        J[3:6, i] = angle_axis / (2 * h)
    return J


def _rot_log(R):
    tr = np.clip((np.trace(R) - 1) / 2, -1.0, 1.0)
    angle = np.arccos(tr)
    if angle < 1e-9:
        return 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return (angle / (2 * np.sin(angle))) * np.array(
        [R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])


def gradient_fd(func, z, h=1e-6):
    """Central-difference gradient of a scalar function of a flat vector."""
    g = np.zeros_like(z, dtype=float)
    for i in range(len(z)):
        e = np.zeros_like(z, dtype=float)
        e[i] = h
        g[i] = (func(z + e) - func(z - e)) / (2 * h)
    return g


def jacobian_fd(func, z, h=1e-6):
    cols = []
    for i in range(len(z)):
        e = np.zeros_like(z, dtype=float)
        e[i] = h
        cols.append((np.asarray(func(z + e)) - np.asarray(func(z - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def wrench_in_cone_lp(w, X, Y, mu):
    """Brute-force cone membership: does a conic combination of the four
    corner friction-pyramid generators reproduce the wrench?"""
    from scipy.optimize import linprog
    gens = []
    for cx in (X, -X):
        for cy in (Y, -Y):
            for sx in (mu, -mu):
                for sy in (mu, -mu):
                    f = np.array([sx, sy, 1.0])
                    p = np.array([cx, cy, 0.0])
                    gens.append(np.concatenate([f, np.cross(p, f)]))
    G = np.array(gens).T  # 6 x 16
    res = linprog(c=np.zeros(G.shape[1]), A_eq=G, b_eq=w,
                  bounds=[(0, None)] * G.shape[1], method="highs")
    return res.status == 0


def statics_solve(model, q, stance):
    """Least-squares static equilibrium (tau, wrenches) at configuration q.

    Solves B tau - n + sum J^T w = 0 for the stance feet; swing feet get zero
    wrench. Returns (tau, {side: wrench}).
    """
    from bipedmpc.rbd import frame_jacobian, nonlinear_effects
    n = nonlinear_effects(model, q, np.zeros(model.nv))
    data = forward_kinematics(model, q)
    cols = [np.vstack([np.zeros((6, model.nj)), np.eye(model.nj)])]
    for side in stance:
        cols.append(frame_jacobian(model, q, side, data).T)
    A = np.hstack(cols)
    sol, *_ = np.linalg.lstsq(A, n, rcond=None)
    tau = sol[:model.nj]
    wrenches = {}
    for k, side in enumerate(stance):
        wrenches[side] = sol[model.nj + 6 * k: model.nj + 6 * (k + 1)]
    return tau, wrenches


def riccati_lqr(A, B, Q, R, P_end, q_lin, r_lin, p_end, x0, N):
    """Affine discrete-time LQR by backward Riccati recursion (no constraints)."""
    n, m = B.shape
    P, p = P_end.copy(), p_end.copy()
    Ks, ks = [], []
    for _ in range(N):
        H = R + B.T @ P @ B
        K = np.linalg.solve(H, B.T @ P @ A)
        kff = np.linalg.solve(H, r_lin + B.T @ p)
        P_new = Q + A.T @ P @ A - (B.T @ P @ A).T @ K
        p_new = q_lin + A.T @ p - K.T @ (r_lin + B.T @ p)
        Ks.append(K)
        ks.append(kff)
        P, p = (P_new + P_new.T) / 2, p_new
    Ks, ks = Ks[::-1], ks[::-1]
    xs, us = [x0], []
    x = x0
    for k in range(N):
        u = -Ks[k] @ x - ks[k]
        us.append(u)
        x = A @ x + B @ u
        xs.append(x)
    return np.array(xs), np.array(us)


class DenseActiveSetQp:
    """Textbook primal active-set solver for strictly convex dense QPs.

    minimize 0.5 z'Hz + g'z  s.t.  A_eq z = b_eq,  lo <= C z <= up.
    Requires a feasible start; used only as a high-precision reference.
    """

    def __init__(self, H, g, A_eq, b_eq, C, lo, up):
        self.H, self.g = H, g
        self.A_eq, self.b_eq = A_eq, b_eq
        self.C, self.lo, self.up = C, lo, up

    def _working_rows(self, active):
        rows = [self.A_eq] if self.A_eq is not None and len(self.A_eq) else []
        for (i, _s) in active:
            rows.append(self.C[i:i + 1])
        if rows:
            return np.vstack(rows)
        return np.zeros((0, self.H.shape[0]))

    def _independent(self, Aw, row):
        """True if `row` is numerically independent of the working rows."""
        if Aw.shape[0] == 0:
            return True
        coef, res, *_ = np.linalg.lstsq(Aw.T, row, rcond=None)
        r = row - Aw.T @ coef
        return np.linalg.norm(r) > 1e-8 * max(np.linalg.norm(row), 1.0)

    def solve(self, z0, max_iter=1000, tol=1e-10):
        H, g, C = self.H, self.g, self.C
        z = z0.copy()
        m = C.shape[0]
        # working set entries: (row, side) with side -1 lower / +1 upper;
        # rows are only admitted while they keep the working set full rank
        active = []
        for i in range(m):
            r = C[i] @ z
            cand = None
            if self.lo[i] == self.up[i] or abs(r - self.lo[i]) < 1e-9:
                cand = (i, -1)
            elif abs(r - self.up[i]) < 1e-9:
                cand = (i, +1)
            if cand and self._independent(self._working_rows(active), C[i]):
                active.append(cand)

        n_eq = self.A_eq.shape[0] if self.A_eq is not None else 0
        stall = 0
        for _ in range(max_iter):
            Aw = self._working_rows(active)
            nw = Aw.shape[0]
            KKT = np.block([[H, Aw.T], [Aw, np.zeros((nw, nw))]])
            rhs = np.concatenate([-(H @ z + g), np.zeros(nw)])
            sol = np.linalg.solve(KKT, rhs)
            p, lam = sol[:len(z)], sol[len(z):]

            if np.linalg.norm(p, np.inf) < tol:
                # at upper bound the multiplier of +C must be >= 0, at lower <= 0
                worst, worst_idx = 0.0, None
                for k, (i, s) in enumerate(active):
                    if self.lo[i] == self.up[i]:
                        continue  # genuine equality stays active
                    mult = lam[n_eq + k] * (1 if s > 0 else -1)
                    if mult < worst - 1e-12:
                        worst, worst_idx = mult, k
                if worst_idx is None:
                    return z
                active.pop(worst_idx)
                continue

            # largest step keeping feasibility
            alpha, blocker = 1.0, None
            Cz, Cp = C @ z, C @ p
            act = {(i, s) for (i, s) in active}
            for i in range(m):
                if Cp[i] > 1e-14 and (i, +1) not in act and np.isfinite(self.up[i]):
                    a = (self.up[i] - Cz[i]) / Cp[i]
                    if a < alpha - 1e-15:
                        alpha, blocker = a, (i, +1)
                if Cp[i] < -1e-14 and (i, -1) not in act and np.isfinite(self.lo[i]):
                    a = (self.lo[i] - Cz[i]) / Cp[i]
                    if a < alpha - 1e-15:
                        alpha, blocker = a, (i, -1)
            z = z + max(alpha, 0.0) * p
            stall = stall + 1 if alpha < 1e-12 else 0
            if stall > 60:
                raise RuntimeError("active-set reference stalled (degenerate instance)")
            if blocker is not None:
                Aw_cur = self._working_rows(active)
                if self._independent(Aw_cur, C[blocker[0]]):
                    active.append(blocker)
                elif active:
                    # wedged on a dependent blocker: swap out the most
                    # aligned working inequality row, then admit the blocker
                    coef = np.linalg.lstsq(Aw_cur.T, C[blocker[0]], rcond=None)[0]
                    coef = coef[n_eq:]
                    if len(coef):
                        k_out = int(np.argmax(np.abs(coef)))
                        active.pop(k_out)
                        if self._independent(self._working_rows(active),
                                             C[blocker[0]]):
                            active.append(blocker)
        raise RuntimeError("active-set reference did not converge")
