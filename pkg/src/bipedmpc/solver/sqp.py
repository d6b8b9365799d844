"""Real-time Gauss-Newton SQP over the multi-phase staged problem.

Fixed iteration budget, full steps (no line search), adaptive
Levenberg-Marquardt scaling of the stage Hessians, warm starting at both the
trajectory level (shift) and the QP level (duals). Soft contact-kinematics
rows become per-stage slack pairs in the QP; everything else maps one to one.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .qp import QpStage, MultiPhaseQp, solve_qp, QpError


@dataclass
class SqpSettings:
    max_iterations: int = 3
    lm_init: float = 1e-6
    lm_shrink: float = 0.2
    lm_grow: float = 10.0
    lm_min: float = 1e-8
    lm_max: float = 1e2
    qp_tol: float = 1e-6
    qp_max_iter: int = 25
    qp_polish: bool = False
    warm_start_shift: bool = True
    warm_start_duals: bool = True

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.qp_tol <= 0:
            raise ValueError("qp_tol must be positive")


@dataclass
class SolveStats:
    iterations: int = 0
    wall_times: list = field(default_factory=list)
    total_time: float = 0.0
    cost: float = np.nan
    stat_res: float = np.nan
    feas_res: float = np.nan
    comp_res: float = np.nan
    qp_status: list = field(default_factory=list)
    lm_final: float = np.nan
    degraded: bool = False

    @property
    def kkt_max(self):
        return max(self.stat_res, self.feas_res, self.comp_res)


def cold_start_guess(nlp):
    """References as states; static stance wrenches and torques as inputs."""
    ft = nlp.ft
    model = nlp.model
    nv, nj = model.nv, model.nj
    g_mag = float(np.linalg.norm(ft.gravity))
    traj = []
    for node in nlp.nodes:
        if node.kind == "wb":
            x = np.concatenate([node.ref.dq_ref, node.ref.v_ref])
            stance = [s for s in ("left", "right") if node.stage.contact[s]]
            w = {s: np.zeros(6) for s in ("left", "right")}
            for s in stance:
                w[s][2] = ft.mass * g_mag / len(stance)
            gen = ft.n - sum(ft.J[s].T @ w[s] for s in ("left", "right"))
            tau = gen[6:]
            u = np.concatenate([tau, w["left"], w["right"]])
            traj.append((x, u))
        elif node.kind == "transition":
            x = np.concatenate([node.ref.dq_ref, node.ref.v_ref])
            traj.append((x, np.zeros(0)))
        else:
            x = np.concatenate([node.ref.dqb_ref, node.ref.vb_ref,
                                node.ref.p_ref["left"], node.ref.p_ref["right"]])
            if node.terminal:
                traj.append((x, np.zeros(0)))
            else:
                stance = [s for s in ("left", "right") if node.stage.contact[s]]
                u = np.zeros(18)
                for i, s in enumerate(("left", "right")):
                    if s in stance:
                        fz_body = -0.5 * ft.mass * (ft.R_wb.T @ ft.gravity)
                        u[6 * i:6 * i + 3] = fz_body * (2 / len(stance)) / 2
                traj.append((x, u))
    traj[0] = (nlp.x_init.copy(), traj[0][1])
    return traj


def warm_start_shift(prev, config):
    """Shift the previous solution forward by one near-horizon stage.

    The vacated last near stage takes the previous handover state with the
    last input repeated; far stages shift within their phase with the final
    stage duplicated. Raises ValueError on a structure mismatch (the caller
    falls back to a cold start).
    """
    n_wb, n_srb = config.n_wb, config.n_srb
    expected = n_wb + 1 + n_srb + (1 if n_srb else 0)
    if len(prev) != expected:
        raise ValueError(f"trajectory has {len(prev)} nodes, expected {expected}")
    out = []
    for k in range(n_wb - 1):
        out.append((prev[k + 1][0].copy(), prev[k + 1][1].copy()))
    tr_x = prev[n_wb][0]
    out.append((tr_x.copy(), prev[n_wb - 1][1].copy()))
    out.append((tr_x.copy(), np.zeros(0)))
    if n_srb:
        srb0 = n_wb + 1
        for j in range(n_srb - 1):
            out.append((prev[srb0 + j + 1][0].copy(), prev[srb0 + j + 1][1].copy()))
        out.append((prev[srb0 + n_srb - 1][0].copy(), prev[srb0 + n_srb - 1][1].copy()))
        out.append((prev[-1][0].copy(), prev[-1][1].copy()))
    return out


def _build_qp(nlp, lins, traj, lm):
    stages = []
    for k, (node, lin) in enumerate(zip(nlp.nodes, lins)):
        nx, nu = node.nx, node.nu
        ns = lin.soft.vals.size
        nz = nx + nu + 2 * ns
        H = np.zeros((nz, nz))
        H[:nx + nu, :nx + nu] = lin.H
        H[np.arange(nz), np.arange(nz)] += 2.0 * lm
        if ns:
            sl = np.arange(nx + nu, nz)
            H[sl, sl] += 2.0 * lin.soft_weight
        g = np.zeros(nz)
        g[:nx + nu] = lin.g

        rows, lo, up = [], [], []
        if lin.hard.vals.size:
            C = np.zeros((lin.hard.vals.size, nz))
            C[:, :nx + nu] = lin.hard.jac
            rows.append(C)
            lo.append(lin.hard.lo - lin.hard.vals)
            up.append(lin.hard.up - lin.hard.vals)
        if ns:
            C = np.zeros((ns, nz))
            C[:, :nx + nu] = lin.soft.jac
            C[:, nx + nu:nx + nu + ns] = np.eye(ns)
            C[:, nx + nu + ns:] = -np.eye(ns)
            rows.append(C)
            lo.append(lin.soft.lo - lin.soft.vals)
            up.append(lin.soft.up - lin.soft.vals)
            Cs = np.zeros((2 * ns, nz))
            Cs[:, nx + nu:] = np.eye(2 * ns)
            rows.append(Cs)
            lo.append(np.zeros(2 * ns))
            up.append(np.full(2 * ns, np.inf))
        C = np.vstack(rows) if rows else None
        lo = np.concatenate(lo) if rows else None
        up = np.concatenate(up) if rows else None

        A = B = b = None
        if k < len(nlp.nodes) - 1:
            nxt = nlp.nodes[k + 1].nx
            A = lin.A
            B = np.zeros((nxt, nu + 2 * ns))
            if nu:
                B[:, :nu] = lin.B
            b = lin.f_val - traj[k + 1][0]
        stages.append(QpStage(H=H, g=g, C=C, lo=lo, up=up, A=A, B=B, b=b,
                              nx=nx, nu=nu + 2 * ns))
    return MultiPhaseQp(stages=stages, x0=np.zeros(nlp.nodes[0].nx))


def sqp_solve(nlp, initial_guess, settings: SqpSettings, lm=None, qp_seed=None):
    """Run the fixed budget of Gauss-Newton iterations with full steps.

    Returns (trajectory, stats, qp_solution); the QP solution can seed the
    next solve's duals, and ``lm`` threads the Levenberg-Marquardt scale
    across control ticks. The final iterate is returned unconditionally
    (real-time iteration); a hard QP failure stops early with the last
    successful iterate and the degraded flag set.
    """
    t_start = time.perf_counter()
    traj = [(x.copy(), u.copy()) for x, u in initial_guess]
    traj[0] = (nlp.x_init.copy(), traj[0][1])
    stats = SolveStats()
    lm_val = settings.lm_init if lm is None else lm
    cost_prev = nlp.cost(traj)
    qp_sol = None

    for it in range(settings.max_iterations):
        t0 = time.perf_counter()
        lins = [node.linearize(x, u, None) for node, (x, u) in zip(nlp.nodes, traj)]
        qp = _build_qp(nlp, lins, traj, lm_val)
        seed = None
        if settings.warm_start_duals:
            seed = qp_sol if qp_sol is not None else qp_seed
        try:
            qp_sol = solve_qp(qp, tol=settings.qp_tol,
                              max_iter=settings.qp_max_iter, warm_start=seed,
                              polish=settings.qp_polish)
        except QpError:
            stats.degraded = True
            stats.wall_times.append(time.perf_counter() - t0)
            break
        if not np.all([np.all(np.isfinite(x)) for x in qp_sol.xs]):
            stats.degraded = True
            stats.wall_times.append(time.perf_counter() - t0)
            break
        new_traj = []
        for k, node in enumerate(nlp.nodes):
            x, u = traj[k]
            du = qp_sol.us[k][:node.nu] if node.nu else np.zeros(0)
            new_traj.append((x + qp_sol.xs[k], u + du))
        traj = new_traj
        stats.qp_status.append(qp_sol.status)
        cost_new = nlp.cost(traj)
        if cost_new < cost_prev:
            lm_val = max(lm_val * settings.lm_shrink, settings.lm_min)
        else:
            lm_val = min(lm_val * settings.lm_grow, settings.lm_max)
        cost_prev = cost_new
        stats.iterations += 1
        stats.wall_times.append(time.perf_counter() - t0)

    stats.cost = nlp.cost(traj)
    stats.lm_final = lm_val
    if qp_sol is not None:
        stats.stat_res = qp_sol.stat_res
        stats.comp_res = qp_sol.comp_res
    stats.feas_res = nlp.constraint_violation(traj)
    stats.total_time = time.perf_counter() - t_start
    return traj, stats, qp_sol
