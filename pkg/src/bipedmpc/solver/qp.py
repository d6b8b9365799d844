"""Stage-structured convex QP solver.

Architecture:

* general rows with ``lo == up`` are equality constraints; they carry no
  complementarity condition and are handled by an outer augmented-Lagrangian
  loop (stiff quadratic term folded into the stage cost, multiplier update
  per round), which keeps them out of the barrier where they would degenerate;
* genuine inequality rows go through a primal-dual interior point with
  per-side slacks, infeasible start, fixed 0.995 fraction-to-boundary rule
  and adaptive centering (no predictor-corrector);
* each Newton step is solved by a backward Riccati recursion over the stages,
  so cost per iteration is linear in the horizon length and no dense
  full-horizon matrix is ever formed; one iterative-refinement pass recovers
  the digits lost to large barrier weights near convergence.

The first state is fixed (``x0``); stage k owns the dynamics equality that
produces state k+1, and state dimensions may change across stages (the
handover between horizon phases is just a rectangular A matrix).
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

# Stiffness of the augmented-Lagrangian term for equality rows. The dual
# update of a QP converges in one round, so a moderate value keeps the
# stationarity roundoff floor (~rho * eps) far below practical tolerances;
# rho escalates when an ill-conditioned equality block stalls the update.
_AL_RHO = 1e6
_AL_ROUNDS = 12


@dataclass
class QpStage:
    """One stage: cost 0.5 z'Hz + g'z over z=(x,u), rows lo <= Cz <= up
    (lo == up marks an equality), and dynamics x+ = A x + B u + b for every
    stage but the last."""

    H: np.ndarray
    g: np.ndarray
    C: np.ndarray = None
    lo: np.ndarray = None
    up: np.ndarray = None
    A: np.ndarray = None
    B: np.ndarray = None
    b: np.ndarray = None
    nx: int = 0
    nu: int = 0

    def __post_init__(self):
        nz = self.H.shape[0]
        if self.nx + self.nu != nz:
            raise ValueError("nx + nu must match the Hessian dimension")
        if self.C is None:
            self.C = np.zeros((0, nz))
            self.lo = np.zeros(0)
            self.up = np.zeros(0)


@dataclass
class MultiPhaseQp:
    stages: list
    x0: np.ndarray

    def check(self):
        for k, st in enumerate(self.stages[:-1]):
            nxt = self.stages[k + 1].nx
            if st.A is None or st.A.shape != (nxt, st.nx) or st.B.shape != (nxt, st.nu):
                raise ValueError(f"stage {k}: dynamics blocks missing or mis-sized")
        if len(self.x0) != self.stages[0].nx:
            raise ValueError("x0 dimension mismatch")
        return self


@dataclass
class QpSolution:
    xs: list
    us: list
    pis: list                 # dynamics multipliers
    lam_lo: list              # inequality-row duals (compact, per finite side)
    lam_up: list
    slack_lo: list
    slack_up: list
    lam_eq: list              # equality-row multipliers
    iterations: int
    status: str               # "optimal" | "max_iter"
    stat_res: float
    feas_res: float
    comp_res: float

    @property
    def converged(self):
        return self.status == "optimal"


class QpError(Exception):
    pass


def _chol_jittered(Rp):
    """Cholesky with escalating diagonal jitter; raises only if hopeless."""
    n = Rp.shape[0]
    if not np.all(np.isfinite(Rp)):
        raise LinAlgError("non-finite Hessian block")
    scale = max(float(np.trace(Rp)) / n, 1.0)
    for jit in (0.0, 1e-12, 1e-9, 1e-6, 1e-3):
        try:
            return cho_factor(Rp + jit * scale * np.eye(n), lower=True, check_finite=False)
        except LinAlgError:
            continue
    raise LinAlgError("stage Hessian block not factorizable")


class _Work:
    """Per-solve constant data: row split, AL-augmented Hessians."""

    def __init__(self, qp, rho):
        self.qp = qp
        self.rho = rho
        self.eq_idx, self.in_idx = [], []
        self.Ceq, self.beq = [], []
        self.Cin, self.lo, self.up = [], [], []
        self.idx_lo, self.idx_up = [], []
        self.H_aug = []
        for st in qp.stages:
            eq = np.where(np.isfinite(st.lo) & (st.lo == st.up))[0]
            ineq = np.setdiff1d(np.arange(st.C.shape[0]), eq)
            self.eq_idx.append(eq)
            self.in_idx.append(ineq)
            Ceq = st.C[eq]
            self.Ceq.append(Ceq)
            self.beq.append(st.up[eq])
            self.Cin.append(st.C[ineq])
            lo, up = st.lo[ineq], st.up[ineq]
            self.lo.append(lo)
            self.up.append(up)
            self.idx_lo.append(np.where(np.isfinite(lo))[0])
            self.idx_up.append(np.where(np.isfinite(up))[0])
            self.H_aug.append(st.H + rho * Ceq.T @ Ceq if len(eq) else st.H)

    def stat_grad(self, k, z, y):
        """Stable AL stationarity gradient: the equality term is assembled
        from the small residual Ceq z - beq, avoiding the cancellation of
        two O(rho) terms that otherwise floors stationarity at rho*eps."""
        st = self.qp.stages[k]
        if not len(self.eq_idx[k]):
            return st.H @ z + st.g
        r = self.Ceq[k] @ z - self.beq[k]
        return st.H @ z + st.g + self.Ceq[k].T @ (y + self.rho * r)


def solve_qp(qp: MultiPhaseQp, tol=1e-6, max_iter=100, warm_start=None,
             sigma=None, ftb=0.995, rho=_AL_RHO, polish=True):
    """Solve the stage QP so that stationarity, primal feasibility and
    complementarity infinity-norms all reach ``tol``.

    ``warm_start`` may carry a previous :class:`QpSolution`; primals,
    dynamics/equality multipliers and barrier variables all reseed.
    """
    work = _Work(qp, rho)
    stages = qp.stages
    ys = [np.zeros(len(e)) for e in work.eq_idx]
    state = None
    if warm_start is not None and warm_start.lam_eq is not None:
        for k in range(len(stages)):
            if warm_start.lam_eq[k].shape == ys[k].shape:
                ys[k] = warm_start.lam_eq[k].copy()

    iterations = 0
    best = None
    prev_eq = np.inf
    for round_ in range(_AL_ROUNDS):
        state, iters = _ipm_solve(work, ys, tol, max_iter - iterations,
                                  warm_start if round_ == 0 else state,
                                  sigma, ftb)
        iterations += iters
        xs, us = state.xs, state.us
        # multiplier update and convergence check on the original KKT
        feas_eq = 0.0
        for k in range(len(stages)):
            if not len(work.eq_idx[k]):
                continue
            r = work.Ceq[k] @ np.concatenate([xs[k], us[k]]) - work.beq[k]
            ys[k] = ys[k] + work.rho * r
            feas_eq = max(feas_eq, float(np.abs(r).max(initial=0.0)))
        score = max(state.stat_res, max(state.feas_res, feas_eq), state.comp_res)
        if np.isfinite(score) and (best is None or score < best[0]):
            best = (score, state, [y.copy() for y in ys], feas_eq)
        if score <= tol or iterations >= max_iter:
            break
        if feas_eq > tol and feas_eq > 0.25 * prev_eq and work.rho < 1e12:
            work = _Work(qp, work.rho * 100.0)  # equality block stalling
        prev_eq = feas_eq
    if best is None:
        best = (np.inf, state, [y.copy() for y in ys], np.inf)
    score, state, ys, feas_eq = best
    status = "optimal" if score <= tol else "max_iter"
    if status == "optimal" and polish:
        state, ys = _polish(work, state, ys, tol)
    return QpSolution(xs=state.xs, us=state.us, pis=state.pis,
                      lam_lo=state.lam_lo, lam_up=state.lam_up,
                      slack_lo=state.slack_lo, slack_up=state.slack_up,
                      lam_eq=ys, iterations=iterations, status=status,
                      stat_res=state.stat_res,
                      feas_res=max(state.feas_res, feas_eq),
                      comp_res=state.comp_res)


def _polish(work, state, ys, tol):
    """Refine the solution on the active set identified by the barrier.

    Pinned inequality rows join the equality rows; a rank-revealing QR keeps
    each stage's pin block independent (dependent pins are redundant and slow
    the multiplier iteration). The equality-pinned problem is solved by
    stiff-penalty multiplier rounds over the same Riccati recursion, then the
    pin set is corrected: violated rows join, wrong-signed pins are released.
    Falls back to the barrier point unless the refined point is cleanly
    feasible.
    """
    from scipy.linalg import qr as _qr
    qp = work.qp
    stages = qp.stages
    N = len(stages) - 1
    ns = len(stages)
    # stiffer than the outer loop (faster multiplier contraction) while the
    # stationarity roundoff floor rho*eps stays below usable tolerances
    rho = max(work.rho, 1e7)
    pin_lo = [set(work.idx_lo[k][state.lam_lo[k] > state.slack_lo[k]])
              for k in range(ns)]
    pin_up = [set(work.idx_up[k][state.lam_up[k] > state.slack_up[k]])
              for k in range(ns)]

    xs = us = pis = y = tags = None
    for _round in range(6):
        E, e, H_p, tags = [], [], [], []
        for k, st in enumerate(stages):
            Cin = work.Cin[k]
            rows, rhs, tag = [], [], []
            for j in range(len(work.beq[k])):
                rows.append(work.Ceq[k][j])
                rhs.append(work.beq[k][j])
                tag.append(("eq", j))
            for i in sorted(pin_lo[k]):
                rows.append(Cin[i])
                rhs.append(work.lo[k][i])
                tag.append(("lo", i))
            for i in sorted(pin_up[k]):
                rows.append(Cin[i])
                rhs.append(work.up[k][i])
                tag.append(("up", i))
            if rows:
                Ek = np.array(rows)
                ek = np.array(rhs)
                if Ek.shape[0] > 1:
                    # keep an independent subset of pin rows (consistent
                    # because every pinned row is tight at the optimum)
                    r_diag = _qr(Ek.T, mode="r", pivoting=True)
                    Rm, piv = r_diag[0], r_diag[1]
                    d = np.abs(np.diag(Rm))
                    rank = int(np.sum(d > 1e-9 * max(d[0], 1.0))) if len(d) else 0
                    keep = np.sort(piv[:rank])
                    Ek, ek = Ek[keep], ek[keep]
                    tag = [tag[i] for i in keep]
            else:
                Ek = np.zeros((0, st.nx + st.nu))
                ek = np.zeros(0)
            E.append(Ek)
            e.append(ek)
            tags.append(tag)
            H_p.append(st.H + rho * Ek.T @ Ek if Ek.shape[0] else st.H)

        xs = [x.copy() for x in state.xs]
        us = [u.copy() for u in state.us]
        pis = [p.copy() for p in state.pis]
        y = [np.zeros(len(ek)) for ek in e]
        ok = True
        for _inner in range(6):
            gb, rd = [], []
            for k, st in enumerate(stages):
                z = np.concatenate([xs[k], us[k]])
                g = st.H @ z + st.g
                if E[k].shape[0]:
                    g = g + E[k].T @ (y[k] + rho * (E[k] @ z - e[k]))
                if k < N:
                    g += np.concatenate([st.A.T @ pis[k], st.B.T @ pis[k]])
                    rd.append(st.A @ xs[k] + st.B @ us[k] + st.b - xs[k + 1])
                if k > 0:
                    g[:st.nx] -= pis[k - 1]
                gb.append(g)
            try:
                dxs, dus, dpis, _rc = _riccati_newton(stages, H_p, gb, rd)
            except (LinAlgError, ValueError):
                ok = False
                break
            for k in range(ns):
                if k > 0:
                    xs[k] += dxs[k]
                us[k] += dus[k]
            for k in range(N):
                pis[k] += dpis[k]
            worst = 0.0
            for k in range(ns):
                if E[k].shape[0]:
                    r = E[k] @ np.concatenate([xs[k], us[k]]) - e[k]
                    y[k] = y[k] + rho * r
                    worst = max(worst, np.abs(r).max(initial=0.0))
            if worst < 1e-13:
                break
        if not ok:
            return state, ys

        # correct the pin sets: add violated rows, release wrong-signed pins
        changed = False
        for k in range(ns):
            z = np.concatenate([xs[k], us[k]])
            cz = work.Cin[k] @ z
            for i in work.idx_lo[k]:
                if i not in pin_lo[k] and cz[i] < work.lo[k][i] - 1e-12:
                    pin_lo[k].add(int(i))
                    changed = True
            for i in work.idx_up[k]:
                if i not in pin_up[k] and cz[i] > work.up[k][i] + 1e-12:
                    pin_up[k].add(int(i))
                    changed = True
            for (kind, i), mult in zip(tags[k], y[k]):
                if kind == "lo" and mult > 1e-9:
                    pin_lo[k].discard(i)
                    changed = True
                elif kind == "up" and mult < -1e-9:
                    pin_up[k].discard(i)
                    changed = True
        if not changed:
            break
    else:
        return state, ys

    # validate feasibility of the refined point on every original row
    thresh = min(tol, 1e-8)
    for k in range(ns):
        z = np.concatenate([xs[k], us[k]])
        cz = work.Cin[k] @ z
        lo_v = (work.lo[k][work.idx_lo[k]] - cz[work.idx_lo[k]]).max(initial=0.0)
        up_v = (cz[work.idx_up[k]] - work.up[k][work.idx_up[k]]).max(initial=0.0)
        eq_v = np.abs(work.Ceq[k] @ z - work.beq[k]).max(initial=0.0)
        if max(lo_v, up_v, eq_v) > thresh:
            return state, ys

    new = _ipm_state(xs, us, pis, state.lam_lo, state.lam_up,
                     state.slack_lo, state.slack_up,
                     state.stat_res, state.feas_res, state.comp_res)
    ny = [np.zeros(len(b)) for b in work.beq]
    for k in range(ns):
        lam_lo = np.zeros(len(work.idx_lo[k]))
        lam_up = np.zeros(len(work.idx_up[k]))
        pos_lo = {int(i): j for j, i in enumerate(work.idx_lo[k])}
        pos_up = {int(i): j for j, i in enumerate(work.idx_up[k])}
        for (kind, i), mult in zip(tags[k], y[k]):
            if kind == "eq":
                ny[k][i] = mult
            elif kind == "lo":
                lam_lo[pos_lo[i]] = max(-mult, 0.0)
            else:
                lam_up[pos_up[i]] = max(mult, 0.0)
        z = np.concatenate([xs[k], us[k]])
        cz = work.Cin[k] @ z
        new.lam_lo[k] = lam_lo
        new.lam_up[k] = lam_up
        new.slack_lo[k] = cz[work.idx_lo[k]] - work.lo[k][work.idx_lo[k]]
        new.slack_up[k] = work.up[k][work.idx_up[k]] - cz[work.idx_up[k]]

    # adopt the refined point only if its true KKT residuals stay within the
    # requested tolerance (or at least do not degrade the barrier point)
    stat, feas, comp = _true_residuals(work, new, ny)
    pre = max(state.stat_res, state.feas_res, state.comp_res)
    if max(stat, feas, comp) > max(pre, tol):
        return state, ys
    new.stat_res, new.feas_res, new.comp_res = stat, feas, comp
    return new, ny


def _true_residuals(work, st8, ys):
    """KKT residuals of the original problem at an explicit primal-dual point."""
    stages = work.qp.stages
    N = len(stages) - 1
    xs, us, pis = st8.xs, st8.us, st8.pis
    stat = feas = comp = 0.0
    for k, st in enumerate(stages):
        z = np.concatenate([xs[k], us[k]])
        Cin = work.Cin[k]
        cz = Cin @ z
        rstat = st.H @ z + st.g
        lam_full = np.zeros(Cin.shape[0])
        lam_full[work.idx_up[k]] += st8.lam_up[k]
        lam_full[work.idx_lo[k]] -= st8.lam_lo[k]
        rstat += Cin.T @ lam_full
        if len(work.beq[k]):
            rstat += work.Ceq[k].T @ ys[k]
            feas = max(feas, np.abs(work.Ceq[k] @ z - work.beq[k]).max(initial=0.0))
        if k < N:
            rstat += np.concatenate([st.A.T @ pis[k], st.B.T @ pis[k]])
            feas = max(feas, np.abs(st.A @ xs[k] + st.B @ us[k] + st.b
                                    - xs[k + 1]).max(initial=0.0))
        if k > 0:
            rstat[:st.nx] -= pis[k - 1]
        else:
            rstat = rstat[st.nx:]
        if rstat.size:
            stat = max(stat, np.abs(rstat).max())
        if len(work.idx_lo[k]):
            gap = cz[work.idx_lo[k]] - work.lo[k][work.idx_lo[k]]
            feas = max(feas, (-gap).max(initial=0.0))
            comp = max(comp, np.abs(gap * st8.lam_lo[k]).max(initial=0.0))
        if len(work.idx_up[k]):
            gap = work.up[k][work.idx_up[k]] - cz[work.idx_up[k]]
            feas = max(feas, (-gap).max(initial=0.0))
            comp = max(comp, np.abs(gap * st8.lam_up[k]).max(initial=0.0))
    return stat, feas, comp


@dataclass
class _IpmState:
    xs: list
    us: list
    pis: list
    lam_lo: list
    lam_up: list
    slack_lo: list
    slack_up: list
    stat_res: float
    feas_res: float
    comp_res: float


def _ipm_solve(work, ys, tol, max_iter, seed, sigma, ftb):
    qp = work.qp
    stages = qp.stages
    N = len(stages) - 1
    xs = [qp.x0.copy()] + [np.zeros(st.nx) for st in stages[1:]]
    us = [np.zeros(st.nu) for st in stages]
    pis = [np.zeros(stages[k + 1].nx) for k in range(N)]
    if seed is not None:
        for k in range(len(stages)):
            if seed.xs[k].shape == xs[k].shape and k > 0:
                xs[k] = seed.xs[k].copy()
            if seed.us[k].shape == us[k].shape:
                us[k] = seed.us[k].copy()
        for k in range(N):
            if seed.pis[k].shape == pis[k].shape:
                pis[k] = seed.pis[k].copy()

    idx_lo, idx_up = work.idx_lo, work.idx_up
    s_lo, s_up, l_lo, l_up = [], [], [], []
    for k in range(len(stages)):
        z = np.concatenate([xs[k], us[k]])
        cz = work.Cin[k] @ z
        s_lo.append(np.maximum(cz[idx_lo[k]] - work.lo[k][idx_lo[k]], 0.1))
        s_up.append(np.maximum(work.up[k][idx_up[k]] - cz[idx_up[k]], 0.1))
        l_lo.append(np.full(len(idx_lo[k]), 1.0))
        l_up.append(np.full(len(idx_up[k]), 1.0))
    if seed is not None and getattr(seed, "slack_lo", None) is not None:
        for k in range(len(stages)):
            if len(seed.slack_lo[k]) == len(s_lo[k]) and len(s_lo[k]):
                s_lo[k] = np.maximum(seed.slack_lo[k], 1e-4)
                l_lo[k] = np.maximum(seed.lam_lo[k], 1e-4)
            if len(seed.slack_up[k]) == len(s_up[k]) and len(s_up[k]):
                s_up[k] = np.maximum(seed.slack_up[k], 1e-4)
                l_up[k] = np.maximum(seed.lam_up[k], 1e-4)

    n_comp = sum(map(len, s_lo)) + sum(map(len, s_up))
    best = None
    alpha_last = 0.0

    it = 0
    for it in range(1, max_iter + 1):
        # ---- one fused pass: residual measure + Newton assembly ---------
        stat = feas = comp = 0.0
        mu_total = 0.0
        sig = sigma if sigma is not None else min(0.5, max(0.05, (1 - alpha_last) ** 3))
        Hbar, gbar, r_dyn = [], [], []
        cache = []
        for k, st in enumerate(stages):
            z = np.concatenate([xs[k], us[k]])
            Cin = work.Cin[k]
            cz = Cin @ z
            rstat = work.stat_grad(k, z, ys[k])
            lam_full = np.zeros(Cin.shape[0])
            lam_full[idx_up[k]] += l_up[k]
            lam_full[idx_lo[k]] -= l_lo[k]
            rstat += Cin.T @ lam_full
            if k < N:
                rstat += np.concatenate([st.A.T @ pis[k], st.B.T @ pis[k]])
                rd = st.A @ xs[k] + st.B @ us[k] + st.b - xs[k + 1]
                r_dyn.append(rd)
                feas = max(feas, np.abs(rd).max(initial=0.0))
            if k > 0:
                rstat[:st.nx] -= pis[k - 1]
                smax = np.abs(rstat).max(initial=0.0)
            else:
                smax = np.abs(rstat[st.nx:]).max(initial=0.0)
            stat = max(stat, smax)

            r_l = rc_l = r_u = rc_u = None
            if len(idx_lo[k]):
                gap = cz[idx_lo[k]] - work.lo[k][idx_lo[k]]
                feas = max(feas, (-gap).max(initial=0.0))
                comp = max(comp, np.abs(gap * l_lo[k]).max(initial=0.0))
                mu_total += float(s_lo[k] @ l_lo[k])
                r_l = gap - s_lo[k]
            if len(idx_up[k]):
                gap = work.up[k][idx_up[k]] - cz[idx_up[k]]
                feas = max(feas, (-gap).max(initial=0.0))
                comp = max(comp, np.abs(gap * l_up[k]).max(initial=0.0))
                mu_total += float(s_up[k] @ l_up[k])
                r_u = s_up[k] - gap
            cache.append((rstat, r_l, r_u))
        mu = mu_total / n_comp if n_comp else 0.0
        target = sig * mu if n_comp else 0.0

        score = max(stat, feas, comp)
        if not np.isfinite(score):
            break
        if score <= tol:
            return _ipm_state(xs, us, pis, l_lo, l_up, s_lo, s_up,
                              stat, feas, comp), it
        if best is None or score < best[0]:
            best = (score, [x.copy() for x in xs], [u.copy() for u in us],
                    [p.copy() for p in pis], stat, feas, comp)

        rcs = []
        for k, st in enumerate(stages):
            rstat, r_l, r_u = cache[k]
            Cin = work.Cin[k]
            W = np.zeros(Cin.shape[0])
            vv = np.zeros(Cin.shape[0])
            rc_l = rc_u = None
            if r_l is not None:
                rc_l = s_lo[k] * l_lo[k] - target
                W[idx_lo[k]] += l_lo[k] / s_lo[k]
                vv[idx_lo[k]] += (l_lo[k] * r_l + rc_l) / s_lo[k]
            if r_u is not None:
                rc_u = s_up[k] * l_up[k] - target
                W[idx_up[k]] += l_up[k] / s_up[k]
                vv[idx_up[k]] += (l_up[k] * r_u - rc_u) / s_up[k]
            Hbar.append(work.H_aug[k] + (Cin.T * W) @ Cin)
            gbar.append(rstat + Cin.T @ vv)
            rcs.append((rc_l, rc_u))

        try:
            dxs, dus, dpis, rcache = _riccati_newton(stages, Hbar, gbar, r_dyn)
            if score < 1e-3:
                dxs, dus, dpis = _refine_newton(stages, Hbar, gbar, r_dyn,
                                                dxs, dus, dpis, rcache)
        except (LinAlgError, ValueError) as e:
            if best is not None:
                break
            raise QpError(f"stage Hessian not positive definite: {e}") from e

        alpha_p, alpha_d = 1.0, 1.0
        steps = []
        for k in range(len(stages)):
            Cin = work.Cin[k]
            _rstat, r_l, r_u = cache[k]
            rc_l, rc_u = rcs[k]
            cdz = Cin @ np.concatenate([dxs[k], dus[k]])
            ds_l = dl_l = ds_u = dl_u = None
            if r_l is not None:
                ds_l = cdz[idx_lo[k]] + r_l
                dl_l = -(rc_l + l_lo[k] * ds_l) / s_lo[k]
                alpha_p = min(alpha_p, _ftb_alpha(s_lo[k], ds_l, ftb))
                alpha_d = min(alpha_d, _ftb_alpha(l_lo[k], dl_l, ftb))
            if r_u is not None:
                ds_u = -cdz[idx_up[k]] - r_u
                dl_u = -(rc_u + l_up[k] * ds_u) / s_up[k]
                alpha_p = min(alpha_p, _ftb_alpha(s_up[k], ds_u, ftb))
                alpha_d = min(alpha_d, _ftb_alpha(l_up[k], dl_u, ftb))
            steps.append((ds_l, dl_l, ds_u, dl_u))

        for k in range(len(stages)):
            if k > 0:
                xs[k] += alpha_p * dxs[k]
            us[k] += alpha_p * dus[k]
            ds_l, dl_l, ds_u, dl_u = steps[k]
            if ds_l is not None:
                s_lo[k] = np.maximum(s_lo[k] + alpha_p * ds_l, 1e-300)
                l_lo[k] += alpha_d * dl_l
            if ds_u is not None:
                s_up[k] = np.maximum(s_up[k] + alpha_p * ds_u, 1e-300)
                l_up[k] += alpha_d * dl_u
        for k in range(N):
            pis[k] += alpha_d * dpis[k]
        alpha_last = min(alpha_p, alpha_d)

    stat, feas, comp, _ = _residuals(work, ys, xs, us, pis, l_lo, l_up, s_lo, s_up)
    if not np.isfinite(stat + feas + comp) or (best is not None
                                               and best[0] < max(stat, feas, comp)):
        if best is not None:
            _, xs, us, pis, stat, feas, comp = best
    return _ipm_state(xs, us, pis, l_lo, l_up, s_lo, s_up, stat, feas, comp), it


def _ipm_state(xs, us, pis, l_lo, l_up, s_lo, s_up, stat, feas, comp):
    return _IpmState(xs=[x.copy() for x in xs], us=[u.copy() for u in us],
                     pis=[p.copy() for p in pis],
                     lam_lo=[l.copy() for l in l_lo], lam_up=[l.copy() for l in l_up],
                     slack_lo=[s.copy() for s in s_lo], slack_up=[s.copy() for s in s_up],
                     stat_res=stat, feas_res=feas, comp_res=comp)


def _ftb_alpha(vals, dirs, ftb):
    neg = dirs < 0
    if not np.any(neg):
        return 1.0
    return min(1.0, ftb * np.min(-vals[neg] / dirs[neg]))


def _residuals(work, ys, xs, us, pis, l_lo, l_up, s_lo, s_up):
    """KKT residuals of the AL-augmented problem (equality rows enter the
    stationarity through the current multiplier estimate)."""
    stages = work.qp.stages
    idx_lo, idx_up = work.idx_lo, work.idx_up
    N = len(stages) - 1
    stat = feas = comp = 0.0
    total, n_comp = 0.0, 0
    for k, st in enumerate(stages):
        z = np.concatenate([xs[k], us[k]])
        Cin = work.Cin[k]
        cz = Cin @ z
        rstat = work.stat_grad(k, z, ys[k])
        lam_full = np.zeros(Cin.shape[0])
        lam_full[idx_up[k]] += l_up[k]
        lam_full[idx_lo[k]] -= l_lo[k]
        rstat += Cin.T @ lam_full
        if k < N:
            rstat += np.concatenate([st.A.T @ pis[k], st.B.T @ pis[k]])
            feas = max(feas, np.abs(st.A @ xs[k] + st.B @ us[k] + st.b
                                    - xs[k + 1]).max(initial=0.0))
        if k > 0:
            rstat[:st.nx] -= pis[k - 1]
        else:
            rstat = rstat[st.nx:]
        if rstat.size:
            stat = max(stat, np.abs(rstat).max())
        if len(idx_lo[k]):
            gap = cz[idx_lo[k]] - work.lo[k][idx_lo[k]]
            feas = max(feas, (-gap).max(initial=0.0))
            comp = max(comp, np.abs(gap * l_lo[k]).max(initial=0.0))
            total += float(s_lo[k] @ l_lo[k])
            n_comp += len(s_lo[k])
        if len(idx_up[k]):
            gap = work.up[k][idx_up[k]] - cz[idx_up[k]]
            feas = max(feas, (-gap).max(initial=0.0))
            comp = max(comp, np.abs(gap * l_up[k]).max(initial=0.0))
            total += float(s_up[k] @ l_up[k])
            n_comp += len(s_up[k])
    mu = total / n_comp if n_comp else 0.0
    return stat, feas, comp, mu


def _riccati_newton(stages, Hbar, gbar, r_dyn):
    """Backward value recursion, forward rollout; stage-varying dimensions.
    Solves: min 0.5 d'Hd + g'd  s.t.  dx+ = A dx + B du + r_dyn, dx0 = 0.
    Returns the step and a factor cache for affine-only re-solves."""
    N = len(stages) - 1
    Ks = [None] * (N + 1)
    ks = [None] * (N + 1)
    Ps = [None] * (N + 1)
    ps = [None] * (N + 1)
    facs = [None] * (N + 1)
    Sps = [None] * (N + 1)

    def blocks(k):
        st = stages[k]
        H, g = Hbar[k], gbar[k]
        nx = st.nx
        return H[:nx, :nx], H[nx:, :nx], H[nx:, nx:], g[:nx], g[nx:]

    Q, S, R, q, r = blocks(N)
    if stages[N].nu:
        fac = _chol_jittered(R)
        facs[N], Sps[N] = fac, S
        Ks[N] = cho_solve(fac, S, check_finite=False)
        ks[N] = cho_solve(fac, r, check_finite=False)
        Ps[N] = Q - S.T @ Ks[N]
        ps[N] = q - S.T @ ks[N]
    else:
        Ps[N], ps[N] = Q, q
        Ks[N], ks[N] = np.zeros((0, stages[N].nx)), np.zeros(0)

    for k in range(N - 1, -1, -1):
        st = stages[k]
        Q, S, R, q, r = blocks(k)
        A, B = st.A, st.B
        P1, p1 = Ps[k + 1], ps[k + 1]
        d = r_dyn[k]
        PA = P1 @ A
        PB = P1 @ B
        Pd_p = P1 @ d + p1  # d is the Newton drift: the current dynamics residual
        Qp = Q + A.T @ PA
        Sp = S + B.T @ PA
        Rp = R + B.T @ PB
        qp_ = q + A.T @ Pd_p
        rp = r + B.T @ Pd_p
        if st.nu:
            fac = _chol_jittered(Rp)
            facs[k], Sps[k] = fac, Sp
            Ks[k] = cho_solve(fac, Sp, check_finite=False)
            ks[k] = cho_solve(fac, rp, check_finite=False)
            Ps[k] = Qp - Sp.T @ Ks[k]
            ps[k] = qp_ - Sp.T @ ks[k]
        else:
            Ps[k], ps[k] = Qp, qp_
            Ks[k], ks[k] = np.zeros((0, st.nx)), np.zeros(0)
        Ps[k] = 0.5 * (Ps[k] + Ps[k].T)

    dxs = [np.zeros(st.nx) for st in stages]
    dus = [None] * (N + 1)
    dpis = [None] * N
    for k in range(N + 1):
        dus[k] = -Ks[k] @ dxs[k] - ks[k] if stages[k].nu else np.zeros(0)
        if k < N:
            st = stages[k]
            dxs[k + 1] = st.A @ dxs[k] + st.B @ dus[k] + r_dyn[k]
            dpis[k] = Ps[k + 1] @ dxs[k + 1] + ps[k + 1]
    return dxs, dus, dpis, (facs, Ks, Ps, Sps)


def _riccati_affine(stages, cache, gbar, r_dyn):
    """Affine-only backward/forward sweep on cached factors and gains."""
    facs, Ks, Ps, Sps = cache
    N = len(stages) - 1
    ps = [None] * (N + 1)
    ks = [None] * (N + 1)
    nxN = stages[N].nx
    if stages[N].nu:
        ks[N] = cho_solve(facs[N], gbar[N][nxN:], check_finite=False)
        ps[N] = gbar[N][:nxN] - Sps[N].T @ ks[N]
    else:
        ps[N] = gbar[N][:nxN]
        ks[N] = np.zeros(0)
    for k in range(N - 1, -1, -1):
        st = stages[k]
        nx = st.nx
        q, r = gbar[k][:nx], gbar[k][nx:]
        Pd_p = Ps[k + 1] @ r_dyn[k] + ps[k + 1]
        qp_ = q + st.A.T @ Pd_p
        rp = r + st.B.T @ Pd_p
        if st.nu:
            ks[k] = cho_solve(facs[k], rp, check_finite=False)
            ps[k] = qp_ - Sps[k].T @ ks[k]
        else:
            ps[k] = qp_
            ks[k] = np.zeros(0)

    dxs = [np.zeros(st.nx) for st in stages]
    dus = [None] * (N + 1)
    dpis = [None] * N
    for k in range(N + 1):
        dus[k] = -Ks[k] @ dxs[k] - ks[k] if stages[k].nu else np.zeros(0)
        if k < N:
            st = stages[k]
            dxs[k + 1] = st.A @ dxs[k] + st.B @ dus[k] + r_dyn[k]
            dpis[k] = Ps[k + 1] @ dxs[k + 1] + ps[k + 1]
    return dxs, dus, dpis


def _refine_newton(stages, Hbar, gbar, r_dyn, dxs, dus, dpis, cache=None):
    """Re-solve the Newton system against its own linear residual."""
    N = len(stages) - 1
    res_z, res_d = [], []
    for k, st in enumerate(stages):
        dz = np.concatenate([dxs[k], dus[k]])
        r = Hbar[k] @ dz + gbar[k]
        if k < N:
            r += np.concatenate([st.A.T @ dpis[k], st.B.T @ dpis[k]])
            res_d.append(st.A @ dxs[k] + st.B @ dus[k] - dxs[k + 1] + r_dyn[k])
        if k > 0:
            r[:st.nx] -= dpis[k - 1]
        res_z.append(r)
    if cache is not None:
        cxs, cus, cpis = _riccati_affine(stages, cache, res_z, res_d)
    else:
        cxs, cus, cpis, _ = _riccati_newton(stages, Hbar, res_z, res_d)
    for k in range(N + 1):
        dxs[k] = dxs[k] + cxs[k]
        dus[k] = dus[k] + cus[k]
        if k < N:
            dpis[k] = dpis[k] + cpis[k]
    return dxs, dus, dpis
