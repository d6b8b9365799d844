"""Random stage-structured QP generation and dense conversion for tests."""

import numpy as np

from bipedmpc.solver.qp import QpStage, MultiPhaseQp

from oracles import DenseActiveSetQp


def random_stage_qp(rng, n_stages=None, nx_range=(2, 8), nu_range=(1, 5),
                    nc_range=(0, 6), equality_frac=0.15):
    """Feasible-by-construction random QP with varying stage dimensions.

    Returns (qp, feasible_point) where feasible_point = (xs, us) satisfies the
    dynamics exactly and every inequality with margin (equality rows hold
    exactly at it).
    """
    N = n_stages if n_stages is not None else int(rng.integers(2, 11))
    nxs = [int(rng.integers(*nx_range)) for _ in range(N + 1)]
    nus = [int(rng.integers(*nu_range)) for _ in range(N)] + [int(rng.integers(0, 3))]

    x0 = rng.normal(size=nxs[0])
    xs, us = [x0], []
    stages = []
    for k in range(N + 1):
        nx, nu = nxs[k], nus[k]
        nz = nx + nu
        Mq = rng.normal(size=(nz, nz))
        H = Mq @ Mq.T / nz + 0.3 * np.eye(nz)
        g = rng.normal(size=nz)
        u = rng.normal(size=nu)
        if k < N:
            A = rng.normal(size=(nxs[k + 1], nx))
            sv = np.linalg.svd(A, compute_uv=False)[0]
            A *= rng.uniform(0.3, 0.95) / sv  # keep rollouts O(1)
            B = rng.normal(size=(nxs[k + 1], nu)) / np.sqrt(max(nu, 1))
            b = rng.normal(size=nxs[k + 1]) * 0.3
            xs.append(A @ xs[k] + B @ u + b)
        else:
            A = B = b = None
        us.append(u)
        z = np.concatenate([xs[k], u])
        nc = int(rng.integers(*nc_range))
        C = rng.normal(size=(nc, nz))
        cz = C @ z
        lo = np.full(nc, -np.inf)
        up = np.full(nc, np.inf)
        n_eq = 0
        for i in range(nc):
            kind = rng.random()
            if kind < equality_frac and n_eq < min(2, nz - 1):
                lo[i] = up[i] = cz[i]
                n_eq += 1
            elif kind < 0.5:
                lo[i] = cz[i] - rng.uniform(0.05, 1.0)
                up[i] = cz[i] + rng.uniform(0.05, 1.0)
            elif kind < 0.75:
                lo[i] = cz[i] - rng.uniform(0.05, 1.0)
            else:
                up[i] = cz[i] + rng.uniform(0.05, 1.0)
        stages.append(QpStage(H=H, g=g, C=C, lo=lo, up=up, A=A, B=B, b=b,
                              nx=nx, nu=nu))
    return MultiPhaseQp(stages=stages, x0=x0).check(), (xs, us)


def dense_reference_solve(qp, feasible_point):
    """High-precision dense active-set solve; x0 eliminated as a constant."""
    stages = qp.stages
    N = len(stages) - 1
    offs, n = [], 0
    for k, st in enumerate(stages):
        x_off = None if k == 0 else n
        if k > 0:
            n += st.nx
        offs.append((x_off, n))
        n += st.nu

    H = np.zeros((n, n))
    g = np.zeros(n)
    rows_eq, rhs_eq = [], []
    rows_c, lo_c, up_c = [], [], []

    def scatter(k, Jx, Ju):
        row = np.zeros((Jx.shape[0], n))
        x_off, u_off = offs[k]
        if x_off is not None:
            row[:, x_off:x_off + stages[k].nx] = Jx
        row[:, u_off:u_off + stages[k].nu] = Ju
        return row, (None if x_off is not None else Jx)

    for k, st in enumerate(stages):
        x_off, u_off = offs[k]
        nx, nu = st.nx, st.nu
        Hxx, Hxu = st.H[:nx, :nx], st.H[:nx, nx:]
        Hux, Huu = st.H[nx:, :nx], st.H[nx:, nx:]
        if x_off is not None:
            H[x_off:x_off + nx, x_off:x_off + nx] += Hxx
            H[x_off:x_off + nx, u_off:u_off + nu] += Hxu
            H[u_off:u_off + nu, x_off:x_off + nx] += Hux
            g[x_off:x_off + nx] += st.g[:nx]
        else:
            g[u_off:u_off + nu] += Hux @ qp.x0
        H[u_off:u_off + nu, u_off:u_off + nu] += Huu
        g[u_off:u_off + nu] += st.g[nx:]
        if x_off is None:
            pass
        if st.C.shape[0]:
            row, fixed = scatter(k, st.C[:, :nx], st.C[:, nx:])
            shift = st.C[:, :nx] @ qp.x0 if x_off is None else 0.0
            rows_c.append(row)
            lo_c.append(st.lo - shift)
            up_c.append(st.up - shift)
        if k < N:
            nxt = stages[k + 1]
            row = np.zeros((nxt.nx, n))
            rhs = st.b.copy()
            if x_off is not None:
                row[:, x_off:x_off + nx] = st.A
            else:
                rhs = rhs + st.A @ qp.x0
            row[:, u_off:u_off + nu] = st.B
            xn_off = offs[k + 1][0]
            row[:, xn_off:xn_off + nxt.nx] -= np.eye(nxt.nx)
            rows_eq.append(row)
            rhs_eq.append(-rhs)

    A_eq = np.vstack(rows_eq) if rows_eq else np.zeros((0, n))
    b_eq = np.concatenate(rhs_eq) if rhs_eq else np.zeros(0)
    C = np.vstack(rows_c) if rows_c else np.zeros((0, n))
    lo = np.concatenate(lo_c) if rows_c else np.zeros(0)
    up = np.concatenate(up_c) if rows_c else np.zeros(0)

    xs_f, us_f = feasible_point
    z0 = []
    for k, st in enumerate(stages):
        if k > 0:
            z0.append(xs_f[k])
        z0.append(us_f[k])
    z0 = np.concatenate(z0) if z0 else np.zeros(0)

    # the active-set solver keeps A_eq rows in the working set permanently;
    # degenerate instances are re-solved with outward-perturbed bounds, which
    # keeps z0 feasible and moves the optimum only by O(perturbation)
    z = None
    for attempt in range(4):
        if attempt == 0:
            lo_t, up_t = lo, up
        else:
            rng = np.random.default_rng(1000 + attempt)
            eps = 10.0 ** (-9 + attempt)
            keep = lo == up
            lo_t = np.where(np.isfinite(lo) & ~keep,
                            lo - eps * rng.uniform(0.5, 1.5, len(lo)), lo)
            up_t = np.where(np.isfinite(up) & ~keep,
                            up + eps * rng.uniform(0.5, 1.5, len(up)), up)
        try:
            z = DenseActiveSetQp(H, g, A_eq, b_eq, C, lo_t, up_t).solve(z0)
            break
        except RuntimeError:
            if attempt == 3:
                raise

    xs = [qp.x0.copy()]
    us = []
    for k, st in enumerate(stages):
        x_off, u_off = offs[k]
        if k > 0:
            xs.append(z[x_off:x_off + st.nx])
        us.append(z[u_off:u_off + st.nu])
    return xs, us
