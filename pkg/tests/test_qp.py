import numpy as np
import pytest

from bipedmpc.solver.qp import QpStage, MultiPhaseQp, solve_qp

from oracles import riccati_lqr
from qp_problems import random_stage_qp, dense_reference_solve


def double_integrator_qp(N=10, dt=0.1, x0=None):
    A = np.array([[1.0, dt], [0.0, 1.0]])
    B = np.array([[0.5 * dt * dt], [dt]])
    Q = np.diag([2.0, 0.5])
    R = np.array([[0.4]])
    P = np.diag([5.0, 1.0])
    x0 = np.array([1.0, -0.5]) if x0 is None else x0
    stages = []
    for k in range(N):
        H = np.zeros((3, 3))
        H[:2, :2] = Q
        H[2:, 2:] = R
        stages.append(QpStage(H=H, g=np.zeros(3), A=A, B=B, b=np.zeros(2), nx=2, nu=1))
    stages.append(QpStage(H=P, g=np.zeros(2), nx=2, nu=0))
    return MultiPhaseQp(stages=stages, x0=x0), (A, B, Q, R, P)


def test_lqr_matches_riccati_oracle():
    qp, (A, B, Q, R, P) = double_integrator_qp()
    sol = solve_qp(qp, tol=1e-10)
    assert sol.converged
    xs_ref, us_ref = riccati_lqr(A, B, Q, R, P, np.zeros(2), np.zeros(1),
                                 np.zeros(2), qp.x0, 10)
    for k in range(10):
        assert np.abs(sol.xs[k] - xs_ref[k]).max() <= 1e-8
        assert np.abs(sol.us[k] - us_ref[k]).max() <= 1e-8
    assert np.abs(sol.xs[10] - xs_ref[10]).max() <= 1e-8


def test_single_stage_box_clamp():
    # min 0.5 u'u - b'u with u <= 0 -> u = min(b, 0)
    b = np.array([0.7, -1.3, -0.4, 2.5])
    n = len(b)
    stages = [QpStage(H=np.block([[np.eye(1), np.zeros((1, n))],
                                  [np.zeros((n, 1)), np.eye(n)]]),
                      g=np.concatenate([[0.0], -b]),
                      C=np.hstack([np.zeros((n, 1)), np.eye(n)]),
                      lo=np.full(n, -np.inf), up=np.zeros(n), nx=1, nu=n)]
    qp = MultiPhaseQp(stages=stages, x0=np.zeros(1))
    sol = solve_qp(qp, tol=1e-9)
    assert sol.converged
    assert np.abs(sol.us[0] - np.minimum(b, 0.0)).max() <= 1e-7


def test_residual_contract_on_random_qps():
    rng = np.random.default_rng(0)
    for _ in range(50):
        qp, _ = random_stage_qp(rng)
        sol = solve_qp(qp, tol=1e-6)
        assert sol.converged, "IPM failed on a feasible random QP"
        assert sol.stat_res <= 1e-6
        assert sol.feas_res <= 1e-6
        assert sol.comp_res <= 1e-6


def test_matches_dense_reference():
    rng = np.random.default_rng(1)
    for _ in range(60):
        qp, feas = random_stage_qp(rng)
        sol = solve_qp(qp, tol=1e-7)
        assert sol.converged
        xs_ref, us_ref = dense_reference_solve(qp, feas)
        for k in range(len(qp.stages)):
            assert np.abs(sol.xs[k] - xs_ref[k]).max() <= 1e-6
            if sol.us[k].size:
                assert np.abs(sol.us[k] - us_ref[k]).max() <= 1e-6


def test_warm_start_accepts_previous_solution():
    qp, _ = random_stage_qp(np.random.default_rng(3))
    cold = solve_qp(qp, tol=1e-8)
    warm = solve_qp(qp, tol=1e-8, warm_start=cold)
    assert warm.converged
    assert warm.iterations <= cold.iterations
    for k in range(len(qp.stages)):
        assert np.abs(warm.xs[k] - cold.xs[k]).max() <= 1e-5


def test_state_dimension_change_across_stages():
    rng = np.random.default_rng(5)
    for _ in range(10):
        qp, feas = random_stage_qp(rng, n_stages=4, nx_range=(2, 9))
        sol = solve_qp(qp, tol=1e-7)
        assert sol.converged
        xs_ref, us_ref = dense_reference_solve(qp, feas)
        for k in range(len(qp.stages)):
            assert np.abs(sol.xs[k] - xs_ref[k]).max() <= 1e-6
            if sol.us[k].size:
                assert np.abs(sol.us[k] - us_ref[k]).max() <= 1e-6


def test_infeasible_hits_iteration_cap():
    # contradictory equalities on the same variable
    st = QpStage(H=np.eye(2), g=np.zeros(2),
                 C=np.array([[0.0, 1.0], [0.0, 1.0]]),
                 lo=np.array([0.0, 1.0]), up=np.array([0.0, 1.0]), nx=1, nu=1)
    qp = MultiPhaseQp(stages=[st], x0=np.zeros(1))
    sol = solve_qp(qp, tol=1e-8, max_iter=30)
    assert not sol.converged
    assert sol.status == "max_iter"
