import numpy as np
import pytest

from bipedmpc.ocp.wrench_cone import wrench_cone_rows

from oracles import wrench_in_cone_lp

X, Y, MU = 0.09, 0.05, 0.7


def in_cone_rows(w):
    F = wrench_cone_rows(X, Y, MU)
    return np.all(F @ w <= 1e-9)


def test_pure_normal_force_inside():
    assert in_cone_rows(np.array([0, 0, 100.0, 0, 0, 0]))


def test_friction_boundary_violation():
    fz = 100.0
    assert in_cone_rows(np.array([MU * fz, 0, fz, 0, 0, 0]))
    assert not in_cone_rows(np.array([MU * fz + 1e-6, 0, fz, 0, 0, 0]))


def test_cop_bounds():
    fz = 80.0
    assert in_cone_rows(np.array([0, 0, fz, Y * fz, X * fz, 0]))
    assert not in_cone_rows(np.array([0, 0, fz, Y * fz * 1.01, 0, 0]))
    assert not in_cone_rows(np.array([0, 0, fz, 0, X * fz * 1.01, 0]))


def test_zero_wrench_on_boundary():
    assert in_cone_rows(np.zeros(6))


def test_rows_match_lp_feasibility_oracle():
    """Analytic faces agree with brute-force existence of a corner
    force distribution, away from the facet boundaries."""
    rng = np.random.default_rng(42)
    F = wrench_cone_rows(X, Y, MU)
    checked_in = checked_out = 0
    for trial in range(400):
        fz = rng.uniform(10, 200)
        scale = 0.35 if trial % 2 else 1.5  # narrow samples often inside, wide outside
        w = np.array([
            rng.uniform(-scale, scale) * MU * fz,
            rng.uniform(-scale, scale) * MU * fz,
            fz,
            rng.uniform(-scale, scale) * Y * fz,
            rng.uniform(-scale, scale) * X * fz,
            rng.uniform(-scale, scale) * MU * (X + Y) * fz,
        ])
        margin = (F @ w).max()
        if abs(margin) < 1e-6 * fz:
            continue  # boundary: both classifiers are tolerance-limited
        analytic = margin <= 0
        brute = wrench_in_cone_lp(w, X, Y, MU)
        assert analytic == brute, f"disagree at {w} (margin {margin})"
        checked_in += analytic
        checked_out += not analytic
    assert checked_in > 30 and checked_out > 30


def test_invalid_geometry_rejected():
    with pytest.raises(ValueError):
        wrench_cone_rows(0.0, Y, MU)
