import numpy as np
import pytest

from bipedmpc.gait import GaitParams, build_schedule, swing_profile, swing_state

from oracles import gradient_fd


@pytest.fixture
def params():
    return GaitParams()


def grid(n=80, dt=0.01):
    return np.arange(n) * dt


def test_invalid_params_rejected():
    with pytest.raises(ValueError):
        GaitParams(stance_time=0.1, double_support_time=0.2)
    with pytest.raises(ValueError):
        GaitParams(swing_clearance=0.0)


def test_initial_double_support(params):
    sched = build_schedule(params, 0.0, grid())
    for st in sched.stages:
        if st.time < params.double_support_time - 1e-9:
            assert st.contact["left"] == 1 and st.contact["right"] == 1


def test_mid_left_swing(params):
    # left swing window is (ds, ds + swing); its midpoint carries full clearance
    t_mid = params.double_support_time + params.swing_duration / 2
    sched = build_schedule(params, t_mid, [0.0])
    st = sched[0]
    assert st.contact["left"] == 0 and st.contact["right"] == 1
    assert st.height_ref["left"] == pytest.approx(0.03, abs=1e-12)
    assert st.dheight_ref["left"] == pytest.approx(0.0, abs=1e-12)


def test_no_flight_phase(params):
    rng = np.random.default_rng(2)
    for _ in range(20):
        t0 = rng.uniform(0, 10)
        sched = build_schedule(params, t0, grid(120, 0.013))
        for st in sched.stages:
            assert st.contact["left"] + st.contact["right"] >= 1


def test_stance_and_double_support_durations_on_grid(params):
    # sample a full cycle on a fine grid; realized durations are exact
    dt = 0.005
    n = int(round(params.period / dt))
    times = np.arange(n) * dt
    sched = build_schedule(params, 0.0, times)
    left = np.array([st.contact["left"] for st in sched.stages])
    right = np.array([st.contact["right"] for st in sched.stages])
    assert left.sum() * dt == pytest.approx(params.stance_time, abs=1e-9)
    assert right.sum() * dt == pytest.approx(params.stance_time, abs=1e-9)
    both = (left == 1) & (right == 1)
    assert both.sum() * dt == pytest.approx(2 * params.double_support_time, abs=1e-9)


def test_schedule_periodicity(params):
    times = grid(60, 0.017)
    a = build_schedule(params, 0.3, times)
    b = build_schedule(params, 0.3 + params.period, times)
    for sa, sb in zip(a.stages, b.stages):
        assert sa.contact == sb.contact
        for side in ("left", "right"):
            assert sa.height_ref[side] == pytest.approx(sb.height_ref[side], abs=1e-9)


def test_swing_profile_endpoints_and_apex(params):
    h0, v0 = swing_profile(0.0, 0.03, params.swing_duration)
    h1, v1 = swing_profile(1.0, 0.03, params.swing_duration)
    ha, va = swing_profile(0.5, 0.03, params.swing_duration)
    assert (h0, v0) == (0.0, pytest.approx(0.0, abs=1e-15))
    assert h1 == pytest.approx(0.0, abs=1e-15) and v1 == pytest.approx(0.0, abs=1e-12)
    assert ha == pytest.approx(0.03) and va == pytest.approx(0.0, abs=1e-12)
    heights = [swing_profile(s, 0.03, params.swing_duration)[0]
               for s in np.linspace(0, 1, 101)]
    assert max(heights) == pytest.approx(0.03, abs=1e-9)


def test_swing_velocity_is_time_derivative(params):
    T = params.swing_duration
    for s in np.linspace(0.05, 0.95, 19):
        _, v = swing_profile(s, 0.03, T)
        fd = gradient_fd(lambda x: swing_profile(x[0], 0.03, T)[0] , np.array([s]), h=1e-7)[0] / T
        assert abs(v - fd) <= 1e-8


def test_approach_stage_marking(params):
    # stage grid straddling the left touchdown at ds + swing = 0.4
    times = np.array([0.0, 0.05, 0.2, 0.3, 0.38, 0.45])
    sched = build_schedule(params, 0.0, times)
    approach = [st.approach["left"] for st in sched.stages]
    contact = [st.contact["left"] for st in sched.stages]
    assert contact == [1, 1, 0, 0, 0, 1]
    assert approach == [False, False, False, False, True, False]


def test_stage_times_must_increase(params):
    with pytest.raises(ValueError):
        build_schedule(params, 0.0, [0.0, 0.0, 0.1])
