"""Ground-truth physics simulation and the closed-loop control runner.

The simulator integrates the full nonlinear dynamics (nothing frozen) with
spring-damper normal contacts and regularized Coulomb friction at the four
corners of each foot, semi-implicit Euler at a fixed substep rate. The
closed-loop runner applies the controller's first-stage torques zero-order
hold at the control rate; solve time is measured but never delays actuation.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .rbd import (Configuration, plus, minus, forward_kinematics, frame_jacobian,
                  mass_matrix, nonlinear_effects)
from .rbd.so3 import quat_normalize, quat_to_rot, rot_to_rpy
from .rbd.kinematics import _cross
from .gait import GaitParams, build_schedule, standing_schedule
from .ocp import (HorizonConfig, Weights, Bounds, freeze_terms,
                  build_references, assemble_nlp, SIDES)
from .solver import SqpSettings, sqp_solve, warm_start_shift, cold_start_guess


class SimulationDiverged(RuntimeError):
    pass


@dataclass
class ContactParams:
    stiffness: float = 5e4          # N/m per contact corner
    damping: float = 5e2            # N*s/m
    friction: float = 0.7
    regularization_velocity: float = 0.01   # m/s, Coulomb smoothing
    substep_rate: float = 1000.0    # Hz

    def __post_init__(self):
        if self.stiffness <= 0 or self.damping <= 0:
            raise ValueError("contact stiffness and damping must be positive")


@dataclass
class SimState:
    q: Configuration
    v: np.ndarray
    time: float = 0.0

    def copy(self):
        return SimState(self.q.copy(), self.v.copy(), self.time)


def _corner_offsets(foot):
    X, Y = foot.half_length, foot.half_width
    return [np.array([sx * X, sy * Y, 0.0]) for sx in (1.0, -1.0) for sy in (1.0, -1.0)]


def contact_forces(model, data, v, contact: ContactParams):
    """World-frame corner forces; returns list of (world_point, force)."""
    out = []
    for side, foot in model.feet.items():
        fk = data.feet[side]
        J = frame_jacobian(model, data.q, side, data)
        v6 = J @ v
        v_lin, w_lin = v6[0:3], v6[3:6]
        for off in _corner_offsets(foot):
            arm = fk.world_rot @ off
            p = fk.world_pos + arm
            if p[2] >= 0.0:
                continue
            vel = v_lin + _cross(w_lin, arm)
            fn = -contact.stiffness * p[2] - contact.damping * vel[2]
            if fn <= 0.0:
                continue
            vt = vel.copy()
            vt[2] = 0.0
            speed = np.linalg.norm(vt)
            scale = contact.friction * fn / max(speed, contact.regularization_velocity)
            f = np.array([-scale * vt[0], -scale * vt[1], fn])
            out.append((p, f, side))
    return out


def sim_step(state: SimState, tau, dt, contact: ContactParams, model):
    """One semi-implicit Euler substep of the exact dynamics."""
    if dt > 1e-3 + 1e-12:
        raise ValueError("substep must be <= 1 ms for penalty-contact stability")
    q, v = state.q, state.v
    data = forward_kinematics(model, q)
    M = mass_matrix(model, q)
    h = nonlinear_effects(model, q, v)
    f_gen = np.concatenate([np.zeros(6), tau]) - h
    for p, f, side in contact_forces(model, data, v, contact):
        # world force at a world point: generalized force via the point Jacobian
        fk = data.feet[side]
        J = frame_jacobian(model, q, side, data)
        arm = p - fk.world_pos
        f_gen += J[0:3].T @ f + J[3:6].T @ _cross(arm, f)
    a = cho_solve(cho_factor(M, lower=True, check_finite=False), f_gen,
                  check_finite=False)
    v_new = v + dt * a
    q_new = plus(q, dt * v_new)
    q_new.base_quat = quat_normalize(q_new.base_quat)
    if not (np.all(np.isfinite(v_new)) and np.all(np.isfinite(q_new.base_pos))):
        raise SimulationDiverged(f"non-finite state at t={state.time + dt:.4f}")
    return SimState(q_new, v_new, state.time + dt)


@dataclass
class TickRecord:
    tick: int
    time: float
    q: Configuration
    v: np.ndarray
    tau: np.ndarray
    solve_time: float
    nlp_cost: float
    sqp_stats: object = None


@dataclass
class RunLog:
    records: list = field(default_factory=list)
    fall: bool = False
    fall_time: float = None
    control_rate: float = 100.0
    duration: float = 0.0

    def base_heights(self):
        return np.array([r.q.base_pos[2] for r in self.records])

    def forward_velocities(self):
        """World-x base velocity per tick (base velocity is body frame)."""
        from .rbd.so3 import quat_to_rot
        return np.array([(quat_to_rot(r.q.base_quat) @ r.v[0:3])[0]
                         for r in self.records])


@dataclass
class Metrics:
    mean_height_error: float
    mean_velocity_error: float
    mean_solve_time: float
    max_solve_time: float
    mean_nlp_cost: float
    fall: bool
    ticks: int


def detect_fall(state, params: GaitParams):
    if state.q.base_pos[2] < 0.6 * params.target_base_height:
        return True
    try:
        roll, pitch, _ = rot_to_rpy(quat_to_rot(state.q.base_quat))
    except ValueError:
        return True  # pitched past the gimbal guard: definitely down
    return abs(roll) > 1.0 or abs(pitch) > 1.0


@dataclass
class Controller:
    """One MPC instance: owns the warm-start state across control ticks."""

    model: object
    params: GaitParams
    config: HorizonConfig
    weights: Weights
    bounds: Bounds
    settings: SqpSettings
    schedule_fn: object = build_schedule
    _prev_traj: list = None
    _qp_seed: object = None
    _lm: float = None
    _shift_debt: float = 0.0

    def solve(self, q, v, t):
        times = self.config.node_times()
        unique = times[:self.config.n_wb + 1] + times[self.config.n_wb + 2:]
        schedule = self.schedule_fn(self.params, t, unique)
        refs = build_references(self.model, self.params, q, schedule,
                                self.config, self.weights)
        nlp = assemble_nlp(self.model, q, v, self.config, schedule, refs,
                           self.weights, self.bounds)
        guess = None
        if self._prev_traj is not None and self.settings.warm_start_shift:
            base = self._prev_traj
            if self._shift_debt >= self.config.dt_wb - 1e-12:
                try:
                    base = warm_start_shift(self._prev_traj, self.config)
                    self._shift_debt -= self.config.dt_wb
                except ValueError:
                    base = None
            guess = base
        if guess is None:
            guess = cold_start_guess(nlp)
        traj, stats, qp_sol = sqp_solve(nlp, guess, self.settings,
                                        lm=self._lm, qp_seed=self._qp_seed)
        self._prev_traj = traj
        self._qp_seed = qp_sol
        self._lm = stats.lm_final
        tau = traj[0][1][:self.model.nj].copy()
        return tau, stats, traj

    def advance(self, dt):
        self._shift_debt += dt


def run_closed_loop(model, params: GaitParams, config: HorizonConfig,
                    weights: Weights, bounds: Bounds, settings: SqpSettings,
                    duration, control_rate, contact: ContactParams,
                    initial_state=None, schedule_fn=build_schedule,
                    rng=None, joint_noise=0.0):
    """Torque-controlled closed loop at a fixed control rate.

    The simulator substeps between control ticks; the measured solve time is
    recorded but never delays actuation. Returns a RunLog (truncated at the
    first detected fall).
    """
    from .poses import standing_configuration
    substeps = contact.substep_rate / control_rate
    if abs(substeps - round(substeps)) > 1e-9:
        raise ValueError("control_rate must divide the simulator substep rate")
    substeps = int(round(substeps))
    dt_sub = 1.0 / contact.substep_rate

    if initial_state is None:
        q0 = standing_configuration(model, params.target_base_height)
        if joint_noise > 0.0 and rng is not None:
            q0.joints = q0.joints + rng.uniform(-joint_noise, joint_noise, model.nj)
        state = SimState(q0, np.zeros(model.nv), 0.0)
    else:
        state = initial_state.copy()

    controller = Controller(model, params, config, weights, bounds, settings,
                            schedule_fn=schedule_fn)
    n_ticks = int(round(duration * control_rate))
    log = RunLog(control_rate=control_rate, duration=duration)

    for tick in range(n_ticks):
        t_solve = time.perf_counter()
        tau, stats, _ = controller.solve(state.q, state.v, state.time)
        solve_time = time.perf_counter() - t_solve
        log.records.append(TickRecord(tick=tick, time=state.time,
                                      q=state.q.copy(), v=state.v.copy(),
                                      tau=tau.copy(), solve_time=solve_time,
                                      nlp_cost=stats.cost, sqp_stats=stats))
        try:
            for _ in range(substeps):
                state = sim_step(state, tau, dt_sub, contact, model)
        except SimulationDiverged:
            log.fall = True
            log.fall_time = state.time
            break
        controller.advance(1.0 / control_rate)
        if detect_fall(state, params):
            log.fall = True
            log.fall_time = state.time
            break
    return log


def compute_metrics(log: RunLog, params: GaitParams) -> Metrics:
    if not log.records:
        raise ValueError("empty run log")
    heights = log.base_heights()
    vels = log.forward_velocities()
    solve_times = np.array([r.solve_time for r in log.records])
    costs = np.array([r.nlp_cost for r in log.records])
    return Metrics(
        mean_height_error=float(np.mean(np.abs(heights - params.target_base_height))),
        mean_velocity_error=float(np.mean(np.abs(vels - params.target_velocity))),
        mean_solve_time=float(np.mean(solve_times)),
        max_solve_time=float(np.max(solve_times)),
        mean_nlp_cost=float(np.mean(costs)),
        fall=log.fall,
        ticks=len(log.records),
    )
