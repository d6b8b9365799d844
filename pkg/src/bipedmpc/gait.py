"""Periodic walking gait: contact schedules and swing-foot references.

Cycle layout (period ``2 * (stance_time - double_support_time)``), left foot
swinging first:

* ``[0, ds)``                    double support
* ``[ds, ds + swing)``           left swing
* ``[half, half + ds)``          double support
* ``[half + ds, period)``        right swing

with ``half = stance_time - double_support_time`` and
``swing = half - ds``. Each foot is in contact for exactly ``stance_time``
per cycle and both feet share two ``ds`` windows, so a walking schedule never
contains a flight phase.
"""

from dataclasses import dataclass, field

import numpy as np

_TIE_EPS = 1e-9  # phase-boundary ties resolve to "in contact"


@dataclass(frozen=True)
class GaitParams:
    stance_time: float = 0.5
    double_support_time: float = 0.1
    swing_clearance: float = 0.03
    target_velocity: float = 0.3
    target_base_height: float = 0.65

    def __post_init__(self):
        if not self.stance_time > self.double_support_time > 0:
            raise ValueError("need stance_time > double_support_time > 0")
        if self.swing_clearance <= 0:
            raise ValueError("swing_clearance must be > 0")

    @property
    def period(self):
        return 2 * (self.stance_time - self.double_support_time)

    @property
    def swing_duration(self):
        return self.stance_time - 2 * self.double_support_time


@dataclass
class ContactStage:
    time: float                 # absolute stage start time
    contact: dict               # side -> 0/1
    height_ref: dict            # side -> m
    dheight_ref: dict           # side -> m/s
    approach: dict = field(default_factory=dict)  # side -> bool, set by build_schedule


@dataclass
class ContactSchedule:
    params: GaitParams
    stages: list                # list[ContactStage], one per horizon node

    def __len__(self):
        return len(self.stages)

    def __getitem__(self, k):
        return self.stages[k]


def swing_profile(s, clearance, swing_duration):
    """Smooth swing arc height(s) = clearance*sin^2(pi s) and its time derivative.

    Zero height and zero vertical velocity at both endpoints, apex equal to
    the clearance at s = 0.5.
    """
    s = float(s)
    if not 0.0 <= s <= 1.0:
        raise ValueError("phase fraction outside [0, 1]")
    height = clearance * np.sin(np.pi * s) ** 2
    velocity = clearance * np.pi * np.sin(2 * np.pi * s) / swing_duration
    return height, velocity


def _swing_window(params, side):
    half = params.stance_time - params.double_support_time
    start = params.double_support_time if side == "left" else half + params.double_support_time
    return start, start + params.swing_duration


def swing_state(params: GaitParams, side, t):
    """(in_contact, height_ref, dheight_ref) for one foot at absolute time t.

    The swing window is half-open: a stage starting exactly at lift-off is a
    swing stage, one starting exactly at touchdown is a contact stage, so a
    boundary-aligned grid realizes the stance and double-support durations
    exactly.
    """
    tau = np.mod(t, params.period)
    start, end = _swing_window(params, side)
    if tau > start - _TIE_EPS and tau < end - _TIE_EPS:
        s = (tau - start) / params.swing_duration
        h, dh = swing_profile(min(max(s, 0.0), 1.0), params.swing_clearance,
                              params.swing_duration)
        return 0, h, dh
    return 1, 0.0, 0.0


def build_schedule(params: GaitParams, t0, stage_times):
    """Classify every horizon node at its start time against the gait cycle.

    ``stage_times`` are offsets from ``t0`` and must be strictly increasing
    (they encode the non-uniform near/far discretization grid).
    """
    times = np.asarray(stage_times, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("stage_times must be strictly increasing")
    stages = []
    for dt in times:
        t = t0 + dt
        contact, href, dhref = {}, {}, {}
        for side in ("left", "right"):
            c, h, dh = swing_state(params, side, t)
            contact[side] = c
            href[side] = h
            dhref[side] = dh
        stages.append(ContactStage(time=t, contact=contact,
                                   height_ref=href, dheight_ref=dhref))
    for k, st in enumerate(stages):
        for side in ("left", "right"):
            nxt = stages[k + 1].contact[side] if k + 1 < len(stages) else None
            st.approach[side] = (st.contact[side] == 0 and nxt == 1)
    return ContactSchedule(params=params, stages=stages)


def standing_schedule(params: GaitParams, t0, stage_times):
    """Double-support-only schedule (balance experiments)."""
    stages = [ContactStage(time=t0 + dt,
                           contact={"left": 1, "right": 1},
                           height_ref={"left": 0.0, "right": 0.0},
                           dheight_ref={"left": 0.0, "right": 0.0},
                           approach={"left": False, "right": False})
              for dt in np.asarray(stage_times, dtype=float)]
    return ContactSchedule(params=params, stages=stages)
