import numpy as np
import pytest

from bipedmpc import canonical_model_path, standing_configuration
from bipedmpc.rbd import load_model, parse_model, Configuration
from bipedmpc.rbd.so3 import quat_exp, quat_mul, quat_normalize


@pytest.fixture(scope="session")
def model():
    return load_model(canonical_model_path())


@pytest.fixture(scope="session")
def standing(model):
    return standing_configuration(model, 0.65)


SRB_DOC = """rbdmodel v1
name box
gravity 0 0 -9.81
link body
  mass 5.0
  com 0 0 0
  inertia 0.1 0.2 0.3
joint floating_base
  type floating
  child body
"""


@pytest.fixture(scope="session")
def srb_model():
    return parse_model(SRB_DOC)


def random_configuration(model, rng, base_rot_scale=0.4, joint_span=0.35):
    """Random configuration, resampled until the feet stay clear of the
    rpy gimbal (forward_kinematics rejects |pitch| near pi/2)."""
    from bipedmpc.rbd import forward_kinematics
    lo, hi, _, _ = model.joint_limits()
    center, half = (lo + hi) / 2, (hi - lo) / 2
    for _ in range(100):
        joints = center + rng.uniform(-joint_span, joint_span, model.nj) * half
        quat = quat_normalize(quat_exp(rng.uniform(-base_rot_scale, base_rot_scale, 3)))
        q = Configuration(rng.uniform(-1, 1, 3), quat, joints)
        try:
            forward_kinematics(model, q)
        except ValueError:
            continue
        return q
    raise RuntimeError("could not sample a gimbal-free configuration")


def random_velocity(model, rng, scale=1.0):
    return rng.uniform(-scale, scale, model.nv)
