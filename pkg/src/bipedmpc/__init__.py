"""Cascaded-fidelity MPC for bipedal walking.

Library layout:

* :mod:`bipedmpc.rbd` -- rigid-body kinematics/dynamics kernel
* :mod:`bipedmpc.gait` -- contact schedules and swing references
* :mod:`bipedmpc.ocp` -- two-phase optimal control problem assembly
* :mod:`bipedmpc.solver` -- Gauss-Newton SQP with a Riccati interior-point QP
* :mod:`bipedmpc.sim` -- penalty-contact simulator and closed-loop runner
* :mod:`bipedmpc.cli` -- experiment harness (walk / sweep / check-model)
"""

from .poses import canonical_model_path, standing_configuration

__version__ = "0.1.0"
__all__ = ["canonical_model_path", "standing_configuration", "__version__"]
