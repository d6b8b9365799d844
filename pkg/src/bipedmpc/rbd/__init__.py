"""Rigid-body dynamics and kinematics kernel."""

from .model import RobotModel, Link, Joint, Foot, ModelError, load_model, parse_model
from .kinematics import (Configuration, neutral_configuration, plus, minus,
                         forward_kinematics, frame_jacobian, FootKinematics,
                         KinematicsData, delta_chain_factor, foot_residual_rows,
                         foot_velocity_and_jacobians)
from .dynamics import (mass_matrix, nonlinear_effects, com_and_locked_inertia,
                       potential_energy, kinetic_energy)
from . import so3

__all__ = [
    "RobotModel", "Link", "Joint", "Foot", "ModelError", "load_model", "parse_model",
    "Configuration", "neutral_configuration", "plus", "minus",
    "forward_kinematics", "frame_jacobian", "FootKinematics", "KinematicsData",
    "delta_chain_factor", "foot_residual_rows", "foot_velocity_and_jacobians",
    "mass_matrix", "nonlinear_effects", "com_and_locked_inertia",
    "potential_energy", "kinetic_energy", "so3",
]
