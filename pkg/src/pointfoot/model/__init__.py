"""Articulated rigid-body model of a floating-base point-foot biped."""

from pointfoot.model.dynamics import (
    DynamicsTerms,
    GeneralizedState,
    Kinematics,
    bias_forces,
    com_position,
    dynamics_terms,
    mass_matrix,
    point_jacobian,
    point_position,
    random_state,
    total_energy,
    zero_state,
)
from pointfoot.model.robot import PLANAR, SPATIAL, BodyPoint, Joint, Link, RobotModel, load_model, model_from_dict

__all__ = [
    "BodyPoint",
    "DynamicsTerms",
    "GeneralizedState",
    "Joint",
    "Kinematics",
    "Link",
    "PLANAR",
    "RobotModel",
    "SPATIAL",
    "bias_forces",
    "com_position",
    "dynamics_terms",
    "load_model",
    "mass_matrix",
    "model_from_dict",
    "point_jacobian",
    "point_position",
    "random_state",
    "total_energy",
    "zero_state",
]
