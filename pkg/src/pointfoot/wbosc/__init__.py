"""Whole-body operational space control on contact-constrained dynamics."""

from pointfoot.wbosc.contacts import (
    Contact,
    ContactSet,
    build_contact_set,
    constrained_forward_dynamics,
    contact_set_from_kinematics,
    coordinate_lock,
    point_contact,
)
from pointfoot.wbosc.controller import (
    LANDING,
    LIFTING,
    CommandInfo,
    TransitionState,
    swing_reaction,
    transition_command,
    whole_body_command,
)
from pointfoot.wbosc.core import Projection, TaskForce, projection, task_force, task_jacobian_star
from pointfoot.wbosc.internal import (
    InternalForceSpec,
    actual_internal_force,
    build_W_int,
    embed_W_int,
    internal_force_terms,
    internal_torque,
)
from pointfoot.wbosc.linalg import damped_pinv
from pointfoot.wbosc.tasks import TASK_KINDS, Task, stack_tasks

__all__ = [name for name in dir() if not name.startswith("_")]
