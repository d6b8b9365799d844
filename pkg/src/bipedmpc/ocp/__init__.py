"""Two-phase optimal control problem: types, stages, references, assembly."""

from .types import (HorizonConfig, Weights, Bounds, FrozenTerms, freeze_terms,
                    ReferenceSet, WbRef, SrbRef, SIDES)
from .wrench_cone import wrench_cone_rows
from .stages import (WbDynamics, wb_dynamics, srb_dynamics,
                     srb_dynamics_jacobians, transition_map, transition_jacobian,
                     WbStageNode, TransitionNode, SrbStageNode,
                     ConstraintBlock, NodeLinearization, soft_violation_cost)
from .references import build_references
from .nlp import MultiPhaseNlp, assemble_nlp, build_walking_nlp

__all__ = [
    "HorizonConfig", "Weights", "Bounds", "FrozenTerms", "freeze_terms",
    "ReferenceSet", "WbRef", "SrbRef", "SIDES", "wrench_cone_rows",
    "WbDynamics", "wb_dynamics", "srb_dynamics", "srb_dynamics_jacobians",
    "transition_map", "transition_jacobian", "WbStageNode", "TransitionNode",
    "SrbStageNode", "ConstraintBlock", "NodeLinearization",
    "soft_violation_cost", "MultiPhaseNlp", "assemble_nlp", "build_walking_nlp",
]
