"""Multi-agent STRIPS planning, plan repair and failure-injection experiments."""
from .kernels import BACKEND
from .model import (
    EPS,
    UNDEFINED,
    Agent,
    GroundAction,
    JointAction,
    Plan,
    Problem,
    State,
    Term,
    apply,
    apply_joint,
    classify_public,
    diff,
    is_compressible,
    min_coordination_k,
    validate_plan,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "EPS",
    "UNDEFINED",
    "Agent",
    "GroundAction",
    "JointAction",
    "Plan",
    "Problem",
    "State",
    "Term",
    "apply",
    "apply_joint",
    "classify_public",
    "diff",
    "is_compressible",
    "min_coordination_k",
    "validate_plan",
]
