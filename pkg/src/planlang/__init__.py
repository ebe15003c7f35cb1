"""Plan language: goal formulas, task trees, the interpreter and the generalized plans"""

from .formulas import (
    And,
    Atom,
    Exists,
    ForAll,
    Formula,
    Not,
    Or,
    Var,
    and_,
    container_state,
    holds,
    looking_at,
    not_,
    object_at,
    object_in_hand,
    or_,
    robot_at
)
from .tasks import Event, EventBus, TaskNode, TaskStatus, TaskTree
from .serialization import NdjsonWriter, TaskTreeRecorder, dumps, iter_positioned, iter_records, read_records
from .interpreter import Interpreter, Outcome, RetryPolicy, TaskContext
from .plans import GENERALIZED_PLANS, GeneralizedPlan, generalized_plan
from .executive import (
    PHASES,
    Disturbances,
    ExecutiveConfig,
    NullDisturbances,
    PlanExecutive,
    RetryConfig
)

__all__ = [
    "And",
    "Atom",
    "Exists",
    "ForAll",
    "Formula",
    "Not",
    "Or",
    "Var",
    "and_",
    "container_state",
    "holds",
    "looking_at",
    "not_",
    "object_at",
    "object_in_hand",
    "or_",
    "robot_at",
    "Event",
    "EventBus",
    "TaskNode",
    "TaskStatus",
    "TaskTree",
    "NdjsonWriter",
    "TaskTreeRecorder",
    "dumps",
    "iter_positioned",
    "iter_records",
    "read_records",
    "Interpreter",
    "Outcome",
    "RetryPolicy",
    "TaskContext",
    "GENERALIZED_PLANS",
    "GeneralizedPlan",
    "generalized_plan",
    "PHASES",
    "Disturbances",
    "ExecutiveConfig",
    "NullDisturbances",
    "PlanExecutive",
    "RetryConfig"
]
