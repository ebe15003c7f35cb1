"""Data models and domain objects"""

from .domain import (
    FailureCategory,
    MarathonError,
    ConfigError,
    KinematicsError,
    FormulaError,
    QPInfeasible,
    InsufficientData,
    EmptySupport,
    PCADegenerate,
    LogFormatError,
    ReportSchemaError,
    PlanFailure,
    SettleFailure,
    LocationUnreachable,
    Pose,
    Episode,
    wrap_angle
)
from .designator import (
    Designator,
    DesignatorKind,
    an_action,
    an_object,
    a_location,
    a_motion
)

__all__ = [
    "FailureCategory",
    "MarathonError",
    "ConfigError",
    "KinematicsError",
    "FormulaError",
    "QPInfeasible",
    "InsufficientData",
    "EmptySupport",
    "PCADegenerate",
    "LogFormatError",
    "ReportSchemaError",
    "PlanFailure",
    "SettleFailure",
    "LocationUnreachable",
    "Pose",
    "Episode",
    "wrap_angle",
    "Designator",
    "DesignatorKind",
    "an_action",
    "an_object",
    "a_location",
    "a_motion"
]
