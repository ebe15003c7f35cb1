"""Projection: validating parameter bindings in a noise-free clone of the world"""

from typing import Any, Callable, Optional, Protocol

from ..models.designator import Designator
from ..models.domain import PlanFailure
from ..utils.logger import logger
from ..worldmodel.world import WorldState


class ProjectionRun(Protocol):
    """What a projection executive returns from ``run``"""
    failure: Optional[PlanFailure]


ExecutiveFactory = Callable[[WorldState], Any]


class ProjectionImpure(RuntimeError):
    """Projection changed the world it was asked to validate against"""


class Projector:
    """Runs actions in fast noise-free simulation before real execution.

    Args:
        executive_factory: Builds a projection executive (no disturbances, no
            recorder, no nested projection) whose truth and belief both start
            as a clone of the given world
    """

    def __init__(self, executive_factory: ExecutiveFactory):
        self.executive_factory = executive_factory
        self.runs = 0
        self.rejections = 0

    def validate(self, action: Designator, world: WorldState) -> Optional[PlanFailure]:
        """Project an action with complete bindings.

        Returns:
            The projected failure, or None when the action succeeds
        """
        before = world.state_hash()
        executive = self.executive_factory(world.clone())
        outcome = executive.run(action)
        if world.state_hash() != before:
            raise ProjectionImpure(f"projection of {action.describe()} modified the world")
        self.runs += 1
        if outcome.failure is not None:
            self.rejections += 1
            logger.debug(f"Projection rejected {action.describe()}: {outcome.failure}")
        return outcome.failure


def validate_by_projection(
    action: Designator,
    world: WorldState,
    executive_factory: ExecutiveFactory
) -> Optional[PlanFailure]:
    """Functional form of :meth:`Projector.validate`"""
    return Projector(executive_factory).validate(action, world)
