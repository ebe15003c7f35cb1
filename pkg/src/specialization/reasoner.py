"""Reasoner answering parameter queries from learned models, heuristics as fallback"""

from pathlib import Path
from typing import Any, Dict, Iterator, List, Mapping, Optional, Union

from ..models.designator import Designator
from ..models.domain import EmptySupport
from ..reasoner.distributions import PoseDistribution
from ..reasoner.engine import HeuristicReasoner, ParameterQuery, ParameterReasoner, stream_seed
from ..reasoner.heuristics import base_grid
from ..utils.logger import logger
from ..worldmodel.world import WorldState
from .gaussian import GaussianModel, combine, load_models, specialize

MODES = ("heuristic", "specialized", "combined")


def _learned_order(values: List[Any], learned: List[str]) -> List[Any]:
    rank = {value: i for i, value in enumerate(learned)}
    return sorted(values, key=lambda v: rank.get(v, len(rank)))


class SpecializedReasoner:
    """Parameter reasoner with the same API as the heuristic one.

    For task keys with a learned model, base poses are drawn from the model
    (``specialized``: masked by free space; ``combined``: multiplied with
    the heuristic distribution) and arms and grasps are reordered by their
    learned success rates. Everything else is answered by the heuristics.

    Args:
        heuristic: Fallback reasoner providing grasps, streams and priors
        models: Learned models keyed by task key
        mode: "specialized" or "combined"
    """

    def __init__(self, heuristic: HeuristicReasoner, models: Mapping[str, GaussianModel], mode: str = "specialized"):
        if mode not in ("specialized", "combined"):
            raise ValueError(f"Mode must be specialized or combined, got {mode}")
        self.heuristic = heuristic
        self.models: Dict[str, GaussianModel] = dict(models)
        self.catalog = heuristic.catalog
        self.streams = heuristic.streams
        self._mode = mode
        logger.info(f"SpecializedReasoner initialized ({mode}, {len(self.models)} models)")

    @property
    def mode(self) -> str:
        return self._mode

    def ground_location(self, location: Designator, world: WorldState) -> PoseDistribution:
        return self.heuristic.ground_location(location, world)

    def model_for(self, query: ParameterQuery) -> Optional[GaussianModel]:
        key = query.context.get("task-key")
        return self.models.get(key) if key is not None else None

    def infer(self, query: ParameterQuery) -> Iterator[Any]:
        model = self.model_for(query)
        if model is None:
            return self.heuristic.infer(query)
        if query.parameter == "base-pose":
            return self._base_poses(query, model)
        if query.parameter == "arm":
            return iter(_learned_order(list(self.heuristic.infer(query)), model.arm_order))
        if query.parameter == "grasp":
            return iter(_learned_order(list(self.heuristic.infer(query)), model.grasp_order))
        return self.heuristic.infer(query)

    def base_pose_distribution(self, query: ParameterQuery, model: GaussianModel) -> PoseDistribution:
        """Learned base-pose distribution of a query

        Raises:
            EmptySupport: no cell left after masking
            LocationUnreachable: the heuristic prior of combined mode is empty
        """
        if self._mode == "combined":
            return combine(model, self.heuristic.base_pose_distribution(query))
        grounder = self.heuristic.grounder
        grid = base_grid(query.world, grounder.config)
        return specialize(model, grid, grounder.free_cells(query.world, grid))

    def _base_poses(self, query: ParameterQuery, model: GaussianModel) -> Iterator[Any]:
        try:
            dist = self.base_pose_distribution(query, model)
        except EmptySupport as exc:
            logger.warning(f"Learned base poses for {model.task_key} unusable, using heuristics: {exc}")
            yield from self.heuristic.infer(query)
            return
        key = f"{query.context['task-key']}:base-pose"
        rng = stream_seed(int(query.context.get("seed", self.streams.seed)), key)
        yield from dist.sample(rng, self.streams.base_pose_samples, replace=False)


def build_reasoner(
    mode: str,
    heuristic: HeuristicReasoner,
    models: Optional[Mapping[str, GaussianModel]] = None,
    models_dir: Optional[Union[str, Path]] = None
) -> ParameterReasoner:
    """Reasoner of a marathon mode; learned modes load models from ``models_dir`` unless given"""
    if mode not in MODES:
        raise ValueError(f"Mode must be one of {MODES}, got {mode}")
    if mode == "heuristic":
        return heuristic
    if models is None:
        models = load_models(models_dir) if models_dir is not None else {}
    return SpecializedReasoner(heuristic, models, mode)
